#include <gtest/gtest.h>

#include <cmath>

#include "dbctl/errors.hpp"
#include "dbctl/trajref.hpp"
#include "test_support.hpp"

namespace {

using namespace dbctl;

Mat aircraft_abar() {
  Mat a(4, 4);
  a << -0.5254, 0.0399, -1.4516, 0.1061,
       -1.8232, -2.4526, 1.8725, -0.6407,
       3.1222, -2.4746, -3.3309, -1.3357,
       0.0046, 1.3289, 0.0157, 0.0490;
  return a;
}

Mat aircraft_kbar() {
  Mat k(2, 4);
  k << 6.6951, 0.4425, 1.3996, 0.6780,
       -61.9583, -4.8843, -4.5553, -2.6773;
  return k;
}

Vec unit_x0() {
  Vec x0(4);
  x0 << 1, 0, 0, 1;
  return x0;
}

fixtures::Experiment scalar_experiment(double a, double b) {
  const LtiSystem s{Mat::Constant(1, 1, a), Mat::Constant(1, 1, b), "scalar"};
  return fixtures::run_experiment(s, 5, 0.4, 11);
}

double max_rel_entry_error(const Mat& got, const Mat& want) {
  return ((got - want).array().abs() / want.array().abs()).maxCoeff();
}

TEST(References, GeneratorDerivativesAreExact) {
  std::mt19937_64 rng(2);
  const Mat F = fixtures::uniform(rng, 3, 3);
  const Mat X0 = fixtures::uniform(rng, 3, 2);
  const auto r = references_from_generator(F, X0, default_grid(0.5, 6));
  ASSERT_EQ(r.count(), 6);
  EXPECT_FALSE(r.derivative_estimated);
  for (Index i = 0; i < r.count(); ++i) {
    EXPECT_LE((r.Xid[i] - F * r.Xi[i]).norm(), 1e-12);
  }
  EXPECT_LE((r.Xi[0] - X0).norm(), 1e-15);
}

TEST(References, CentralDifferencesExactForQuadratics) {
  Vec t(5);
  t << 0.0, 0.1, 0.25, 0.3, 0.5;
  std::vector<Mat> xi;
  for (Index i = 0; i < t.size(); ++i) {
    xi.push_back(Mat::Constant(2, 1, 3.0 * t(i) * t(i) - t(i) + 2.0));
  }
  const auto r = make_reference_set(t, xi);
  EXPECT_TRUE(r.derivative_estimated);
  for (Index i = 1; i + 1 < t.size(); ++i) {
    EXPECT_NEAR(r.Xid[i](0, 0), 6.0 * t(i) - 1.0, 1e-10);
  }
  // one-sided ends are first order: exact slope of the chord
  EXPECT_NEAR(r.Xid[0](1, 0), (xi[1](1, 0) - xi[0](1, 0)) / 0.1, 1e-12);
}

TEST(References, Validation) {
  Vec t(2);
  t << 0.0, 0.0;
  EXPECT_THROW(make_reference_set(t, {Mat::Zero(2, 1), Mat::Zero(2, 1)}), ValidationError);
  t << 0.0, 0.1;
  EXPECT_THROW(make_reference_set(t, {Mat::Zero(2, 1), Mat::Zero(3, 1)}), DimensionError);
  EXPECT_THROW(make_reference_set(t.head(1), {Mat::Zero(2, 1)}), ValidationError);
  EXPECT_THROW(make_reference_set(t, {Mat::Zero(2, 1), Mat::Zero(2, 1)},
                                  std::vector<Mat>{Mat::Zero(2, 1)}),
               DimensionError);
}

TEST(Candidate, RecoversGeneratingGainOnRandomSystems) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 3;
    const Index m = 1 + trial % 2;
    const auto sys = fixtures::random_controllable_system(rng, n, m);
    const auto e = fixtures::run_experiment(sys, 8 * (n + 1), 0.1, 200 + trial);
    const Mat K = stabilize_depersis(e.h, e.h.default_index()).K;
    const Mat X0 = fixtures::uniform(rng, n, 2);
    const auto refs = references_from_generator(sys.A - sys.B * K, X0, e.h.grid);
    const auto c = synthesize_candidate(e.h, refs);
    EXPECT_LE(c.cost, 1e-10) << "trial " << trial;
    EXPECT_LE((c.Kbar - K).norm(), 1e-6 * (1.0 + K.norm())) << "trial " << trial;
    ASSERT_EQ(c.Gamma.size(), static_cast<std::size_t>(refs.count()));
    const Mat& hx = e.h.Hx[c.grid_index[0]];
    EXPECT_LE((hx * c.Gamma[0] - X0).norm(), 1e-12 * hx.norm() * c.Gamma[0].norm());
  }
}

TEST(Candidate, ZeroReferencesGiveZeroGain) {
  const auto e = fixtures::aircraft_experiment();
  const Vec t = e.h.grid.head(5);
  const std::vector<Mat> zeros(5, Mat::Zero(4, 1));
  const auto c = synthesize_candidate(e.h, make_reference_set(t, zeros, zeros));
  EXPECT_LE(c.cost, 1e-20);
  EXPECT_LE(c.Kbar.norm(), 1e-12);
}

TEST(Candidate, InfeasibleReferencesHavePositiveCost) {
  const auto e = fixtures::aircraft_experiment();
  const auto refs = references_from_generator(aircraft_abar(), unit_x0(), e.h.grid);
  const auto c = synthesize_candidate(e.h, refs);
  EXPECT_GT(c.cost, 1e-3);
  EXPECT_GT(c.norm_cost, 1e-3);
}

TEST(Candidate, PrintedAircraftGainWithHeavyTracking) {
  const auto e = fixtures::aircraft_experiment();
  const auto refs = references_from_generator(aircraft_abar(), unit_x0(), e.h.grid);
  for (const auto form : {CostForm::kSquared, CostForm::kNorm}) {
    CandidateOptions opt;
    opt.cost_form = form;
    opt.tracking_weight = 1e4;
    const auto c = synthesize_candidate(e.h, refs, opt);
    EXPECT_LE(max_rel_entry_error(c.Kbar, aircraft_kbar()), 0.2);
    EXPECT_GT(c.cost, 0.0);
  }
}

TEST(Candidate, NormFormAgreesOnExactReferences) {
  std::mt19937_64 rng(8);
  const auto sys = fixtures::random_controllable_system(rng, 3, 1);
  const auto e = fixtures::run_experiment(sys, 30, 0.3, 9);
  const Mat K = stabilize_depersis(e.h, e.h.default_index()).K;
  const auto refs =
      references_from_generator(sys.A - sys.B * K, fixtures::uniform(rng, 3, 1), e.h.grid);
  CandidateOptions opt;
  opt.cost_form = CostForm::kNorm;
  const auto c = synthesize_candidate(e.h, refs, opt);
  EXPECT_LE((c.Kbar - K).norm(), 1e-4 * (1.0 + K.norm()));
  EXPECT_LE(c.norm_cost, 1e-5);
}

TEST(Candidate, NormCostNeverBelowSquaredOptimumConsistency) {
  // Each form is optimal for its own objective.
  const auto e = fixtures::aircraft_experiment();
  const auto refs = references_from_generator(aircraft_abar(), unit_x0(), e.h.grid);
  const auto sq = synthesize_candidate(e.h, refs);
  CandidateOptions opt;
  opt.cost_form = CostForm::kNorm;
  const auto nm = synthesize_candidate(e.h, refs, opt);
  EXPECT_LE(sq.cost, nm.cost * (1.0 + 1e-8));
  EXPECT_LE(nm.norm_cost, sq.norm_cost * (1.0 + 1e-6));
}

TEST(Candidate, Errors) {
  const auto e = fixtures::aircraft_experiment();
  Vec t(2);
  t << 0.0123, 0.0456;
  const std::vector<Mat> x(2, Mat::Ones(4, 1));
  EXPECT_THROW(synthesize_candidate(e.h, make_reference_set(t, x, x)), ValidationError);
  const std::vector<Mat> wrong(2, Mat::Ones(3, 1));
  EXPECT_THROW(synthesize_candidate(e.h, make_reference_set(e.h.grid.head(2), wrong, wrong)),
               DimensionError);
  CandidateOptions opt;
  opt.tracking_weight = 0.0;
  EXPECT_THROW(synthesize_candidate(e.h, make_reference_set(e.h.grid.head(2), x, x), opt),
               ValidationError);
}

TEST(Projection, StabilizingGainIsFixedPoint) {
  const auto e = fixtures::aircraft_experiment();
  const Mat Kbar = aircraft_kbar();
  const auto g = project_stabilizing(e.h, e.h.default_index(), Kbar, Mat::Zero(4, 4));
  EXPECT_LE((g.K - Kbar).norm(), 1e-6 * (1.0 + Kbar.norm()));
}

TEST(Projection, FixedPointOnRandomInstances) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = fixtures::random_controllable_system(rng, 3, 2);
    const auto e = fixtures::run_experiment(sys, 40, 0.1, 100 + trial);
    const Index j = e.h.default_index();
    const Mat K = stabilize_depersis(e.h, j).K;
    const auto g = project_stabilizing(e.h, j, K, Mat::Zero(3, 3));
    EXPECT_LE((g.K - K).norm(), 1e-6 * (1.0 + K.norm())) << "trial " << trial;
    const auto z = project_stabilizing(e.h, j, Mat::Zero(2, 3), Mat::Zero(3, 3));
    EXPECT_TRUE(linalg::is_hurwitz(sys.A - sys.B * z.K)) << "trial " << trial;
  }
}

TEST(Projection, StabilizesUnstableAircraftOpenLoop) {
  const auto e = fixtures::aircraft_experiment();
  ASSERT_FALSE(linalg::is_hurwitz(e.sys.A));
  const auto g = project_stabilizing(e.h, e.h.default_index(), Mat::Zero(2, 4), Mat::Zero(4, 4));
  EXPECT_TRUE(is_stabilizing(e.h, e.h.default_index(), g.K));
  EXPECT_TRUE(linalg::is_hurwitz(e.sys.A - e.sys.B * g.K));
}

TEST(Projection, ScalarDestabilizingGainMovesPastOne) {
  const auto e = scalar_experiment(1.0, 1.0);
  const auto g = project_stabilizing(e.h, e.h.default_index(), Mat::Constant(1, 1, 0.5),
                                     Mat::Zero(1, 1));
  EXPECT_GT(g.K(0, 0), 1.0);
}

TEST(Projection, Errors) {
  const auto e = fixtures::aircraft_experiment();
  const Index j = e.h.default_index();
  EXPECT_THROW(project_stabilizing(e.h, j, Mat::Zero(4, 2), Mat::Zero(4, 4)), DimensionError);
  EXPECT_THROW(project_stabilizing(e.h, j, Mat::Zero(2, 4), -Mat::Identity(4, 4)),
               ValidationError);
  EXPECT_THROW(project_stabilizing(e.h, j, Mat::Zero(2, 4), 1e12 * Mat::Identity(4, 4)),
               InfeasibleError);
  ProjectionOptions opt;
  opt.scale_fraction = 1.5;
  EXPECT_THROW(project_stabilizing(e.h, j, Mat::Zero(2, 4), Mat::Zero(4, 4), opt),
               ValidationError);
}

TEST(Pipeline, FeasibleReferencesReturnGeneratingGain) {
  std::mt19937_64 rng(44);
  const auto sys = fixtures::random_controllable_system(rng, 3, 2);
  const auto e = fixtures::run_experiment(sys, 40, 0.2, 5);
  const Mat K = stabilize_depersis(e.h, e.h.default_index()).K;
  const auto refs =
      references_from_generator(sys.A - sys.B * K, fixtures::uniform(rng, 3, 1), e.h.grid);
  const auto out = trajref_pipeline(e.h, refs, Mat::Zero(3, 3));
  EXPECT_LE((out.gain.K - K).norm(), 1e-6 * (1.0 + K.norm()));
}

TEST(Pipeline, AircraftTracksInfeasibleReferences) {
  const auto e = fixtures::aircraft_experiment();
  const Mat Abar = aircraft_abar();
  const auto refs = references_from_generator(Abar, unit_x0(), e.h.grid);
  CandidateOptions copt;
  copt.tracking_weight = 1e4;
  const auto out = trajref_pipeline(e.h, refs, Mat::Zero(4, 4), std::nullopt,
                                    ProjectionOptions{}, copt);
  const Mat Acl = e.sys.A - e.sys.B * out.gain.K;
  EXPECT_TRUE(linalg::is_hurwitz(Acl));
  EXPECT_LE((out.gain.K - out.candidate.Kbar).norm(), 1e-6 * out.candidate.Kbar.norm());
  double worst = 0.0;
  for (double t = 0.0; t <= 5.0; t += 0.05) {
    const Vec x = linalg::expm(Acl * t) * unit_x0();
    const Vec xi = linalg::expm(Abar * t) * unit_x0();
    worst = std::max(worst, (x - xi).norm());
  }
  EXPECT_LE(worst, 0.25 * unit_x0().norm());
}

}  // namespace
