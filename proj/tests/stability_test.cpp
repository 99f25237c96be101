#include <gtest/gtest.h>

#include "dbctl/errors.hpp"
#include "dbctl/stability.hpp"
#include "test_support.hpp"

namespace {

using namespace dbctl;

fixtures::Experiment scalar_experiment(double a, double b, std::uint64_t seed = 11) {
  const LtiSystem s{Mat::Constant(1, 1, a), Mat::Constant(1, 1, b), "scalar"};
  return fixtures::run_experiment(s, 5, 0.4, seed);
}

Mat paper_kbar() {
  Mat k(2, 4);
  k << 6.6951, 0.4425, 1.3996, 0.6780,
       -61.9583, -4.8843, -4.5553, -2.6773;
  return k;
}

TEST(Gamma, SatisfiesBothConditions) {
  const auto e = fixtures::aircraft_experiment();
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const Mat K = fixtures::uniform(rng, 2, 4, -3, 3);
    const Index j = static_cast<Index>(rng() % e.h.q());
    const Mat g = gamma_for_gain(e.h, j, K);
    EXPECT_LE(((e.h.Hu + K * e.h.Hx[j]) * g).norm(), 1e-8);
    EXPECT_LE((e.h.Hx[j] * g - Mat::Identity(4, 4)).norm(), 1e-8);
  }
}

TEST(Gamma, ZeroGainLiesInInputNullSpace) {
  const auto e = fixtures::aircraft_experiment();
  EXPECT_LE((e.h.Hu * gamma_for_gain(e.h, 3, Mat::Zero(2, 4))).norm(), 1e-9);
}

TEST(Gamma, WrongGainShape) {
  const auto e = fixtures::aircraft_experiment();
  EXPECT_THROW(gamma_for_gain(e.h, 0, Mat::Zero(4, 2)), DimensionError);
}

TEST(ClosedLoop, ZeroGainRecoversA) {
  const auto e = fixtures::aircraft_experiment();
  const Mat a = closed_loop_from_data(e.h, e.h.default_index(), Mat::Zero(2, 4));
  EXPECT_LE((a - e.sys.A).cwiseAbs().maxCoeff(), 1e-8 * e.sys.A.cwiseAbs().maxCoeff());
  EXPECT_EQ(is_stabilizing(e.h, 0, Mat::Zero(2, 4)), linalg::is_hurwitz(e.sys.A));
}

TEST(ClosedLoop, ScalarArithmetic) {
  const auto e = scalar_experiment(1.0, 1.0);
  EXPECT_NEAR(closed_loop_from_data(e.h, 2, Mat::Constant(1, 1, 3.0))(0, 0), -2.0, 1e-9);
  EXPECT_FALSE(is_stabilizing(e.h, 2, Mat::Constant(1, 1, 0.5)));
  EXPECT_TRUE(is_stabilizing(e.h, 2, Mat::Constant(1, 1, 3.0)));
}

TEST(ClosedLoop, IndependentOfGridTime) {
  const auto e = fixtures::aircraft_experiment();
  const Mat K = paper_kbar();
  const Mat first = closed_loop_from_data(e.h, 0, K);
  for (Index j = 1; j < e.h.q(); ++j) {
    EXPECT_LE((closed_loop_from_data(e.h, j, K) - first).cwiseAbs().maxCoeff(), 1e-7);
  }
  EXPECT_LE((first - (e.sys.A - e.sys.B * K)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(ClosedLoop, PrintedCandidateIsStabilizing) {
  const auto e = fixtures::aircraft_experiment();
  EXPECT_TRUE(is_stabilizing(e.h, e.h.default_index(), paper_kbar()));
}

TEST(ClosedLoop, Theorem2EquivalenceOnRandomGains) {
  const auto e = fixtures::aircraft_experiment();
  std::mt19937_64 rng(17);
  int stable = 0;
  for (int k = 0; k < 100; ++k) {
    const Mat K = fixtures::uniform(rng, 2, 4, -5, 5);
    const bool model = linalg::is_hurwitz(e.sys.A - e.sys.B * K);
    stable += model ? 1 : 0;
    ASSERT_EQ(is_stabilizing(e.h, e.h.default_index(), K), model) << "trial " << k;
  }
  EXPECT_GT(stable, 0);
  EXPECT_LT(stable, 100);
}

TEST(Depersis, AircraftGainStabilizes) {
  const auto e = fixtures::aircraft_experiment();
  const GainResult r = stabilize_depersis(e.h, e.h.default_index());
  EXPECT_TRUE(linalg::is_hurwitz(e.sys.A - e.sys.B * r.K));
  EXPECT_TRUE(is_stabilizing(e.h, e.h.default_index(), r.K));
  ASSERT_TRUE(r.P.has_value());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat>(*r.P).eigenvalues().minCoeff(), 0.0);
}

TEST(Depersis, ScalarUnstable) {
  const auto e = scalar_experiment(1.0, 1.0);
  const GainResult r = stabilize_depersis(e.h, 2);
  EXPECT_GT(r.K(0, 0), 1.0);
}

TEST(Depersis, ScalarStable) {
  const auto e = scalar_experiment(-1.0, 1.0);
  const GainResult r = stabilize_depersis(e.h, 2);
  EXPECT_LT(-1.0 - r.K(0, 0), 0.0);
}

TEST(Depersis, RandomSystemsProperty) {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 10; ++k) {
    const Index n = 2 + static_cast<Index>(rng() % 3);
    const auto s = fixtures::random_controllable_system(rng, n, 1);
    const auto e = fixtures::run_experiment(s, min_pcpe_length(1, n) + 3, 0.5, rng());
    const GainResult r = stabilize_depersis(e.h, e.h.default_index());
    ASSERT_TRUE(linalg::is_hurwitz(s.A - s.B * r.K)) << "system " << k;
  }
}

TEST(NoiseRobust, NoiselessAircraft) {
  const auto e = fixtures::aircraft_experiment();
  const GainResult r = stabilize_noise_robust(e.h, e.h.default_index(), Mat::Zero(4, 4));
  EXPECT_TRUE(linalg::is_hurwitz(e.sys.A - e.sys.B * r.K));
  ASSERT_TRUE(r.P && r.L && r.beta);
  EXPECT_GT(*r.beta, 0.0);
  EXPECT_LE((r.K + *r.L * r.P->inverse()).norm(), 1e-9 * (1 + r.K.norm()));
}

TEST(NoiseRobust, ScalarCertificate) {
  const auto e = scalar_experiment(1.0, 1.0);
  const GainResult r = stabilize_noise_robust(e.h, 2, Mat::Zero(1, 1));
  ASSERT_TRUE(r.P && r.L);
  const double k = -(*r.L)(0, 0) / (*r.P)(0, 0);
  EXPECT_NEAR(k, r.K(0, 0), 1e-12);
  EXPECT_LT(1.0 - k, 0.0);
}

TEST(NoiseRobust, HugeDisturbanceBoundInfeasible) {
  const auto e = fixtures::aircraft_experiment();
  EXPECT_THROW(stabilize_noise_robust(e.h, 0, 1e6 * Mat::Identity(4, 4)), InfeasibleError);
}

TEST(NoiseRobust, RejectsIndefiniteBound) {
  const auto e = fixtures::aircraft_experiment();
  EXPECT_THROW(stabilize_noise_robust(e.h, 0, -Mat::Identity(4, 4)), ValidationError);
}

TEST(NoiseRobust, NoisyDataStillStabilizes) {
  const LtiSystem s = builtin_aircraft();
  const NoiseModel noise{NoiseKind::kMeasurement, 1e-3, 13, true};
  const auto e = fixtures::run_experiment(s, 15, 0.5, 7, 21, noise);
  const GainResult r =
      stabilize_noise_robust(e.h, e.h.default_index(), default_wbar(e.h, 1e-3));
  EXPECT_TRUE(linalg::is_hurwitz(s.A - s.B * r.K));
}

}  // namespace
