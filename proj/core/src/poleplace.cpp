#include "dbctl/poleplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dbctl/errors.hpp"
#include "dbctl/smooth.hpp"

namespace dbctl {
namespace {

constexpr double kSingularRatio = 1e-13;

bool close(Complex a, Complex b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

// First block of a conjugate pair, its partner, or a real eigenvalue.
enum class Role { kPairFirst, kPairSecond, kReal };

Role role(const PoleSpec& spec, Index i) {
  const double im = spec.entries()[static_cast<std::size_t>(i)].value.imag();
  if (im > 0.0) return Role::kPairFirst;
  if (im < 0.0) return Role::kPairSecond;
  return Role::kReal;
}

Index eta(const PoleSpec& spec, Index i) {
  return spec.entries()[static_cast<std::size_t>(i)].multiplicity;
}

// Orthonormal basis of the dominant column space of p, at most `cap` columns.
template <typename M>
M dominant_basis(const M& p, Index cap, double tol) {
  if (p.cols() == 0) return M(p.rows(), 0);
  Eigen::JacobiSVD<M> svd(p, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Index r = 0;
  const double floor = tol * (sv.size() > 0 ? sv(0) : 0.0);
  while (r < sv.size() && sv(r) > floor && sv(r) > 0.0) ++r;
  return svd.matrixU().leftCols(std::min(r, cap));
}

// Real form of M = N G: V (state rows) and W (input rows).
void real_form(const NullFamily& fam, const ParamG& g, Mat& V, Mat& W) {
  V.resize(fam.n, fam.n);
  W.resize(fam.m, fam.n);
  Index c = 0;
  for (Index i = 0; i < fam.spec.size(); ++i) {
    const Index e = eta(fam.spec, i);
    const Role r = role(fam.spec, i);
    if (r == Role::kPairSecond) continue;
    const auto ii = static_cast<std::size_t>(i);
    const CMat Mi = fam.N[ii] * g.blocks[ii];
    V.middleCols(c, e) = Mi.topRows(fam.n).real();
    W.middleCols(c, e) = Mi.bottomRows(fam.m).real();
    c += e;
    if (r == Role::kPairFirst) {
      V.middleCols(c, e) = Mi.topRows(fam.n).imag();
      W.middleCols(c, e) = Mi.bottomRows(fam.m).imag();
      c += e;
    }
  }
}

bool numerically_singular(const Mat& V) {
  Eigen::JacobiSVD<Mat> svd(V);
  const auto& sv = svd.singularValues();
  return !(sv(sv.size() - 1) > kSingularRatio * sv(0));
}

ParamG draw_admissible(const NullFamily& fam, std::mt19937_64& rng, int max_redraws) {
  Mat V, W;
  for (int k = 0; k <= max_redraws; ++k) {
    ParamG g = random_param(fam, rng);
    real_form(fam, g, V, W);
    if (!numerically_singular(V)) return g;
  }
  throw RankError("V(G) was singular for " + std::to_string(max_redraws + 1) +
                  " random draws of G");
}

PolePlacementResult finish(const NullFamily& fam, const ParamG& g, std::string method) {
  const PlacedGain pg = gain_from_G(fam, g);
  PolePlacementResult r;
  r.K = pg.K;
  r.V = pg.V;
  r.W = pg.W;
  r.G = g;
  r.objective = pg.objective;
  r.initial_objective = pg.objective;
  r.method = std::move(method);
  return r;
}

}  // namespace

PoleSpec PoleSpec::from_entries(std::vector<PoleEntry> entries, double tol) {
  std::vector<PoleEntry> merged;
  for (auto e : entries) {
    if (!std::isfinite(e.value.real()) || !std::isfinite(e.value.imag())) {
      throw ValidationError("pole values must be finite");
    }
    if (e.multiplicity < 1) throw ValidationError("pole multiplicities must be positive");
    if (std::abs(e.value.imag()) <= tol * (1.0 + std::abs(e.value))) {
      e.value = Complex(e.value.real(), 0.0);
    }
    auto hit = std::find_if(merged.begin(), merged.end(),
                            [&](const PoleEntry& m) { return close(m.value, e.value, tol); });
    if (hit != merged.end()) {
      hit->multiplicity += e.multiplicity;
    } else {
      merged.push_back(e);
    }
  }
  PoleSpec spec;
  for (const auto& e : merged) {
    if (e.value.imag() <= 0.0) continue;
    auto partner = std::find_if(merged.begin(), merged.end(), [&](const PoleEntry& m) {
      return m.value.imag() < 0.0 && close(m.value, std::conj(e.value), tol);
    });
    if (partner == merged.end() || partner->multiplicity != e.multiplicity) {
      throw ValidationError("pole set is not self-conjugate");
    }
    spec.entries_.push_back(e);
    spec.entries_.push_back({std::conj(e.value), e.multiplicity});
  }
  const Index pairs = static_cast<Index>(spec.entries_.size()) / 2;
  const auto negatives = std::count_if(merged.begin(), merged.end(),
                                       [](const PoleEntry& m) { return m.value.imag() < 0.0; });
  if (negatives != pairs) throw ValidationError("pole set is not self-conjugate");
  for (const auto& e : merged) {
    if (e.value.imag() == 0.0) spec.entries_.push_back(e);
  }
  if (spec.entries_.empty()) throw ValidationError("pole set is empty");
  return spec;
}

PoleSpec PoleSpec::from_values(const CVec& values, double tol) {
  std::vector<PoleEntry> entries;
  entries.reserve(static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i) entries.push_back({values(i), 1});
  return from_entries(std::move(entries), tol);
}

Index PoleSpec::n() const {
  Index total = 0;
  for (const auto& e : entries_) total += e.multiplicity;
  return total;
}

Index PoleSpec::complex_pairs() const {
  return static_cast<Index>(std::count_if(entries_.begin(), entries_.end(),
                                          [](const PoleEntry& e) { return e.value.imag() > 0.0; }));
}

CVec PoleSpec::values() const {
  CVec out(n());
  Index k = 0;
  for (const auto& e : entries_) {
    for (Index r = 0; r < e.multiplicity; ++r) out(k++) = e.value;
  }
  return out;
}

void PoleSpec::validate(Index n, Index m) const {
  if (this->n() != n) {
    throw DimensionError("pole multiplicities add up to " + std::to_string(this->n()) +
                         ", expected n = " + std::to_string(n));
  }
  for (const auto& e : entries_) {
    if (e.multiplicity > m) {
      throw ValidationError("multiplicity " + std::to_string(e.multiplicity) +
                            " exceeds the number of inputs m = " + std::to_string(m));
    }
  }
}

CMat NullFamily::assembled() const {
  Index cols = 0;
  for (const auto& b : N) cols += b.cols();
  CMat out(n + m, cols);
  Index c = 0;
  for (const auto& b : N) {
    out.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

Index NullFamily::parameter_count() const {
  Index count = 0;
  for (Index i = 0; i < spec.size(); ++i) {
    const Index block = s(i) * eta(spec, i);
    switch (role(spec, i)) {
      case Role::kPairFirst: count += 2 * block; break;
      case Role::kReal: count += block; break;
      case Role::kPairSecond: break;
    }
  }
  return count;
}

NullFamily build_null_family(const HankelTriple& h, Index j, const PoleSpec& spec,
                             double rank_tol) {
  require_pe(h, j);
  NullFamily fam;
  fam.spec = spec;
  fam.n = h.n();
  fam.m = h.m();
  spec.validate(fam.n, fam.m);
  const auto jj = static_cast<std::size_t>(j);
  const Mat& hx = h.Hx[jj];
  const Mat& hxd = h.Hxd[jj];
  Mat D(fam.n + fam.m, h.N);
  D << hx, h.Hu;

  for (Index i = 0; i < spec.size(); ++i) {
    const Complex lambda = spec.entries()[static_cast<std::size_t>(i)].value;
    switch (role(spec, i)) {
      case Role::kPairSecond:
        fam.S.push_back(fam.S.back().conjugate());
        fam.Nbar.push_back(fam.Nbar.back().conjugate());
        fam.N.push_back(fam.N.back().conjugate());
        break;
      case Role::kReal: {
        const Mat S = hxd - lambda.real() * hx;
        const Mat nbar = linalg::null_space_basis(S, rank_tol);
        fam.S.push_back(S.cast<Complex>());
        fam.Nbar.push_back(nbar.cast<Complex>());
        fam.N.push_back(dominant_basis<Mat>(D * nbar, fam.m, rank_tol).cast<Complex>());
        break;
      }
      case Role::kPairFirst: {
        const CMat S = hxd.cast<Complex>() - lambda * hx.cast<Complex>();
        const CMat nbar = linalg::null_space_basis(S, rank_tol);
        fam.S.push_back(S);
        fam.Nbar.push_back(nbar);
        fam.N.push_back(dominant_basis<CMat>(D.cast<Complex>() * nbar, fam.m, rank_tol));
        break;
      }
    }
    if (fam.N.back().cols() < eta(spec, i)) {
      throw RankError("null space for eigenvalue (" + std::to_string(lambda.real()) + ", " +
                      std::to_string(lambda.imag()) + ") has dimension " +
                      std::to_string(fam.N.back().cols()) + " < multiplicity " +
                      std::to_string(eta(spec, i)));
    }
  }
  return fam;
}

CMat ParamG::matrix() const {
  Index rows = 0;
  Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  CMat out = CMat::Zero(rows, cols);
  Index r = 0;
  Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

ParamG param_from_vector(const NullFamily& fam, const Vec& theta) {
  if (theta.size() != fam.parameter_count()) {
    throw DimensionError("parameter vector has the wrong length");
  }
  ParamG g;
  Index k = 0;
  for (Index i = 0; i < fam.spec.size(); ++i) {
    const Index s = fam.s(i);
    const Index e = eta(fam.spec, i);
    const Index len = s * e;
    switch (role(fam.spec, i)) {
      case Role::kReal:
        g.blocks.push_back(Mat(theta.segment(k, len).reshaped(s, e)).cast<Complex>());
        k += len;
        break;
      case Role::kPairFirst: {
        CMat b(s, e);
        b.real() = theta.segment(k, len).reshaped(s, e);
        b.imag() = theta.segment(k + len, len).reshaped(s, e);
        g.blocks.push_back(b);
        k += 2 * len;
        break;
      }
      case Role::kPairSecond:
        g.blocks.push_back(g.blocks.back().conjugate());
        break;
    }
  }
  return g;
}

void validate_param(const NullFamily& fam, const ParamG& g) {
  if (static_cast<Index>(g.blocks.size()) != fam.spec.size()) {
    throw DimensionError("G needs one block per distinct eigenvalue");
  }
  for (Index i = 0; i < fam.spec.size(); ++i) {
    const auto& b = g.blocks[static_cast<std::size_t>(i)];
    if (b.rows() != fam.s(i) || b.cols() != eta(fam.spec, i)) {
      throw DimensionError("G block " + std::to_string(i) + " has the wrong shape");
    }
    if (!b.allFinite()) throw ValidationError("G has non-finite entries");
    const double scale = 1e-12 * (1.0 + b.norm());
    switch (role(fam.spec, i)) {
      case Role::kReal:
        if (b.imag().norm() > scale) throw ValidationError("G blocks of real eigenvalues must be real");
        break;
      case Role::kPairSecond:
        if ((b - g.blocks[static_cast<std::size_t>(i - 1)].conjugate()).norm() > scale) {
          throw ValidationError("G blocks of a conjugate pair must be conjugate");
        }
        break;
      case Role::kPairFirst:
        break;
    }
  }
}

Vec param_to_vector(const NullFamily& fam, const ParamG& g) {
  validate_param(fam, g);
  Vec theta(fam.parameter_count());
  Index k = 0;
  for (Index i = 0; i < fam.spec.size(); ++i) {
    const auto& b = g.blocks[static_cast<std::size_t>(i)];
    const Index len = b.size();
    switch (role(fam.spec, i)) {
      case Role::kReal:
        theta.segment(k, len) = Mat(b.real()).reshaped();
        k += len;
        break;
      case Role::kPairFirst:
        theta.segment(k, len) = Mat(b.real()).reshaped();
        theta.segment(k + len, len) = Mat(b.imag()).reshaped();
        k += 2 * len;
        break;
      case Role::kPairSecond:
        break;
    }
  }
  return theta;
}

ParamG random_param(const NullFamily& fam, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec theta(fam.parameter_count());
  for (Index k = 0; k < theta.size(); ++k) theta(k) = unit(rng);
  return param_from_vector(fam, theta);
}

PlacedGain gain_from_G(const NullFamily& fam, const ParamG& g) {
  validate_param(fam, g);
  PlacedGain out;
  real_form(fam, g, out.V, out.W);
  if (numerically_singular(out.V)) {
    throw RankError("V(G) is singular; choose another G");
  }
  const Mat Vinv = out.V.partialPivLu().inverse();
  out.K = -out.W * Vinv;
  out.X = (fam.assembled() * g.matrix()).topRows(fam.n);
  out.objective = out.V.norm() + Vinv.norm();
  return out;
}

double condition_objective(const NullFamily& fam, const Vec& theta, Vec* grad) {
  Mat V, W;
  real_form(fam, param_from_vector(fam, theta), V, W);
  if (!V.allFinite() || numerically_singular(V)) {
    return std::numeric_limits<double>::infinity();
  }
  const Mat Y = V.partialPivLu().inverse();
  const double nv = V.norm();
  const double ny = Y.norm();
  if (grad != nullptr) {
    const Mat GV = V / nv - Y.transpose() * Y * Y.transpose() / ny;
    grad->resize(theta.size());
    Index k = 0;
    Index c = 0;
    for (Index i = 0; i < fam.spec.size(); ++i) {
      const Index e = eta(fam.spec, i);
      const CMat Nx = fam.N[static_cast<std::size_t>(i)].topRows(fam.n);
      const Index len = Nx.cols() * e;
      switch (role(fam.spec, i)) {
        case Role::kReal:
          grad->segment(k, len) = Mat(Nx.real().transpose() * GV.middleCols(c, e)).reshaped();
          k += len;
          c += e;
          break;
        case Role::kPairFirst: {
          const Mat Nr = Nx.real();
          const Mat Ni = Nx.imag();
          const Mat cre = GV.middleCols(c, e);
          const Mat cim = GV.middleCols(c + e, e);
          grad->segment(k, len) = Mat(Nr.transpose() * cre + Ni.transpose() * cim).reshaped();
          grad->segment(k + len, len) =
              Mat(Nr.transpose() * cim - Ni.transpose() * cre).reshaped();
          k += 2 * len;
          c += 2 * e;
          break;
        }
        case Role::kPairSecond:
          break;
      }
    }
  }
  return nv + ny;
}

PolePlacementResult place_poles_robust(const HankelTriple& h, Index j, const PoleSpec& spec,
                                       const PolePlacementOptions& opt) {
  if (opt.restarts < 1 || opt.max_iterations < 0) {
    throw ValidationError("restarts must be positive and max_iterations non-negative");
  }
  const NullFamily fam = build_null_family(h, j, spec, opt.rank_tol);
  const convex::SmoothObjective f = [&fam](const Vec& theta, Vec* grad) {
    return condition_objective(fam, theta, grad);
  };
  convex::SmoothOptions smooth;
  smooth.max_iterations = opt.max_iterations;

  bool found = false;
  Vec best;
  double best_value = std::numeric_limits<double>::infinity();
  double best_start = 0.0;
  int completed = 0;
  for (int r = 0; r < opt.restarts; ++r) {
    std::seed_seq seq{opt.seed, static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    ParamG g0;
    try {
      g0 = draw_admissible(fam, rng, opt.max_redraws);
    } catch (const RankError&) {
      continue;
    }
    const auto res = convex::minimize_smooth(f, param_to_vector(fam, g0), smooth);
    ++completed;
    if (std::isfinite(res.value) && res.value < best_value) {
      best_value = res.value;
      best = res.x;
      best_start = res.initial_value;
      found = true;
    }
  }
  if (!found) throw RankError("every restart produced a singular V(G)");
  auto out = finish(fam, param_from_vector(fam, best), "robust pole placement");
  out.initial_objective = best_start;
  out.restarts_completed = completed;
  return out;
}

PolePlacementResult place_poles_baseline(const HankelTriple& h, Index j, const PoleSpec& spec,
                                         std::uint64_t seed, double rank_tol) {
  const NullFamily fam = build_null_family(h, j, spec, rank_tol);
  std::mt19937_64 rng(seed);
  auto out = finish(fam, draw_admissible(fam, rng, 100), "random-parameter pole placement");
  out.restarts_completed = 1;
  return out;
}

double placement_error(const Mat& K, const LtiSystem& sys, const PoleSpec& spec) {
  sys.validate();
  if (K.rows() != sys.m() || K.cols() != sys.n()) throw DimensionError("K has the wrong shape");
  if (spec.n() != sys.n()) throw DimensionError("pole set size does not match n");
  const CVec got = linalg::eigenvalues(sys.A - sys.B * K);
  const CVec want = spec.values();
  auto sorted = [](const CVec& v) {
    std::vector<Complex> out(v.data(), v.data() + v.size());
    std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
      if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
      if (a.real() != b.real()) return a.real() < b.real();
      return a.imag() < b.imag();
    });
    return out;
  };
  const auto a = sorted(got);
  const auto b = sorted(want);
  double eps = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) eps += std::abs(a[i] - b[i]);
  return eps;
}

}  // namespace dbctl
