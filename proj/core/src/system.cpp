#include "dbctl/system.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dbctl/errors.hpp"

namespace dbctl {

void LtiSystem::validate() const {
  linalg::require_square(A, "A");
  if (A.rows() == 0) throw DimensionError("system has no states");
  if (B.rows() != A.rows()) {
    throw DimensionError("B has " + std::to_string(B.rows()) + " rows, A has " +
                         std::to_string(A.rows()));
  }
  if (B.cols() == 0) throw DimensionError("system has no inputs");
  linalg::require_finite(A, "A");
  linalg::require_finite(B, "B");
}

bool LtiSystem::controllable(double tol) const {
  validate();
  return linalg::controllability_rank(A, B, tol) == n();
}

void TrajectoryData::validate() const {
  if (!(T > 0.0)) throw ValidationError("segment length T must be positive");
  if (N <= 0 || q() == 0) throw DimensionError("trajectory has no samples");
  const Index cols = N * q();
  if (u.cols() != cols || x.cols() != cols || xdot.cols() != cols) {
    throw DimensionError("trajectory sample count does not match N * q = " +
                         std::to_string(cols));
  }
  if (xdot.rows() != x.rows()) throw DimensionError("x and xdot row counts differ");
  for (Index j = 0; j < q(); ++j) {
    if (grid(j) < 0.0 || grid(j) > T * (1.0 + 1e-12)) {
      throw ValidationError("grid point " + std::to_string(grid(j)) + " outside [0, T]");
    }
    if (j > 0 && !(grid(j) > grid(j - 1))) {
      throw ValidationError("grid must be strictly increasing");
    }
  }
  linalg::require_finite(u, "u");
  linalg::require_finite(x, "x");
  linalg::require_finite(xdot, "xdot");
}

Mat mosaic_hankel(const Mat& mu, int depth) {
  const Index m = mu.rows();
  const Index N = mu.cols();
  if (depth <= 0 || depth > N) {
    throw ValidationError("Hankel depth " + std::to_string(depth) + " invalid for " +
                          std::to_string(N) + " input levels");
  }
  const Index cols = N - depth + 1;
  Mat h(m * depth, cols);
  for (int r = 0; r < depth; ++r) h.middleRows(r * m, m) = mu.middleCols(r, cols);
  return h;
}

bool is_pcpe(const Mat& mu, int order, double tol) {
  if (order <= 0 || mu.cols() < order) return false;
  return linalg::rank(mosaic_hankel(mu, order), tol) == mu.rows() * order;
}

Index min_pcpe_length(Index m, Index n) { return (m + 1) * (n + 1) - 1; }

PcpeInput generate_pcpe(Index m, Index n, Index N, double T, std::uint64_t seed) {
  if (m <= 0 || n <= 0) throw ValidationError("m and n must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("T must be positive");
  const Index need = min_pcpe_length(m, n);
  if (N < need) {
    throw ValidationError("N = " + std::to_string(N) + " is too small for a PCPE input of order " +
                          std::to_string(n + 1) + "; need N >= " + std::to_string(need));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(-5.0, 5.0);
  PcpeInput input{T, Mat(m, N), static_cast<int>(n + 1)};
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Index i = 0; i < N; ++i)
      for (Index k = 0; k < m; ++k) input.mu(k, i) = level(rng);
    if (is_pcpe(input.mu, input.order)) return input;
  }
  throw NumericError("could not draw a rank-complete PCPE input");
}

Vec default_grid(double T, Index q) {
  if (q < 1) throw ValidationError("grid needs at least one point");
  if (q == 1) return Vec::Zero(1);
  return Vec::LinSpaced(q, 0.0, T);
}

TrajectoryData simulate(const LtiSystem& sys, const PcpeInput& input, const Vec& x0,
                        const Vec& grid, const NoiseModel& noise) {
  sys.validate();
  const Index n = sys.n();
  const Index m = sys.m();
  if (input.m() != m) {
    throw DimensionError("input has " + std::to_string(input.m()) + " channels, system has " +
                         std::to_string(m));
  }
  if (x0.size() != n) throw DimensionError("x0 length does not match the state dimension");
  if (input.N() == 0) throw DimensionError("input has no segments");
  if (noise.bound < 0.0) throw ValidationError("noise bound must be nonnegative");

  TrajectoryData d;
  d.T = input.T;
  d.N = input.N();
  d.grid = grid;
  const Index q = grid.size();
  d.u.resize(m, d.N * q);
  d.x.resize(n, d.N * q);
  d.xdot.resize(n, d.N * q);
  for (Index j = 0; j < q; ++j) {
    if (grid(j) < 0.0 || grid(j) > input.T * (1.0 + 1e-12) || (j > 0 && !(grid(j) > grid(j - 1)))) {
      throw ValidationError("grid must be strictly increasing within [0, T]");
    }
  }

  // Transition of the augmented state (x, u) over a span dt.
  Mat aug = Mat::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = sys.A;
  aug.topRightCorner(n, m) = sys.B;
  std::vector<Mat> phi(q);
  for (Index j = 0; j < q; ++j) phi[j] = linalg::expm(aug * grid(j)).topRows(n);
  const Mat phi_T = linalg::expm(aug * input.T).topRows(n);

  Vec start = x0;
  for (Index i = 0; i < d.N; ++i) {
    const Vec mu = input.mu.col(i);
    Vec z(n + m);
    z << start, mu;
    for (Index j = 0; j < q; ++j) {
      const Index c = d.column(i, j);
      d.u.col(c) = mu;
      d.x.col(c) = phi[j] * z;
      d.xdot.col(c) = sys.A * d.x.col(c) + sys.B * mu;
    }
    start = phi_T * z;
  }

  if (noise.active()) {
    std::mt19937_64 rng(noise.seed);
    std::uniform_real_distribution<double> draw(-noise.bound, noise.bound);
    if (noise.kind == NoiseKind::kMeasurement) {
      for (Index c = 0; c < d.x.cols(); ++c) {
        for (Index r = 0; r < n; ++r) d.x(r, c) += draw(rng);
        if (noise.corrupt_derivative) {
          for (Index r = 0; r < n; ++r) d.xdot(r, c) += draw(rng);
        }
      }
    } else {
      for (Index c = 0; c < d.xdot.cols(); ++c) {
        for (Index r = 0; r < n; ++r) d.xdot(r, c) += draw(rng);
      }
    }
  }
  if (noise.kind != NoiseKind::kNone) d.noise = noise;
  return d;
}

bool check_T_admissible(const LtiSystem& sys, double T, int max_k, double tol) {
  sys.validate();
  const linalg::CVec lam = linalg::eigenvalues(sys.A);
  for (Index a = 0; a < lam.size(); ++a) {
    for (Index b = a + 1; b < lam.size(); ++b) {
      const double gap = std::abs(lam(a).imag() - lam(b).imag());
      if (gap < 1e-12) continue;
      const double period = 2.0 * std::numbers::pi / gap;
      const double k = std::round(T / period);
      if (k >= 1.0 && k <= max_k && std::abs(T - k * period) <= tol) return false;
    }
  }
  return true;
}

LtiSystem builtin_aircraft() {
  LtiSystem s;
  s.label = "aircraft";
  s.A.resize(4, 4);
  s.A << -0.493, 0.015, -1.0, 0.02,
         -61.176, -7.835, 4.991, 0.0,
         31.804, -0.235, -0.994, 0.0,
         0.0, 1.0, -0.015, 0.0;
  s.B.resize(4, 2);
  s.B << -0.002, 0.002,
         8.246, 1.849,
         0.249, -0.436,
         0.0, 0.0;
  return s;
}

}  // namespace dbctl
