#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dbctl/linalg.hpp"

namespace dbctl {

using linalg::Mat;
using linalg::Vec;
using Eigen::Index;

struct LtiSystem {
  Mat A;
  Mat B;
  std::string label;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  /// Throws ValidationError/DimensionError on inconsistent or non-finite data.
  void validate() const;
  bool controllable(double tol = linalg::kDefaultRankTol) const;
};

/// Piecewise-constant input: u(t + iT) = mu.col(i) on each segment.
struct PcpeInput {
  double T = 1.0;
  Mat mu;  // m x N
  int order = 0;

  Index m() const { return mu.rows(); }
  Index N() const { return mu.cols(); }
};

enum class NoiseKind { kNone, kMeasurement, kProcess };

struct NoiseModel {
  NoiseKind kind = NoiseKind::kNone;
  double bound = 0.0;
  std::uint64_t seed = 0;
  bool corrupt_derivative = true;  // measurement noise also hits xdot samples

  bool active() const { return kind != NoiseKind::kNone && bound > 0.0; }
};

/// Samples at t_j + iT for segments i = 0..N-1 and grid points j = 0..q-1.
/// Column i*q + j of u, x and xdot holds the sample (i, j).
struct TrajectoryData {
  double T = 1.0;
  Index N = 0;
  Vec grid;
  Mat u;
  Mat x;
  Mat xdot;
  std::optional<NoiseModel> noise;

  Index q() const { return grid.size(); }
  Index n() const { return x.rows(); }
  Index m() const { return u.rows(); }
  Index column(Index segment, Index j) const { return segment * q() + j; }
  void validate() const;
};

/// Depth-L mosaic Hankel matrix of the input levels, (m L) x (N - L + 1).
Mat mosaic_hankel(const Mat& mu, int depth);
bool is_pcpe(const Mat& mu, int order, double tol = linalg::kDefaultRankTol);
Index min_pcpe_length(Index m, Index n);

/// Order n+1 PCPE input with levels uniform on [-5, 5], redrawn until the
/// rank condition holds.
PcpeInput generate_pcpe(Index m, Index n, Index N, double T, std::uint64_t seed);

/// q equally spaced points on [0, T].
Vec default_grid(double T, Index q = 21);

/// Exact segment-wise simulation. At a grid point equal to T the sample
/// belongs to segment i (left limit of the input).
TrajectoryData simulate(const LtiSystem& sys, const PcpeInput& input, const Vec& x0,
                        const Vec& grid, const NoiseModel& noise = NoiseModel{});

/// False iff T lies within tol of 2 pi k / |Im(l_i - l_j)| for an eigenvalue
/// pair of A and some integer 1 <= k <= max_k.
bool check_T_admissible(const LtiSystem& sys, double T, int max_k = 100000,
                        double tol = 1e-9);

/// Linearized lateral aircraft model (sideslip, pitch rate, yaw rate, roll).
LtiSystem builtin_aircraft();

}  // namespace dbctl
