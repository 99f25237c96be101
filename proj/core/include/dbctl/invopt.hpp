#pragma once

#include <string>

#include "dbctl/lqr.hpp"

namespace dbctl {

/// Closed-loop samples stacked column-wise over sample times and
/// trajectories: Xi and Xid are n x qM, U is m x qM.
struct ReferenceBundle {
  Mat Xi;
  Mat Xid;
  Mat U;
  Index trajectories = 1;

  Index n() const { return Xi.rows(); }
  Index m() const { return U.rows(); }
  Index samples() const { return Xi.cols(); }
  void validate() const;
  /// Numerical rank of Xi; full row rank is required by solve_inverse_oc.
  Index rank(double tol = linalg::kDefaultRankTol) const;
};

struct ClosedLoopSampling {
  double spacing = 0.1;
  Index max_samples = 1000;  // per trajectory
  /// Samples kept after Xi first reaches full row rank.
  Index extra_samples = 0;
  double rank_tol = linalg::kDefaultRankTol;
};

/// Simulates xdot = (A - BK)x from each column of X0 and samples xi, xidot and
/// nu = -K xi every `spacing` seconds (starting at t = 0) until the stacked
/// samples have full row rank. Throws ValidationError if A - BK is not Hurwitz
/// and RankError if the budget runs out first.
ReferenceBundle collect_closedloop(const LtiSystem& sys, const Mat& K, const Mat& X0,
                                   const ClosedLoopSampling& sampling = ClosedLoopSampling{});

struct InverseOcResult {
  Mat Q;
  Mat R;
  Mat P;
  Mat P1;
  double residual = 0.0;            // ||Hu^T R U + (Hxd - H_A)^T P Xi||_F
  double lyapunov_residual = 0.0;   // relative residual of the data Lyapunov equation
  std::string solver_message;
};

/// Scale normalization of the homogeneous program: R >= I, or tr(R) = m.
enum class RGauge { kUnitFloor, kTrace };

struct InverseOcOptions {
  RGauge gauge = RGauge::kUnitFloor;
  convex::SolverOptions solver = convex::SolverOptions::from_environment();
};

/// min ||Hu^T R U + (Hxd(j) - H_A(j))^T P Xi||_F over Q, P >= 0, R, P1 > 0
/// subject to the data Lyapunov equation, the data detectability LMI at j,
/// the gauge on R and tr(P1) <= n.
InverseOcResult solve_inverse_oc(const HankelTriple& h, Index j, const ReferenceBundle& bundle,
                                 const InverseOcOptions& options = InverseOcOptions{});

struct RoundTrip {
  LqrResult lqr;
  double deviation = 0.0;  // ||K_lqr - K||_F
};

/// Data-based LQR with the recovered weights, compared against K.
RoundTrip round_trip(const HankelTriple& h, Index j, const InverseOcResult& result, const Mat& K,
                     const LqrOptions& options = LqrOptions{});

}  // namespace dbctl
