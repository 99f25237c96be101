#pragma once

#include <optional>

#include "dbctl/datamat.hpp"
#include "dbctl/sdp.hpp"

namespace dbctl {

struct WeightPair {
  Mat Q;  // n x n, PSD
  Mat R;  // m x m, PD

  /// Throws unless Q is symmetric PSD and R symmetric PD with the given sizes.
  void validate(Index n, Index m) const;
};

struct LqrResult {
  Mat K;
  Mat Pstar;
  Mat Gamma;
  double gamma_residual = 0.0;  // relative residual of the linear system for Gamma
  double objective = 0.0;       // tr(Pstar)
  std::optional<double> are_residual;
  std::string solver_message;
};

struct LqrOptions {
  /// Right-hand side of the first block row of the Gamma system; identity if unset.
  std::optional<Mat> S;
  double gamma_tol = 1e-7;
  convex::SolverOptions solver = convex::SolverOptions::from_environment();
};

/// L(P) = Hx^T Q Hx + Hu^T R Hu + Hx^T P Hxd + Hxd^T P Hx at grid index j.
Mat lqr_data_matrix(const HankelTriple& h, Index j, const WeightPair& w, const Mat& P);

/// max tr(P) s.t. P > 0, L(P) >= 0, then [Hx; L(P*)] Gamma = [S; 0] and
/// K = -Hu Gamma (Hx Gamma)^{-1}.
LqrResult solve_lqr_data(const HankelTriple& h, Index j, const WeightPair& w,
                         const LqrOptions& options = LqrOptions{});

struct LqrVerification {
  double are_residual = 0.0;   // ||Q + PA + A^T P - P B R^-1 B^T P||_F
  double gain_residual = 0.0;  // ||K - R^-1 B^T P||_F
  double tolerance = 1e-6;
  bool pass = false;
};

LqrVerification verify_lqr(const LtiSystem& sys, const LqrResult& result, const WeightPair& w,
                           double tolerance = 1e-6);

}  // namespace dbctl
