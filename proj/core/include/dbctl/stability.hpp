#pragma once

#include <optional>
#include <string>

#include "dbctl/datamat.hpp"
#include "dbctl/sdp.hpp"

namespace dbctl {

struct GainResult {
  Mat K;
  std::optional<Mat> P;
  std::optional<Mat> L;
  std::optional<double> beta;
  std::optional<Mat> Gamma;
  Mat closed_loop_estimate;
  std::string method;
  double objective = 0.0;
  std::string solver_message;
};

/// Gamma with (Hu + K Hx(t_j)) Gamma = 0 and Hx(t_j) Gamma = I.
Mat gamma_for_gain(const HankelTriple& h, Index j, const Mat& K);

/// Hxd Gamma (Hx Gamma)^{-1}, the data-based estimate of A - BK.
Mat closed_loop_from_data(const HankelTriple& h, Index j, const Mat& K);

bool is_stabilizing(const HankelTriple& h, Index j, const Mat& K, double margin = 0.0);

struct DepersisOptions {
  double decay = 0.1;  // closed-loop Lyapunov decay rate imposed for strictness
  convex::SolverOptions solver = convex::SolverOptions::from_environment();
};

/// Hx Gamma = P >= I, Hxd Gamma + Gamma^T Hxd^T + 2 decay P < 0, smallest ||Gamma||.
GainResult stabilize_depersis(const HankelTriple& h, Index j,
                              const DepersisOptions& options = DepersisOptions{});

/// Disturbance-robust LMI with P > 0, beta > 0 (beta maximized), K = -L P^{-1}.
GainResult stabilize_noise_robust(const HankelTriple& h, Index j, const Mat& Wbar,
                                  const convex::SolverOptions& options =
                                      convex::SolverOptions::from_environment());

/// Conservative disturbance bound T q N vbar^2 I for measurement noise of size vbar.
Mat default_wbar(const HankelTriple& h, double noise_bound);

namespace detail {
/// Throws unless Wbar is a finite symmetric PSD n x n matrix.
void validate_wbar(const Mat& Wbar, Index n);
/// beta * I_n as an expression.
convex::AffineExpr scaled_identity(const convex::AffineExpr& scalar, Index n);
/// T D D^T - Psi with D = [Hxd; -Hx; -Hu], Psi = [[Wbar + beta I, P, L^T], [P, 0, 0], [L, 0, 0]].
convex::AffineExpr robust_lmi(const convex::Model& model, const HankelTriple& h, Index j,
                              const Mat& Wbar, const convex::AffineExpr& P,
                              const convex::AffineExpr& L, const convex::AffineExpr& beta);
}  // namespace detail

}  // namespace dbctl
