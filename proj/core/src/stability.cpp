#include "dbctl/stability.hpp"

#include "dbctl/errors.hpp"

namespace dbctl {

using convex::AffineExpr;
using convex::SdpProblem;
using convex::SdpSolution;

namespace {

void require_gain_shape(const HankelTriple& h, const Mat& K) {
  if (K.rows() != h.m() || K.cols() != h.n()) {
    throw DimensionError("gain must be " + std::to_string(h.m()) + "x" + std::to_string(h.n()) +
                         ", got " + std::to_string(K.rows()) + "x" + std::to_string(K.cols()));
  }
  linalg::require_finite(K, "K");
}

void raise_for(const SdpSolution& s, const std::string& what) {
  if (s.status == convex::SdpStatus::kInfeasible) {
    throw InfeasibleError(what + " is infeasible: " + s.message);
  }
  if (!s.optimal()) throw NumericError(what + " failed: " + s.message);
}

}  // namespace

Mat gamma_for_gain(const HankelTriple& h, Index j, const Mat& K) {
  require_pe(h, j);
  require_gain_shape(h, K);
  const Mat& hx = h.Hx[static_cast<std::size_t>(j)];
  const Mat Z = linalg::null_space_basis(Mat(h.Hu + K * hx));
  const Mat hz = hx * Z;
  if (linalg::rank(hz) < h.n()) {
    throw RankError("Hx restricted to the closed-loop null space is rank deficient");
  }
  const Mat gamma = Z * linalg::lstsq(hz, Mat::Identity(h.n(), h.n()));
  const double res = (hx * gamma - Mat::Identity(h.n(), h.n())).norm();
  if (res > 1e-8 * (1.0 + hx.norm() * gamma.norm())) {
    throw NumericError("Hx Gamma = I residual " + std::to_string(res));
  }
  return gamma;
}

Mat closed_loop_from_data(const HankelTriple& h, Index j, const Mat& K) {
  const Mat gamma = gamma_for_gain(h, j, K);
  const Mat hxg = h.Hx[static_cast<std::size_t>(j)] * gamma;
  return h.Hxd[static_cast<std::size_t>(j)] * gamma * hxg.inverse();
}

bool is_stabilizing(const HankelTriple& h, Index j, const Mat& K, double margin) {
  return linalg::is_hurwitz(closed_loop_from_data(h, j, K), margin);
}

GainResult stabilize_depersis(const HankelTriple& h, Index j, const DepersisOptions& opt) {
  require_pe(h, j);
  if (!(opt.decay >= 0.0)) throw ValidationError("decay rate must be nonnegative");
  const Index n = h.n();
  const Mat& hx = h.Hx[static_cast<std::size_t>(j)];
  const Mat& hxd = h.Hxd[static_cast<std::size_t>(j)];

  SdpProblem p;
  const auto Pv = p.add_symmetric("P", n);
  const auto Gv = p.add_matrix("Gamma", h.N, n);
  const AffineExpr P = p.expr(Pv);
  const AffineExpr G = p.expr(Gv);
  p.add_equality(hx * G - P, "Hx Gamma = P");
  p.add_psd(P - Mat::Identity(n, n), "P >= I");
  const AffineExpr hg = hxd * G;
  p.add_positive_definite(-1.0 * (hg + hg.transpose()) - 2.0 * opt.decay * P, "Lyapunov");
  p.minimize_norm(G);
  const SdpSolution s = convex::solve_sdp(p, opt.solver);
  raise_for(s, "stabilization LMI");

  GainResult r;
  r.method = "depersis";
  r.P = s.value(Pv);
  r.Gamma = s.value(Gv);
  const Mat hxg = hx * *r.Gamma;
  r.K = -h.Hu * *r.Gamma * hxg.inverse();
  r.closed_loop_estimate = hxd * *r.Gamma * hxg.inverse();
  r.objective = s.objective;
  r.solver_message = s.message;
  return r;
}

namespace detail {

AffineExpr scaled_identity(const AffineExpr& scalar, Index n) {
  AffineExpr out = AffineExpr::zero(n, n, scalar.num_vars());
  for (Index i = 0; i < n; ++i) {
    Mat e = Mat::Zero(n, 1);
    e(i) = 1.0;
    out += e * scalar * e.transpose();
  }
  return out;
}

void validate_wbar(const Mat& Wbar, Index n) {
  if (Wbar.rows() != n || Wbar.cols() != n) {
    throw DimensionError("noise bound must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  linalg::require_finite(Wbar, "Wbar");
  if ((Wbar - Wbar.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Wbar.norm())) {
    throw ValidationError("noise bound must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(Wbar), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + Wbar.norm())) {
    throw ValidationError("noise bound must be positive semidefinite");
  }
}

AffineExpr robust_lmi(const convex::Model& model, const HankelTriple& h, Index j,
                      const Mat& Wbar, const AffineExpr& P, const AffineExpr& L,
                      const AffineExpr& beta) {
  const Index n = h.n();
  const Index m = h.m();
  const std::size_t jj = static_cast<std::size_t>(j);
  Mat D(2 * n + m, h.N);
  D << h.Hxd[jj], -h.Hx[jj], -h.Hu;
  const Mat data = h.T * D * D.transpose();
  const Index k = model.num_vars();
  const AffineExpr zn = AffineExpr::zero(n, n, k);
  const AffineExpr znm = AffineExpr::zero(n, m, k);
  const AffineExpr zmn = AffineExpr::zero(m, n, k);
  const AffineExpr zmm = AffineExpr::zero(m, m, k);
  AffineExpr b11 = AffineExpr::constant(Wbar, k) + scaled_identity(beta, n);
  const AffineExpr psi = AffineExpr::blocks({{b11, P, L.transpose()},
                                             {P, zn, znm},
                                             {L, zmn, zmm}});
  return AffineExpr::constant(data, k) - psi;
}

}  // namespace detail

GainResult stabilize_noise_robust(const HankelTriple& h, Index j, const Mat& Wbar,
                                  const convex::SolverOptions& opt) {
  require_pe(h, j);
  const Index n = h.n();
  detail::validate_wbar(Wbar, n);

  SdpProblem p;
  const auto Pv = p.add_symmetric("P", n);
  const auto Lv = p.add_matrix("L", h.m(), n);
  const auto bv = p.add_scalar("beta");
  const AffineExpr P = p.expr(Pv);
  const AffineExpr L = p.expr(Lv);
  const AffineExpr beta = p.expr(bv);
  p.add_psd(detail::robust_lmi(p, h, j, Wbar, P, L, beta), "robust LMI");
  p.add_psd(P - detail::scaled_identity(beta, n), "P >= beta I");
  p.add_positive_definite(beta, "beta > 0");
  p.maximize(beta);
  const SdpSolution s = convex::solve_sdp(p, opt);
  raise_for(s, "noise-robust stabilization LMI");

  GainResult r;
  r.method = "noise-robust";
  r.P = s.value(Pv);
  r.L = s.value(Lv);
  r.beta = s.scalar(bv);
  r.K = -*r.L * r.P->inverse();
  r.closed_loop_estimate = closed_loop_from_data(h, j, r.K);
  r.objective = s.objective;
  r.solver_message = s.message;
  return r;
}

Mat default_wbar(const HankelTriple& h, double noise_bound) {
  if (noise_bound < 0.0) throw ValidationError("noise bound must be nonnegative");
  const double s = h.T * static_cast<double>(h.q()) * static_cast<double>(h.N) *
                   noise_bound * noise_bound;
  return s * Mat::Identity(h.n(), h.n());
}

}  // namespace dbctl
