#include "dbctl/lqr.hpp"

#include "dbctl/errors.hpp"

namespace dbctl {

using convex::AffineExpr;

namespace {

void require_symmetric(const Mat& m, const std::string& name) {
  if ((m - m.transpose()).norm() > 1e-10 * (1.0 + m.norm())) {
    throw ValidationError(name + " must be symmetric");
  }
}

double min_eig(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

void WeightPair::validate(Index n, Index m) const {
  if (Q.rows() != n || Q.cols() != n) {
    throw DimensionError("Q must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (R.rows() != m || R.cols() != m) {
    throw DimensionError("R must be " + std::to_string(m) + "x" + std::to_string(m));
  }
  linalg::require_finite(Q, "Q");
  linalg::require_finite(R, "R");
  require_symmetric(Q, "Q");
  require_symmetric(R, "R");
  if (min_eig(Q) < -1e-12 * (1.0 + Q.norm())) {
    throw ValidationError("Q must be positive semidefinite");
  }
  if (min_eig(R) <= 0.0) throw ValidationError("R must be positive definite");
}

Mat lqr_data_matrix(const HankelTriple& h, Index j, const WeightPair& w, const Mat& P) {
  h.require_index(j);
  const Mat& hx = h.Hx[static_cast<std::size_t>(j)];
  const Mat& hxd = h.Hxd[static_cast<std::size_t>(j)];
  const Mat cross = hx.transpose() * P * hxd;
  return hx.transpose() * w.Q * hx + h.Hu.transpose() * w.R * h.Hu + cross +
         cross.transpose();
}

LqrResult solve_lqr_data(const HankelTriple& h, Index j, const WeightPair& w,
                         const LqrOptions& opt) {
  require_pe(h, j);
  const Index n = h.n();
  const Index m = h.m();
  w.validate(n, m);
  const Mat& hx = h.Hx[static_cast<std::size_t>(j)];
  const Mat& hxd = h.Hxd[static_cast<std::size_t>(j)];

  Mat S = Mat::Identity(n, n);
  if (opt.S) {
    if (opt.S->rows() != n || opt.S->cols() != n) throw DimensionError("S must be n x n");
    if (linalg::rank(*opt.S) < n) throw ValidationError("S must be nonsingular");
    S = *opt.S;
  }

  // L(P) = D^T Phi(P) D with D = [Hx; Hu; Hxd]; restrict to the row space of D.
  Mat D(2 * n + m, h.N);
  D << hx, h.Hu, hxd;
  const Mat U = linalg::range_basis(Mat(D.transpose()), 1e-10);
  const Mat DU = D * U;
  const Mat dx = DU.topRows(n);
  const Mat du = DU.middleRows(n, m);
  const Mat dxd = DU.bottomRows(n);

  convex::SdpProblem p;
  const auto Pv = p.add_symmetric("P", n);
  const AffineExpr P = p.expr(Pv);
  const AffineExpr cross = dx.transpose() * P * dxd;
  const Mat fixed = dx.transpose() * w.Q * dx + du.transpose() * w.R * du;
  p.add_psd(P, "P >= 0");
  p.add_psd(cross + cross.transpose() + linalg::symmetrize(fixed), "L(P) >= 0");
  p.maximize(convex::trace(P));
  const auto sol = convex::solve_sdp(p, opt.solver);
  if (sol.status == convex::SdpStatus::kInfeasible) {
    throw InfeasibleError("LQR program is infeasible: " + sol.message);
  }
  if (!sol.optimal()) throw NumericError("LQR program failed: " + sol.message);

  LqrResult r;
  r.Pstar = linalg::symmetrize(sol.value(Pv));
  r.objective = r.Pstar.trace();
  r.solver_message = sol.message;

  const Mat L = lqr_data_matrix(h, j, w, r.Pstar);
  Mat lhs(n + h.N, h.N);
  lhs << hx, L;
  Mat rhs = Mat::Zero(n + h.N, n);
  rhs.topRows(n) = S;
  r.Gamma = linalg::lstsq(lhs, rhs, 1e-12);
  r.gamma_residual = (lhs * r.Gamma - rhs).norm() / (1.0 + lhs.norm() * r.Gamma.norm());
  if (r.gamma_residual > opt.gamma_tol) {
    throw NumericError("linear system for Gamma has relative residual " +
                       std::to_string(r.gamma_residual) + " (tolerance " +
                       std::to_string(opt.gamma_tol) + ")");
  }
  const Mat hxg = hx * r.Gamma;
  r.K = -h.Hu * r.Gamma * hxg.inverse();
  return r;
}

LqrVerification verify_lqr(const LtiSystem& sys, const LqrResult& result, const WeightPair& w,
                           double tolerance) {
  sys.validate();
  w.validate(sys.n(), sys.m());
  const Mat& P = result.Pstar;
  const Mat rinv_bt_p = w.R.ldlt().solve(sys.B.transpose() * P);
  LqrVerification v;
  v.tolerance = tolerance;
  v.are_residual =
      (w.Q + P * sys.A + sys.A.transpose() * P - P * sys.B * rinv_bt_p).norm();
  v.gain_residual = (result.K - rinv_bt_p).norm();
  v.pass = v.are_residual <= tolerance && v.gain_residual <= tolerance * (1.0 + result.K.norm());
  return v;
}

}  // namespace dbctl
