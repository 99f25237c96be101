#include "dbctl/invopt.hpp"

#include "dbctl/errors.hpp"

namespace dbctl {

using convex::AffineExpr;

void ReferenceBundle::validate() const {
  if (Xi.size() == 0) throw ValidationError("reference bundle is empty");
  if (Xid.rows() != n() || Xid.cols() != samples()) {
    throw DimensionError("Xid must match the shape of Xi");
  }
  if (U.cols() != samples() || U.rows() == 0) {
    throw DimensionError("U must have one column per sample");
  }
  if (trajectories < 1 || samples() % trajectories != 0) {
    throw ValidationError("sample count must be a multiple of the trajectory count");
  }
  linalg::require_finite(Xi, "Xi");
  linalg::require_finite(Xid, "Xid");
  linalg::require_finite(U, "U");
}

Index ReferenceBundle::rank(double tol) const { return linalg::rank(Xi, tol); }

ReferenceBundle collect_closedloop(const LtiSystem& sys, const Mat& K, const Mat& X0,
                                   const ClosedLoopSampling& s) {
  sys.validate();
  const Index n = sys.n();
  if (K.rows() != sys.m() || K.cols() != n) throw DimensionError("K has the wrong shape");
  if (X0.rows() != n || X0.cols() == 0) {
    throw DimensionError("initial conditions must be n x M with M >= 1");
  }
  linalg::require_finite(K, "K");
  linalg::require_finite(X0, "X0");
  if (!(s.spacing > 0.0) || s.max_samples < 1 || s.extra_samples < 0) {
    throw ValidationError("invalid closed-loop sampling parameters");
  }
  const Mat Acl = sys.A - sys.B * K;
  if (!linalg::is_hurwitz(Acl)) throw ValidationError("K is not stabilizing");

  const Index M = X0.cols();
  const Mat step = linalg::expm(Acl * s.spacing);
  std::vector<Mat> states{X0};
  Index full_at = -1;
  Mat stacked = X0;
  while (true) {
    const auto q = static_cast<Index>(states.size());
    if (full_at < 0 && linalg::rank(stacked, s.rank_tol) == n) full_at = q;
    if (full_at >= 0 && q >= full_at + s.extra_samples) break;
    if (q >= s.max_samples) {
      throw RankError("closed-loop samples reach rank " +
                      std::to_string(linalg::rank(stacked, s.rank_tol)) + " of " +
                      std::to_string(n) + " after " + std::to_string(q) +
                      " samples per trajectory");
    }
    states.push_back(step * states.back());
    stacked.conservativeResize(Eigen::NoChange, stacked.cols() + M);
    stacked.rightCols(M) = states.back();
  }

  ReferenceBundle b;
  b.trajectories = M;
  b.Xi = stacked;
  b.Xid = Acl * stacked;
  b.U = -K * stacked;
  return b;
}

InverseOcResult solve_inverse_oc(const HankelTriple& h, Index j, const ReferenceBundle& bundle,
                                 const InverseOcOptions& opt) {
  require_pe(h, j);
  bundle.validate();
  const Index n = h.n();
  const Index m = h.m();
  if (bundle.n() != n || bundle.m() != m) {
    throw DimensionError("bundle dimensions do not match the data");
  }
  if (bundle.rank() < n) {
    throw InfeasibleError("stacked closed-loop samples have rank " +
                          std::to_string(bundle.rank()) + " < " + std::to_string(n) +
                          "; the program needs Xi with full row rank");
  }
  const auto jj = static_cast<std::size_t>(j);
  const Mat& hx = h.Hx[jj];
  const Mat ha = compute_HA(h, j);
  const Mat hd = h.Hxd[jj] - ha;  // B Hu

  // Congruences onto row spaces keep every constraint square and n x n.
  const Mat V = linalg::range_basis(Mat(bundle.Xi.transpose()));
  const Mat xr = bundle.Xi * V;
  const Mat ur = bundle.U * V;
  const Mat xdr = bundle.Xid * V;
  const Mat Vh = linalg::range_basis(Mat(hx.transpose()));
  const Mat xh = hx * Vh;
  const Mat ah = ha * Vh;
  Mat left_span(h.N, m + n);
  left_span << h.Hu.transpose(), hd.transpose();
  const Mat W = linalg::range_basis(left_span);
  Mat right_span(n + m, bundle.samples());
  right_span << bundle.Xi, bundle.U;
  const Mat Vo = linalg::range_basis(Mat(right_span.transpose()));

  convex::SdpProblem p;
  const auto qv = p.add_symmetric("Q", n);
  const auto rv = p.add_symmetric("R", m);
  const auto pv = p.add_symmetric("P", n);
  const auto p1v = p.add_symmetric("P1", n);
  const AffineExpr Q = p.expr(qv);
  const AffineExpr R = p.expr(rv);
  const AffineExpr P = p.expr(pv);
  const AffineExpr P1 = p.expr(p1v);

  p.add_psd(Q, "Q >= 0");
  p.add_psd(P, "P >= 0");
  p.add_positive_definite(R, "R > 0");
  p.add_positive_definite(P1, "P1 > 0");
  const AffineExpr cross = xr.transpose() * P * xdr;
  p.add_equality(xr.transpose() * Q * xr + ur.transpose() * R * ur + cross + cross.transpose(),
                 "data Lyapunov equation");
  const AffineExpr pa = xh.transpose() * P1 * ah;
  p.add_positive_definite(xh.transpose() * Q * xh - pa - pa.transpose(), "detectability");
  if (opt.gauge == RGauge::kTrace) {
    p.add_equality(convex::trace(R) - Mat::Constant(1, 1, static_cast<double>(m)), "tr R = m");
  } else {
    p.add_psd(R - Mat::Identity(m, m), "R >= I");
  }
  p.add_psd(-1.0 * convex::trace(P1) + Mat::Constant(1, 1, static_cast<double>(n)), "tr P1 <= n");
  const AffineExpr gap = h.Hu.transpose() * R * bundle.U + hd.transpose() * P * bundle.Xi;
  p.minimize_norm(W.transpose() * gap * Vo);

  const auto sol = convex::solve_sdp(p, opt.solver);
  if (sol.status == convex::SdpStatus::kInfeasible) {
    throw InfeasibleError("inverse optimal control program is infeasible: " + sol.message);
  }
  if (!sol.optimal()) throw NumericError("inverse optimal control failed: " + sol.message);

  InverseOcResult r;
  r.Q = linalg::symmetrize(sol.value(qv));
  // Remove solver round-off below zero so that Q is a valid LQR weight.
  Eigen::SelfAdjointEigenSolver<Mat> es(r.Q);
  r.Q = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
        es.eigenvectors().transpose();
  r.R = linalg::symmetrize(sol.value(rv));
  r.P = linalg::symmetrize(sol.value(pv));
  r.P1 = linalg::symmetrize(sol.value(p1v));
  r.residual = (h.Hu.transpose() * r.R * bundle.U + hd.transpose() * r.P * bundle.Xi).norm();
  const Mat lyap = bundle.Xi.transpose() * r.Q * bundle.Xi +
                   bundle.U.transpose() * r.R * bundle.U +
                   bundle.Xi.transpose() * r.P * bundle.Xid +
                   bundle.Xid.transpose() * r.P * bundle.Xi;
  const double scale = bundle.Xi.squaredNorm() * (r.Q.norm() + r.P.norm()) +
                       bundle.U.squaredNorm() * r.R.norm() + 1e-300;
  r.lyapunov_residual = lyap.norm() / scale;
  r.solver_message = sol.message;
  return r;
}

RoundTrip round_trip(const HankelTriple& h, Index j, const InverseOcResult& result, const Mat& K,
                     const LqrOptions& options) {
  RoundTrip rt;
  rt.lqr = solve_lqr_data(h, j, WeightPair{result.Q, result.R}, options);
  if (rt.lqr.K.rows() != K.rows() || rt.lqr.K.cols() != K.cols()) {
    throw DimensionError("K has the wrong shape");
  }
  rt.deviation = (rt.lqr.K - K).norm();
  return rt;
}

}  // namespace dbctl
