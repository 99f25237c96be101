#include "dbctl/trajref.hpp"

#include <algorithm>
#include <cmath>

#include "dbctl/errors.hpp"

namespace dbctl {

using convex::AffineExpr;

namespace {

Index grid_index_of(const HankelTriple& h, double t) {
  const double tol = 1e-9 * std::max(1.0, h.T);
  for (Index j = 0; j < h.q(); ++j) {
    if (std::abs(h.grid(j) - t) <= tol) return j;
  }
  throw ValidationError("reference time " + std::to_string(t) +
                        " is not a sample time of the data grid");
}

Mat derivative_estimate(const Vec& t, const std::vector<Mat>& x, std::size_t i) {
  const std::size_t last = x.size() - 1;
  if (i == 0) return (x[1] - x[0]) / (t(1) - t(0));
  if (i == last) {
    const auto k = static_cast<Index>(last);
    return (x[last] - x[last - 1]) / (t(k) - t(k - 1));
  }
  const auto k = static_cast<Index>(i);
  const double h0 = t(k) - t(k - 1);
  const double h1 = t(k + 1) - t(k);
  // Three-point formula, second order on nonuniform grids.
  return (-h1 / (h0 * (h0 + h1))) * x[i - 1] + ((h1 - h0) / (h0 * h1)) * x[i] +
         (h0 / (h1 * (h0 + h1))) * x[i + 1];
}

// Same unknowns as the least-squares model, plus one epigraph scalar per
// residual term: minimize sum t_k with ||r_k|| <= t_k as an arrow LMI.
Vec solve_norm_form(const convex::LeastSquaresProblem& ls, const convex::SolverOptions& opt) {
  convex::SdpProblem p;
  for (const auto& v : ls.variables()) {
    if (v.kind == convex::VarKind::kSymmetric) {
      p.add_symmetric(v.name, v.rows);
    } else {
      p.add_matrix(v.name, v.rows, v.cols);
    }
  }
  AffineExpr total = AffineExpr::zero(1, 1);
  std::vector<convex::Var> tvars;
  for (std::size_t k = 0; k < ls.residuals().size(); ++k) {
    tvars.push_back(p.add_scalar("t" + std::to_string(k)));
  }
  for (std::size_t k = 0; k < ls.residuals().size(); ++k) {
    AffineExpr r = ls.residuals()[k].expr.vectorized();
    r.resize_vars(p.num_vars());
    const AffineExpr t = p.expr(tvars[k]);
    p.add_psd(AffineExpr::blocks({{t, r.transpose()},
                                  {r, detail::scaled_identity(t, r.rows())}}),
              ls.residuals()[k].label);
    total += t;
  }
  for (const auto& eq : ls.equalities()) {
    AffineExpr e = eq.expr;
    e.resize_vars(p.num_vars());
    p.add_equality(e, eq.label);
  }
  p.minimize(total);
  const auto sol = convex::solve_sdp(p, opt);
  if (sol.status == convex::SdpStatus::kInfeasible) {
    throw InfeasibleError("trajectory fit is infeasible: " + sol.message);
  }
  if (!sol.optimal()) throw NumericError("trajectory fit failed: " + sol.message);
  return sol.x;
}

}  // namespace

void ReferenceSet::validate() const {
  const auto q = static_cast<std::size_t>(count());
  if (q == 0) throw ValidationError("reference set is empty");
  if (Xi.size() != q || Xid.size() != q) {
    throw DimensionError("reference set needs one Xi and one Xid matrix per sample time");
  }
  for (Index i = 1; i < count(); ++i) {
    if (!(times(i) > times(i - 1))) throw ValidationError("reference times must increase");
  }
  for (std::size_t i = 0; i < q; ++i) {
    if (Xi[i].rows() != n() || Xi[i].cols() != M() || Xid[i].rows() != n() ||
        Xid[i].cols() != M()) {
      throw DimensionError("reference sample " + std::to_string(i) + " has inconsistent shape");
    }
    linalg::require_finite(Xi[i], "Xi");
    linalg::require_finite(Xid[i], "Xid");
  }
  if (n() == 0 || M() == 0) throw ValidationError("reference matrices are empty");
}

ReferenceSet make_reference_set(const Vec& times, std::vector<Mat> Xi,
                                std::optional<std::vector<Mat>> Xid) {
  ReferenceSet r;
  r.times = times;
  r.Xi = std::move(Xi);
  if (Xid) {
    r.Xid = std::move(*Xid);
  } else {
    if (r.Xi.size() < 2) {
      throw ValidationError("derivatives can only be estimated from two or more samples");
    }
    if (static_cast<Index>(r.Xi.size()) != times.size()) {
      throw DimensionError("one Xi matrix per sample time is required");
    }
    for (Index i = 1; i < times.size(); ++i) {
      if (!(times(i) > times(i - 1))) throw ValidationError("reference times must increase");
    }
    for (std::size_t i = 0; i < r.Xi.size(); ++i) {
      r.Xid.push_back(derivative_estimate(times, r.Xi, i));
    }
    r.derivative_estimated = true;
  }
  r.validate();
  return r;
}

ReferenceSet references_from_generator(const Mat& F, const Mat& X0, const Vec& times) {
  linalg::require_square(F, "F");
  if (X0.rows() != F.rows()) throw DimensionError("X0 rows must match the generator");
  ReferenceSet r;
  r.times = times;
  for (Index i = 0; i < times.size(); ++i) {
    const Mat x = linalg::expm(F * times(i)) * X0;
    r.Xi.push_back(x);
    r.Xid.push_back(F * x);
  }
  r.validate();
  return r;
}

CandidateResult synthesize_candidate(const HankelTriple& h, const ReferenceSet& refs,
                                     const CandidateOptions& opt) {
  refs.validate();
  const Index n = h.n();
  const Index m = h.m();
  if (refs.n() != n) {
    throw DimensionError("references have " + std::to_string(refs.n()) +
                         " states, data has " + std::to_string(n));
  }
  const Index M = refs.M();
  if (!(opt.tracking_weight > 0.0) || !std::isfinite(opt.tracking_weight)) {
    throw ValidationError("tracking weight must be positive and finite");
  }
  CandidateResult out;
  for (Index i = 0; i < refs.count(); ++i) out.grid_index.push_back(grid_index_of(h, refs.times(i)));
  require_pe(h, out.grid_index.front());

  convex::LeastSquaresProblem p;
  const auto kv = p.add_matrix("Kbar", m, n);
  std::vector<convex::Var> cvars;
  std::vector<Mat> bases;
  for (Index i = 0; i < refs.count(); ++i) {
    const auto j = static_cast<std::size_t>(out.grid_index[static_cast<std::size_t>(i)]);
    Mat D(2 * n + m, h.N);
    D << h.Hx[j], h.Hxd[j], h.Hu;
    bases.push_back(linalg::range_basis(Mat(D.transpose()), 1e-12));
    cvars.push_back(p.add_matrix("C" + std::to_string(i), bases.back().cols(), M));
  }
  const AffineExpr K = p.expr(kv);
  for (Index i = 0; i < refs.count(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const auto j = static_cast<std::size_t>(out.grid_index[ii]);
    const AffineExpr G = bases[ii] * p.expr(cvars[ii]);
    const AffineExpr xg = h.Hx[j] * G - refs.Xi[ii];
    const AffineExpr dg = h.Hxd[j] * G - refs.Xid[ii];
    const AffineExpr ug = h.Hu * G + K * refs.Xi[ii];
    p.add_residual(dg, 1.0, "derivative " + std::to_string(i));
    if (i == 0) {
      p.add_equality(xg, "initial state");
      p.add_equality(ug, "initial input");
    } else {
      p.add_residual(opt.tracking_weight * xg, 1.0, "state " + std::to_string(i));
      p.add_residual(opt.tracking_weight * ug, 1.0, "input " + std::to_string(i));
    }
  }
  const Vec x = opt.cost_form == CostForm::kSquared ? convex::solve_eq_least_squares(p).x
                                                      : solve_norm_form(p, opt.solver);
  out.Kbar = value_of(kv, x);
  for (const auto& term : p.residuals()) {
    const double r = term.expr.evaluate(x).norm();
    out.cost += r * r;
    out.norm_cost += r;
  }
  for (std::size_t i = 0; i < cvars.size(); ++i) {
    out.Gamma.push_back(bases[i] * value_of(cvars[i], x));
  }
  return out;
}

namespace detail {

std::optional<double> max_certificate_scale(const HankelTriple& h, Index j, const Mat& Wbar,
                                            const std::optional<Mat>& Kbar,
                                            const convex::SolverOptions& opt) {
  const Index n = h.n();
  convex::SdpProblem p;
  const auto pv = p.add_symmetric("P", n);
  const auto bv = p.add_scalar("beta");
  const auto tv = p.add_scalar("tau");
  std::optional<convex::Var> lv;
  if (!Kbar) lv = p.add_matrix("L", h.m(), n);
  const AffineExpr P = p.expr(pv);
  const AffineExpr L = Kbar ? AffineExpr(-1.0 * (*Kbar * P)) : p.expr(*lv);
  const AffineExpr beta = p.expr(bv);
  p.add_psd(robust_lmi(p, h, j, Wbar, P, L, beta), "robust LMI");
  p.add_psd(P - scaled_identity(p.expr(tv), n), "P >= tau I");
  p.add_positive_definite(beta, "beta > 0");
  p.maximize(p.expr(tv));
  const auto sol = convex::solve_sdp(p, opt);
  if (sol.status == convex::SdpStatus::kInfeasible) return std::nullopt;
  if (!sol.optimal()) {
    throw NumericError("certificate scale program failed: " + sol.message);
  }
  const double tau = sol.scalar(tv);
  if (!(tau > 10.0 * opt.strict_margin)) return std::nullopt;
  return tau;
}

}  // namespace detail

GainResult project_stabilizing(const HankelTriple& h, Index j, const Mat& Kbar, const Mat& Wbar,
                               const ProjectionOptions& opt) {
  require_pe(h, j);
  const Index n = h.n();
  const Index m = h.m();
  if (Kbar.rows() != m || Kbar.cols() != n) {
    throw DimensionError("Kbar must be " + std::to_string(m) + "x" + std::to_string(n));
  }
  linalg::require_finite(Kbar, "Kbar");
  detail::validate_wbar(Wbar, n);
  if (!(opt.scale_fraction > 0.0 && opt.scale_fraction <= 1.0)) {
    throw ValidationError("scale_fraction must lie in (0, 1]");
  }

  auto tau = detail::max_certificate_scale(h, j, Wbar, Kbar, opt.solver);
  if (!tau) tau = detail::max_certificate_scale(h, j, Wbar, std::nullopt, opt.solver);
  if (!tau) {
    throw InfeasibleError("no gain is certified by the data for this disturbance bound");
  }
  const double floor = opt.scale_fraction * *tau;

  const auto jj = static_cast<std::size_t>(j);
  Mat D(2 * n + m, h.N);
  D << h.Hx[jj], h.Hu, h.Hxd[jj];
  const Mat V = linalg::range_basis(Mat(D.transpose()), 1e-12);
  const Mat hxv = h.Hx[jj] * V;
  const Mat huv = h.Hu * V;
  const Mat hxdv = h.Hxd[jj] * V;

  convex::SdpProblem p;
  const auto c1 = p.add_matrix("G1", V.cols(), n);
  const auto c2 = p.add_matrix("G2", V.cols(), n);
  const auto pv = p.add_symmetric("P", n);
  const auto lv = p.add_matrix("L", m, n);
  const auto bv = p.add_scalar("beta");
  const AffineExpr G1 = p.expr(c1);
  const AffineExpr G2 = p.expr(c2);
  const AffineExpr P = p.expr(pv);
  const AffineExpr L = p.expr(lv);
  p.add_psd(detail::robust_lmi(p, h, j, Wbar, P, L, p.expr(bv)), "robust LMI");
  p.add_psd(P - floor * Mat::Identity(n, n), "P >= tau I");
  p.add_positive_definite(p.expr(bv), "beta > 0");
  p.add_equality(hxv * G1 - P, "Hx G1 = P");
  p.add_equality(huv * G1 - L, "Hu G1 = L");
  p.add_equality(hxv * G2 - P, "Hx G2 = P");
  p.add_equality(huv * G2 + Kbar * P, "Hu G2 = -Kbar P");
  p.minimize_norm(hxdv * (G1 - G2));
  const auto sol = convex::solve_sdp(p, opt.solver);
  if (sol.status == convex::SdpStatus::kInfeasible) {
    throw InfeasibleError("projection program is infeasible: " + sol.message);
  }
  if (!sol.optimal()) throw NumericError("projection program failed: " + sol.message);

  GainResult r;
  r.method = "projection";
  r.P = linalg::symmetrize(sol.value(pv));
  r.L = sol.value(lv);
  r.beta = sol.scalar(bv);
  r.Gamma = V * sol.value(c1);
  r.K = -*r.L * r.P->inverse();
  r.closed_loop_estimate = closed_loop_from_data(h, j, r.K);
  r.objective = sol.objective;
  r.solver_message = sol.message;
  return r;
}

PipelineResult trajref_pipeline(const HankelTriple& h, const ReferenceSet& refs, const Mat& Wbar,
                                std::optional<Index> j, const ProjectionOptions& opt,
                                const CandidateOptions& candidate_options) {
  PipelineResult out;
  out.candidate = synthesize_candidate(h, refs, candidate_options);
  out.gain = project_stabilizing(h, j.value_or(h.default_index()), out.candidate.Kbar, Wbar, opt);
  return out;
}

}  // namespace dbctl
