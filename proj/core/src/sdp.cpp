#include "dbctl/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "dbctl/errors.hpp"
#include "dbctl/linalg.hpp"

namespace dbctl::convex {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One dense block of  C - sum_j w_j A_j >= 0.
struct Block {
  Mat C;
  std::vector<std::pair<Index, Mat>> A;  // only the nonzero A_j
};

struct IpmOutcome {
  SdpStatus status = SdpStatus::kNumericFailure;
  Vec w;
  double pobj = 0.0;  // <C, X>, upper bound for max b^T w
  double dobj = 0.0;  // b^T w
  int iterations = 0;
  std::string message;
  double accepted_tol = 0.0;  // residual level at which the iterate was accepted
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double inner(const Mat& a, const Mat& b) { return a.cwiseProduct(b).sum(); }

// Every A_lj of a block has the arrow shape diag(d) + e0 u^T + u e0^T (the
// epigraph blocks). Columns of D and U hold d and u (u(0) = 0) per term.
struct ArrowForm {
  Mat D;
  Mat U;
};

std::optional<ArrowForm> arrow_form(const Block& blk) {
  if (blk.A.empty()) return std::nullopt;
  const Index s = blk.C.rows();
  if (s < 8) return std::nullopt;
  ArrowForm f{Mat::Zero(s, static_cast<Index>(blk.A.size())),
              Mat::Zero(s, static_cast<Index>(blk.A.size()))};
  for (std::size_t q = 0; q < blk.A.size(); ++q) {
    const Mat& a = blk.A[q].second;
    const auto col = static_cast<Index>(q);
    for (Index c = 1; c < s; ++c) {
      for (Index r = 1; r < s; ++r) {
        if (r != c && a(r, c) != 0.0) return std::nullopt;
      }
    }
    f.D.col(col) = a.diagonal();
    f.U.col(col) = a.col(0);
    f.U(0, col) = 0.0;
  }
  return f;
}

// Block of the Schur matrix, tr(A_p X A_q Si) over the block's terms, in
// O(s^2 k + s k^2) for arrow-shaped terms.
Mat arrow_schur(const ArrowForm& f, const Mat& X, const Mat& Si) {
  const Vec x0 = X.col(0);
  const Vec s0 = Si.col(0);
  const Mat& D = f.D;
  const Mat& U = f.U;
  const Mat XU = X * U;
  const Mat SU = Si * U;
  const Mat Ux = U.transpose() * x0;
  const Mat Us = U.transpose() * s0;
  Mat m = D.transpose() * X.cwiseProduct(Si) * D;
  const Mat cross = D.transpose() * (x0.asDiagonal() * SU + s0.asDiagonal() * XU);
  m += cross + cross.transpose();
  m += Ux * Us.transpose() + Us * Ux.transpose();
  m += Si(0, 0) * (U.transpose() * XU) + X(0, 0) * (U.transpose() * SU);
  return m;
}

// Largest alpha with X + alpha * dX >= 0 (infinity if unbounded).
double max_step(const Mat& x, const Mat& dx) {
  Eigen::LLT<Mat> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const Mat y = llt.matrixL().solve(dx);
  const Mat t = llt.matrixL().solve(y.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(t), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

// Maximize b^T w subject to C_l - sum_j w_j A_lj >= 0 for every block.
IpmOutcome run_ipm(const std::vector<Block>& blocks, const Vec& b,
                   const SolverOptions& opt) {
  const Index k = b.size();
  const std::size_t nb = blocks.size();
  IpmOutcome out;

  Index n_total = 0;
  double norm_c = 0.0;
  for (const auto& blk : blocks) {
    n_total += blk.C.rows();
    norm_c += blk.C.squaredNorm();
  }
  norm_c = std::sqrt(norm_c);
  const double norm_b = b.norm();

  std::vector<Mat> X(nb), S(nb), Sinv(nb), Rd(nb);
  for (std::size_t l = 0; l < nb; ++l) {
    const Index s = blocks[l].C.rows();
    const double rs = std::sqrt(static_cast<double>(s));
    double xi = std::max(10.0, rs);
    double eta = std::max({10.0, rs, blocks[l].C.norm()});
    for (const auto& [j, a] : blocks[l].A) {
      const double an = a.norm();
      xi = std::max(xi, static_cast<double>(s) * (1.0 + std::abs(b(j))) / (1.0 + an));
      eta = std::max(eta, an);
    }
    X[l] = opt.start_scale * xi * Mat::Identity(s, s);
    S[l] = opt.start_scale * eta * Mat::Identity(s, s);
  }
  Vec w = Vec::Zero(k);
  std::vector<std::optional<ArrowForm>> arrows;
  arrows.reserve(nb);
  for (const auto& blk : blocks) arrows.push_back(arrow_form(blk));

  auto apply_a = [&](const std::vector<Mat>& mats) {
    Vec v = Vec::Zero(k);
    for (std::size_t l = 0; l < nb; ++l) {
      for (const auto& [j, a] : blocks[l].A) v(j) += inner(a, mats[l]);
    }
    return v;
  };

  // Best iterate seen so far, by the worst of the three residuals. Near the
  // optimum the primal certificate can degrade; the dual iterate w is what the
  // caller uses.
  struct Best {
    double merit = kInf;
    double relp = kInf, reld = kInf, gap = kInf;
    Vec w;
    double pobj = 0.0, dobj = 0.0;
    int iteration = 0;
  } best;
  const double reduced_tol = 1e4 * std::max(opt.feas_tol, opt.gap_tol);
  auto finish_with_best = [&](const std::string& why) {
    out.w = best.w;
    out.pobj = best.pobj;
    out.dobj = best.dobj;
    if (best.relp < reduced_tol && best.reld < reduced_tol && best.gap < reduced_tol) {
      out.status = SdpStatus::kOptimal;
      out.accepted_tol = reduced_tol;
      out.message = "converged to reduced accuracy (relp=" + sci(best.relp) +
                    ", reld=" + sci(best.reld) +
                    ", gap=" + sci(best.gap) + ")";
    } else {
      out.status = SdpStatus::kNumericFailure;
      out.message = why + " (relp=" + sci(best.relp) +
                    ", reld=" + sci(best.reld) +
                    ", gap=" + sci(best.gap) + ")";
    }
    return out;
  };

  int stalled = 0;
  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    out.iterations = iter;
    for (std::size_t l = 0; l < nb; ++l) {
      Eigen::LLT<Mat> llt(S[l]);
      if (llt.info() != Eigen::Success) {
        if (best.w.size() == 0) {
          out.message = "dual slack lost positive definiteness";
          out.w = w;
          return out;
        }
        return finish_with_best("dual slack lost positive definiteness");
      }
      Sinv[l] = llt.solve(Mat::Identity(S[l].rows(), S[l].cols()));
    }

    const Vec ax = apply_a(X);
    const Vec rp = b - ax;
    double rd_norm2 = 0.0;
    double pobj = 0.0;
    double xs = 0.0;
    double c_minus_rd2 = 0.0;
    for (std::size_t l = 0; l < nb; ++l) {
      Rd[l] = blocks[l].C - S[l];
      for (const auto& [j, a] : blocks[l].A) Rd[l] -= w(j) * a;
      rd_norm2 += Rd[l].squaredNorm();
      c_minus_rd2 += (blocks[l].C - Rd[l]).squaredNorm();
      pobj += inner(blocks[l].C, X[l]);
      xs += inner(X[l], S[l]);
    }
    const double dobj = b.dot(w);
    const double mu = xs / static_cast<double>(n_total);
    const double relp = rp.norm() / (1.0 + norm_b);
    const double reld = std::sqrt(rd_norm2) / (1.0 + norm_c);
    const double relgap =
        std::max(xs, std::abs(pobj - dobj)) / (1.0 + std::abs(pobj) + std::abs(dobj));
    out.w = w;
    out.pobj = pobj;
    out.dobj = dobj;

    const double merit = std::max({relp, reld, relgap});
    if (merit < best.merit) {
      best = Best{merit, relp, reld, relgap, w, pobj, dobj, iter};
    } else if (iter - best.iteration >= 10 && best.merit < reduced_tol) {
      return finish_with_best("no further progress");
    }

    if (relp < opt.feas_tol && reld < opt.feas_tol && relgap < opt.gap_tol) {
      out.status = SdpStatus::kOptimal;
      out.message = "converged";
      return out;
    }

    double x_norm = 0.0;
    for (const auto& x : X) x_norm = std::max(x_norm, x.norm());
    if (pobj < 0.0 && x_norm > 1e6 && ax.norm() < 1e-8 * (-pobj)) {
      out.status = SdpStatus::kInfeasible;
      out.message = "infeasibility certificate found (LMI system has no solution)";
      return out;
    }
    if (dobj > 0.0 && w.norm() > 1e6 && std::sqrt(c_minus_rd2) < 1e-8 * dobj) {
      out.status = SdpStatus::kNumericFailure;
      out.message = "objective is unbounded";
      return out;
    }
    if (!std::isfinite(pobj) || !std::isfinite(dobj) || w.norm() > 1e15 || x_norm > 1e15) {
      out.message = "iterates diverged";
      return out;
    }
    if (iter == opt.max_iterations) return finish_with_best("iteration limit reached");

    // Schur complement M_ij = sum_l tr(A_li X_l A_lj S_l^{-1}).
    Mat M = Mat::Zero(k, k);
    for (std::size_t l = 0; l < nb; ++l) {
      const auto& terms = blocks[l].A;
      if (arrows[l]) {
        const Mat mb = arrow_schur(*arrows[l], X[l], Sinv[l]);
        for (std::size_t q = 0; q < terms.size(); ++q) {
          for (std::size_t p = 0; p < terms.size(); ++p) {
            M(terms[p].first, terms[q].first) +=
                mb(static_cast<Index>(p), static_cast<Index>(q));
          }
        }
        continue;
      }
      for (std::size_t q = 0; q < terms.size(); ++q) {
        const Mat G = (X[l] * terms[q].second * Sinv[l]).transpose();
        for (std::size_t p = 0; p <= q; ++p) {
          const double v = inner(terms[p].second, G);
          const Index i = terms[p].first;
          const Index j = terms[q].first;
          M(i, j) += v;
          if (i != j) M(j, i) += v;
        }
      }
    }
    M = linalg::symmetrize(M);
    Eigen::LLT<Mat> chol(M);
    std::optional<Eigen::LDLT<Mat>> ldlt;
    if (chol.info() != Eigen::Success) {
      const double reg = 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
      ldlt.emplace(M + reg * Mat::Identity(k, k));
    }
    auto solve_schur = [&](const Vec& rhs) -> Vec {
      return ldlt ? Vec(ldlt->solve(rhs)) : Vec(chol.solve(rhs));
    };

    std::vector<Mat> XRdSinv(nb);
    for (std::size_t l = 0; l < nb; ++l) XRdSinv[l] = X[l] * Rd[l] * Sinv[l];
    const Vec a_xrds = apply_a(XRdSinv);

    auto direction = [&](const std::vector<Mat>& H, std::vector<Mat>& dX,
                         std::vector<Mat>& dS, Vec& dw) {
      const Vec rhs = rp - apply_a(H) + a_xrds;
      dw = solve_schur(rhs);
      dX.resize(nb);
      dS.resize(nb);
      for (std::size_t l = 0; l < nb; ++l) {
        dS[l] = Rd[l];
        for (const auto& [j, a] : blocks[l].A) dS[l] -= dw(j) * a;
        dS[l] = linalg::symmetrize(dS[l]);
        dX[l] = linalg::symmetrize(H[l] - X[l] * dS[l] * Sinv[l]);
      }
    };
    auto steps = [&](const std::vector<Mat>& dX, const std::vector<Mat>& dS) {
      double ap = kInf, ad = kInf;
      for (std::size_t l = 0; l < nb; ++l) {
        ap = std::min(ap, max_step(X[l], dX[l]));
        ad = std::min(ad, max_step(S[l], dS[l]));
      }
      return std::pair{ap, ad};
    };

    // Predictor.
    std::vector<Mat> H(nb), dXa, dSa;
    Vec dwa;
    for (std::size_t l = 0; l < nb; ++l) H[l] = -X[l];
    direction(H, dXa, dSa, dwa);
    auto [apa, ada] = steps(dXa, dSa);
    apa = std::min(1.0, apa);
    ada = std::min(1.0, ada);
    double mu_aff = 0.0;
    for (std::size_t l = 0; l < nb; ++l) {
      mu_aff += inner(X[l] + apa * dXa[l], S[l] + ada * dSa[l]);
    }
    mu_aff /= static_cast<double>(n_total);
    const double ratio = std::clamp(mu_aff / mu, 0.0, 1.0);
    const double sigma = std::pow(ratio, 3.0);

    // Corrector.
    std::vector<Mat> dX, dS;
    Vec dw;
    for (std::size_t l = 0; l < nb; ++l) {
      H[l] = sigma * mu * Sinv[l] - X[l] - dXa[l] * dSa[l] * Sinv[l];
    }
    direction(H, dX, dS, dw);
    auto [ap, ad] = steps(dX, dS);
    const double gamma = 0.9 + 0.09 * std::min(apa, ada);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);

    for (std::size_t l = 0; l < nb; ++l) {
      X[l] = linalg::symmetrize(X[l] + ap * dX[l]);
      S[l] = linalg::symmetrize(S[l] + ad * dS[l]);
    }
    w += ad * dw;

    stalled = (std::max(ap, ad) < 1e-9) ? stalled + 1 : 0;
    if (stalled >= 3) return finish_with_best("step length stalled");
  }
  return out;
}

// Rows of E x = f built from equality expressions, each row normalized.
void stack_equalities(const std::vector<SdpProblem::Equality>& eqs, Index k, Mat& E,
                      Vec& f) {
  Index rows = 0;
  for (const auto& e : eqs) rows += e.expr.rows() * e.expr.cols();
  E = Mat::Zero(rows, k);
  f = Vec::Zero(rows);
  Index r = 0;
  for (const auto& e : eqs) {
    AffineExpr ex = e.expr;
    ex.resize_vars(k);
    const Index cnt = ex.rows() * ex.cols();
    E.middleRows(r, cnt) = ex.coefficients();
    f.segment(r, cnt) = -ex.offset();
    r += cnt;
  }
  for (Index i = 0; i < rows; ++i) {
    const double rn = E.row(i).norm();
    if (rn > 0.0) {
      E.row(i) /= rn;
      f(i) /= rn;
    }
  }
}

}  // namespace

SolverOptions SolverOptions::from_environment() {
  SolverOptions opt;
  if (const char* env = std::getenv("DBCTL_SOLVER_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0 && v < 1.0) {
      opt.feas_tol = v;
      opt.gap_tol = v;
    }
  }
  return opt;
}

std::string_view to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::kOptimal:
      return "optimal";
    case SdpStatus::kInfeasible:
      return "infeasible";
    case SdpStatus::kNumericFailure:
      return "numeric-failure";
  }
  return "unknown";
}

void SdpProblem::add_psd(const AffineExpr& expr, std::string label) {
  cones_.push_back({expr, false, std::move(label)});
}

void SdpProblem::add_positive_definite(const AffineExpr& expr, std::string label) {
  cones_.push_back({expr, true, std::move(label)});
}

void SdpProblem::add_equality(const AffineExpr& expr, std::string label) {
  equalities_.push_back({expr, std::move(label)});
}

void SdpProblem::maximize(const AffineExpr& scalar) {
  if (scalar.rows() != 1 || scalar.cols() != 1) {
    throw DimensionError("maximize expects a scalar expression");
  }
  objective_kind_ = ObjectiveKind::kMaximize;
  objective_ = scalar;
}

void SdpProblem::minimize(const AffineExpr& scalar) {
  if (scalar.rows() != 1 || scalar.cols() != 1) {
    throw DimensionError("minimize expects a scalar expression");
  }
  objective_kind_ = ObjectiveKind::kMinimize;
  objective_ = scalar;
}

void SdpProblem::minimize_norm(const AffineExpr& expr) {
  objective_kind_ = ObjectiveKind::kMinimizeNorm;
  objective_ = expr.vectorized();
}

void SdpProblem::validate() const {
  if (num_vars() == 0) throw ValidationError("SDP has no decision variables");
  for (const auto& c : cones_) {
    if (c.expr.rows() != c.expr.cols() || c.expr.rows() == 0) {
      throw DimensionError("LMI '" + c.label + "' is not square");
    }
    if (c.expr.num_vars() > num_vars()) {
      throw DimensionError("LMI '" + c.label + "' references undeclared variables");
    }
    double scale = 1.0 + c.expr.offset().cwiseAbs().maxCoeff();
    if (c.expr.num_vars() > 0) scale += c.expr.coefficients().cwiseAbs().maxCoeff();
    if (c.expr.max_asymmetry() > 1e-10 * scale) {
      throw ValidationError("LMI '" + c.label + "' is not symmetric");
    }
    if (!c.expr.offset().allFinite() || !c.expr.coefficients().allFinite()) {
      throw ValidationError("LMI '" + c.label + "' has non-finite data");
    }
  }
  for (const auto& e : equalities_) {
    if (e.expr.num_vars() > num_vars()) {
      throw DimensionError("equality '" + e.label + "' references undeclared variables");
    }
  }
  if (objective_kind_ != ObjectiveKind::kNone && objective_.num_vars() > num_vars()) {
    throw DimensionError("objective references undeclared variables");
  }
}

SdpSolution solve_sdp(const SdpProblem& problem, const SolverOptions& opt) {
  problem.validate();
  if (!(opt.start_scale > 0.0) || !(opt.feas_tol > 0.0) || !(opt.gap_tol > 0.0)) {
    throw ValidationError("solver tolerances and start scale must be positive");
  }
  const Index k = problem.num_vars();
  SdpSolution sol;

  // 1. Eliminate equalities: x = x0 + Z z.
  Vec x0 = Vec::Zero(k);
  Mat Z = Mat::Identity(k, k);
  if (!problem.equalities().empty()) {
    Mat E;
    Vec f;
    stack_equalities(problem.equalities(), k, E, f);
    x0 = linalg::lstsq(E, f, 1e-11);
    const double res = (E * x0 - f).norm();
    if (res > 1e-8 * (1.0 + f.norm())) {
      sol.status = SdpStatus::kInfeasible;
      sol.x = x0;
      sol.message = "equality constraints are inconsistent (residual " +
                    sci(res) + ")";
      return sol;
    }
    Z = linalg::null_space_basis(E, 1e-11);
  }
  const Index k1 = Z.cols();

  // 2. Cones in the reduced unknowns z; the norm objective becomes an epigraph
  //    cone on an extra unknown t (index k1).
  struct ReducedCone {
    Mat F0;
    Mat F;  // (s*s) x kz, column-major vec of each coefficient matrix
    Index size;
  };
  std::vector<ReducedCone> cones;
  for (const auto& c : problem.cones()) {
    AffineExpr e = c.expr;
    e.resize_vars(k);
    const Index s = e.rows();
    Vec off = e.offset() + e.coefficients() * x0;
    Mat F0 = Eigen::Map<const Mat>(off.data(), s, s);
    if (c.strict) F0 -= opt.strict_margin * Mat::Identity(s, s);
    cones.push_back({linalg::symmetrize(F0), e.coefficients() * Z, s});
  }

  const auto kind = problem.objective_kind();
  Vec c_obj = Vec::Zero(k1);  // maximize c_obj^T z + c_const
  double c_const = 0.0;
  Index kz = k1;
  if (kind == SdpProblem::ObjectiveKind::kMaximize ||
      kind == SdpProblem::ObjectiveKind::kMinimize) {
    AffineExpr o = problem.objective();
    o.resize_vars(k);
    const double sgn = kind == SdpProblem::ObjectiveKind::kMaximize ? 1.0 : -1.0;
    c_obj = sgn * (Z.transpose() * o.coefficients().row(0).transpose());
    c_const = sgn * (o.offset()(0) + o.coefficients().row(0).dot(x0));
  } else if (kind == SdpProblem::ObjectiveKind::kMinimizeNorm) {
    AffineExpr o = problem.objective();
    o.resize_vars(k);
    const Mat G = o.coefficients() * Z;
    const Vec g = o.offset() + o.coefficients() * x0;
    // ||G z + g||^2 = ||Sigma V^T z + U^T g||^2 + ||g_perp||^2
    Mat red;   // r x k1
    Vec h;     // r
    if (G.rows() > 0 && G.cols() > 0) {
      Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      Index r = 0;
      while (r < sv.size() && sv(r) > 1e-13 * sv(0)) ++r;
      red = sv.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
      h = svd.matrixU().leftCols(r).transpose() * g;
    } else {
      red = Mat(0, k1);
      h = Vec(0);
    }
    const Index r = red.rows();
    const double rho = std::sqrt(std::max(0.0, g.squaredNorm() - h.squaredNorm()));
    // Epigraph cone [[t, w^T], [w, t I]] with w = [red z + h; rho], size r + 2.
    kz = k1 + 1;
    const Index s = r + 2;
    ReducedCone epi{Mat::Zero(s, s), Mat::Zero(s * s, kz), s};
    auto put = [&](Index i, Index j, Index var, double v) {
      epi.F(i + j * s, var) += v;
      if (i != j) epi.F(j + i * s, var) += v;
    };
    for (Index i = 0; i < s; ++i) put(i, i, k1, 1.0);
    for (Index i = 0; i < r; ++i) {
      epi.F0(i + 1, 0) = h(i);
      epi.F0(0, i + 1) = h(i);
      for (Index j = 0; j < k1; ++j) {
        if (red(i, j) != 0.0) put(i + 1, 0, j, red(i, j));
      }
    }
    epi.F0(s - 1, 0) = rho;
    epi.F0(0, s - 1) = rho;
    for (auto& cone : cones) {
      cone.F.conservativeResize(Eigen::NoChange, kz);
      cone.F.col(k1).setZero();
    }
    cones.push_back(std::move(epi));
    c_obj = Vec::Zero(kz);
    c_obj(k1) = -1.0;
  }

  // 3. Restrict to directions that some cone actually sees.
  Index total_rows = 0;
  for (const auto& c : cones) total_rows += c.F.rows();
  Mat stacked(total_rows, kz);
  {
    Index r = 0;
    for (const auto& c : cones) {
      const double n = c.F.norm();
      stacked.middleRows(r, c.F.rows()) = n > 0.0 ? Mat(c.F / n) : c.F;
      r += c.F.rows();
    }
  }
  Mat Vr;
  if (total_rows > 0 && kz > 0) {
    Vr = linalg::range_basis(stacked.transpose(), 1e-12);
  } else {
    Vr = Mat(kz, 0);
  }
  if (c_obj.size() > 0) {
    const Vec c_perp = c_obj - Vr * (Vr.transpose() * c_obj);
    if (c_perp.norm() > 1e-9 * std::max(1.0, c_obj.norm())) {
      sol.status = SdpStatus::kNumericFailure;
      sol.x = x0;
      sol.message = "objective is unbounded (a direction is unconstrained by every LMI)";
      return sol;
    }
  }
  const Index kw = Vr.cols();

  // Maps internal unknowns back to the user layout.
  Vec col_scale = Vec::Ones(kw);
  auto to_user = [&](const Vec& w_int) {
    const Vec zt = Vr * col_scale.cwiseProduct(w_int);
    return Vec(x0 + Z * zt.head(k1));
  };
  auto evaluate_user = [&](const Vec& x) {
    double violation = 0.0;
    for (const auto& c : problem.cones()) {
      Mat v = c.expr.evaluate(x);
      const Index s = v.rows();
      if (c.strict) v -= opt.strict_margin * Mat::Identity(s, s);
      Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(v), Eigen::EigenvaluesOnly);
      violation = std::max(violation, -es.eigenvalues()(0) / (1.0 + v.norm()));
    }
    for (const auto& e : problem.equalities()) {
      const Mat v = e.expr.evaluate(x);
      const double scale = 1.0 + e.expr.offset().norm() +
                           (e.expr.num_vars() > 0 ? e.expr.coefficients().norm() : 0.0) *
                               (1.0 + x.norm());
      violation = std::max(violation, v.norm() / scale);
    }
    return violation;
  };
  auto user_objective = [&](const Vec& x) -> double {
    switch (kind) {
      case SdpProblem::ObjectiveKind::kMaximize:
      case SdpProblem::ObjectiveKind::kMinimize:
        return problem.objective().evaluate(x)(0, 0);
      case SdpProblem::ObjectiveKind::kMinimizeNorm:
        return problem.objective().evaluate(x).norm();
      case SdpProblem::ObjectiveKind::kNone:
        return 0.0;
    }
    return 0.0;
  };

  if (kw == 0) {
    // Nothing left to choose: the equalities pin the point.
    sol.x = to_user(Vec::Zero(0));
    sol.primal_violation = evaluate_user(sol.x);
    sol.objective = user_objective(sol.x);
    sol.dual_bound = sol.objective;
    sol.status = sol.primal_violation <= opt.feas_tol ? SdpStatus::kOptimal
                                                      : SdpStatus::kInfeasible;
    sol.message = "solution fixed by equality constraints";
    return sol;
  }

  // 4. Build scaled blocks:  C - sum_j w_j A_j >= 0  with C = F0, A_j = -F_j Vr.
  std::vector<Block> blocks;
  blocks.reserve(cones.size());
  for (const auto& c : cones) {
    const Mat Fw = c.F * Vr;
    double amax = 0.0;
    for (Index j = 0; j < kw; ++j) amax = std::max(amax, Fw.col(j).norm());
    const double bs = amax > 0.0 ? 1.0 / amax : 1.0;
    Block blk;
    blk.C = bs * c.F0;
    for (Index j = 0; j < kw; ++j) {
      if (Fw.col(j).norm() <= 1e-14 * amax) continue;
      Mat a = Eigen::Map<const Mat>(Fw.col(j).data(), c.size, c.size);
      blk.A.emplace_back(j, linalg::symmetrize(-bs * a));
    }
    blocks.push_back(std::move(blk));
  }
  for (Index j = 0; j < kw; ++j) {
    double n2 = 0.0;
    for (const auto& blk : blocks) {
      for (const auto& [jj, a] : blk.A) {
        if (jj == j) n2 += a.squaredNorm();
      }
    }
    col_scale(j) = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 1.0;
  }
  for (auto& blk : blocks) {
    for (auto& [j, a] : blk.A) a *= col_scale(j);
  }
  Vec b = col_scale.cwiseProduct(Vr.transpose() * c_obj);
  const double b_scale = b.norm() > 0.0 ? b.norm() : 1.0;
  b /= b_scale;

  const IpmOutcome ipm = run_ipm(blocks, b, opt);
  sol.iterations = ipm.iterations;
  sol.message = ipm.message;
  sol.x = to_user(ipm.w);
  sol.objective = user_objective(sol.x);
  sol.primal_violation = evaluate_user(sol.x);
  // pobj bounds the internal maximization; map it back to the user's sense.
  const double internal_bound = b_scale * ipm.pobj + c_const;
  sol.dual_bound = kind == SdpProblem::ObjectiveKind::kMaximize ? internal_bound
                                                                 : -internal_bound;
  sol.gap = b_scale * std::abs(ipm.pobj - ipm.dobj);
  sol.status = ipm.status;
  // The user-level measure differs from the internal relative residual, so
  // only a clear excess over the accepted level signals a mapping failure.
  const double accepted = std::max(opt.feas_tol, ipm.accepted_tol);
  if (sol.status == SdpStatus::kOptimal && sol.primal_violation > 100.0 * accepted) {
    sol.status = SdpStatus::kNumericFailure;
    sol.message = "converged in scaled form but primal violation " +
                  sci(sol.primal_violation) + " exceeds tolerance";
  }
  return sol;
}

}  // namespace dbctl::convex
