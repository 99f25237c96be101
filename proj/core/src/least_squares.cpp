#include "dbctl/least_squares.hpp"

#include <cmath>

#include "dbctl/errors.hpp"
#include "dbctl/linalg.hpp"

namespace dbctl::convex {
namespace {

void stack(const std::vector<LeastSquaresProblem::Term>& terms, Index k, bool weighted,
           Mat& a, Vec& r) {
  Index rows = 0;
  for (const auto& t : terms) rows += t.expr.rows() * t.expr.cols();
  a = Mat::Zero(rows, k);
  r = Vec::Zero(rows);
  Index at = 0;
  for (const auto& t : terms) {
    AffineExpr e = t.expr;
    e.resize_vars(k);
    const Index cnt = e.rows() * e.cols();
    const double w = weighted ? std::sqrt(t.weight) : 1.0;
    a.middleRows(at, cnt) = w * e.coefficients();
    r.segment(at, cnt) = w * e.offset();
    at += cnt;
  }
}

}  // namespace

void LeastSquaresProblem::add_residual(const AffineExpr& expr, double weight,
                                       std::string label) {
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw ValidationError("residual weight must be positive and finite");
  }
  residuals_.push_back({expr, weight, std::move(label)});
}

void LeastSquaresProblem::add_equality(const AffineExpr& expr, std::string label) {
  equalities_.push_back({expr, 1.0, std::move(label)});
}

LeastSquaresSolution solve_eq_least_squares(const LeastSquaresProblem& problem) {
  if (problem.residuals().empty()) {
    throw ValidationError("least-squares problem has no residual terms");
  }
  const Index k = problem.num_vars();
  for (const auto& t : problem.residuals()) {
    if (t.expr.num_vars() > k) throw DimensionError("residual references undeclared variables");
  }
  for (const auto& t : problem.equalities()) {
    if (t.expr.num_vars() > k) throw DimensionError("equality references undeclared variables");
  }

  Mat a;
  Vec r;
  stack(problem.residuals(), k, true, a, r);

  // Equalities E x = f, eliminated as x = xp + Z z.
  Vec xp = Vec::Zero(k);
  Mat Z = Mat::Identity(k, k);
  Mat E;
  Vec f;
  double eq_scale = 1.0;
  if (!problem.equalities().empty()) {
    Vec off;
    stack(problem.equalities(), k, false, E, off);
    f = -off;
    eq_scale = 1.0 + f.norm();
    Eigen::ColPivHouseholderQR<Mat> qr(E.transpose());
    qr.setThreshold(1e-12);
    const Index rank = qr.rank();
    const Mat q = qr.householderQ();
    Z = q.rightCols(k - rank);
    xp = linalg::lstsq(E, f, 1e-12);
    const double res = (E * xp - f).norm() / (1.0 + f.norm() + E.norm() * xp.norm());
    if (res > 1e-9) {
      throw InfeasibleError("equality constraints are inconsistent (relative residual " +
                            std::to_string(res) + ")");
    }
  }

  const Mat az = a * Z;
  const Vec rhs = -(a * xp + r);
  Vec z = Vec::Zero(Z.cols());
  if (az.size() > 0) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(az);
    cod.setThreshold(1e-12);
    z = cod.solve(rhs);
  }

  LeastSquaresSolution sol;
  sol.x = xp + Z * z;
  const Vec res = a * sol.x + r;
  sol.cost = res.squaredNorm();
  if (E.size() > 0) {
    sol.equality_residual = (E * sol.x - f).norm() / eq_scale;
  }
  const Vec grad = a.transpose() * res;
  const Vec reduced = Z.transpose() * grad;
  sol.kkt_residual = reduced.norm() / (1.0 + a.norm() * (a.norm() * sol.x.norm() + r.norm()));
  if (!sol.x.allFinite()) throw NumericError("least-squares solve produced non-finite values");
  return sol;
}

}  // namespace dbctl::convex
