#pragma once

#include <string>
#include <vector>

#include "dbctl/affine.hpp"

namespace dbctl::convex {

/// Minimize the sum of squared Frobenius norms of affine residuals subject to
/// affine equalities.
class LeastSquaresProblem : public Model {
 public:
  void add_residual(const AffineExpr& expr, double weight = 1.0, std::string label = {});
  void add_equality(const AffineExpr& expr, std::string label = {});

  struct Term {
    AffineExpr expr;
    double weight = 1.0;
    std::string label;
  };

  const std::vector<Term>& residuals() const { return residuals_; }
  const std::vector<Term>& equalities() const { return equalities_; }

 private:
  std::vector<Term> residuals_;
  std::vector<Term> equalities_;
};

struct LeastSquaresSolution {
  Vec x;
  double cost = 0.0;               // sum of weighted squared residual norms
  double equality_residual = 0.0;  // relative
  double kkt_residual = 0.0;       // relative stationarity residual

  Mat value(const Var& var) const { return value_of(var, x); }
};

/// Solves the KKT conditions by null-space elimination of the equalities and
/// a rank-revealing solve of the reduced normal problem. Among minimizers the
/// returned point has minimal norm in the free directions.
/// Throws InfeasibleError for inconsistent equalities and ValidationError
/// when no residual term was added.
LeastSquaresSolution solve_eq_least_squares(const LeastSquaresProblem& problem);

}  // namespace dbctl::convex
