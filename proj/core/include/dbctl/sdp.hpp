#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dbctl/affine.hpp"

namespace dbctl::convex {

/// Tolerances shared by every LMI program in the library.
struct SolverOptions {
  double feas_tol = 1e-10;       // relative primal/dual residual at termination
  double gap_tol = 1e-10;        // relative duality gap at termination
  double strict_margin = 1e-8;   // X > 0 is imposed as X - margin * I >= 0
  int max_iterations = 200;
  double start_scale = 1.0;      // multiplies the default initial primal/dual point

  /// Defaults, with feas_tol/gap_tol overridden by DBCTL_SOLVER_TOL if set.
  static SolverOptions from_environment();
};

enum class SdpStatus { kOptimal, kInfeasible, kNumericFailure };
std::string_view to_string(SdpStatus status);

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericFailure;
  Vec x;                       // all scalar unknowns, Model layout
  double objective = 0.0;      // user objective at x (max or min sense as posed)
  double dual_bound = 0.0;     // bound on the optimal objective from the dual iterate
  double gap = 0.0;            // |objective - dual_bound|
  double primal_violation = 0.0;
  int iterations = 0;
  std::string message;

  bool optimal() const { return status == SdpStatus::kOptimal; }
  Mat value(const Var& var) const { return value_of(var, x); }
  double scalar(const Var& var) const { return x(var.offset); }
};

/// Linear objective, affine LMI constraints, affine equalities. Norm
/// objectives are handled through a Schur-complement epigraph.
class SdpProblem : public Model {
 public:
  /// expr >= 0 (expr must be square and symmetric).
  void add_psd(const AffineExpr& expr, std::string label = {});
  /// expr > 0, realized as expr - strict_margin * I >= 0.
  void add_positive_definite(const AffineExpr& expr, std::string label = {});
  /// Every entry of expr equals zero.
  void add_equality(const AffineExpr& expr, std::string label = {});

  void maximize(const AffineExpr& scalar);
  void minimize(const AffineExpr& scalar);
  /// Minimize the Frobenius norm of expr.
  void minimize_norm(const AffineExpr& expr);

  /// Throws ValidationError/DimensionError on malformed problems.
  void validate() const;

  struct Cone {
    AffineExpr expr;
    bool strict = false;
    std::string label;
  };
  struct Equality {
    AffineExpr expr;
    std::string label;
  };
  enum class ObjectiveKind { kNone, kMaximize, kMinimize, kMinimizeNorm };

  const std::vector<Cone>& cones() const { return cones_; }
  const std::vector<Equality>& equalities() const { return equalities_; }
  ObjectiveKind objective_kind() const { return objective_kind_; }
  const AffineExpr& objective() const { return objective_; }

 private:
  std::vector<Cone> cones_;
  std::vector<Equality> equalities_;
  ObjectiveKind objective_kind_ = ObjectiveKind::kNone;
  AffineExpr objective_;
};

/// Primal-dual interior-point method (HKM direction, Mehrotra
/// predictor-corrector) on dense blocks. Deterministic.
SdpSolution solve_sdp(const SdpProblem& problem,
                      const SolverOptions& options = SolverOptions{});

}  // namespace dbctl::convex
