#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace dbctl::convex {

using Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class VarKind { kScalar, kSymmetric, kGeneral };

/// A named block of scalar unknowns. Symmetric blocks store the upper
/// triangle (column-major) only.
struct Var {
  std::string name;
  VarKind kind = VarKind::kScalar;
  Index rows = 1;
  Index cols = 1;
  Index offset = 0;

  Index size() const {
    return kind == VarKind::kSymmetric ? rows * (rows + 1) / 2 : rows * cols;
  }
};

/// Extracts the matrix value of `var` from a full solution vector.
Mat value_of(const Var& var, const Vec& x);

/// Matrix-valued affine function of the unknowns,
///   vec(E(x)) = coefficients * x + offset   (column-major vec).
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(Index rows, Index cols, Index num_vars);

  static AffineExpr constant(const Mat& value, Index num_vars = 0);
  static AffineExpr zero(Index rows, Index cols, Index num_vars = 0);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index num_vars() const { return coefficients_.cols(); }

  const Mat& coefficients() const { return coefficients_; }
  const Vec& offset() const { return offset_; }
  Mat& coefficients() { return coefficients_; }
  Vec& offset() { return offset_; }

  Mat evaluate(const Vec& x) const;
  Mat constant_part() const;
  Mat coefficient_matrix(Index var) const;

  /// Pads the coefficient matrix with zero columns up to `num_vars`.
  void resize_vars(Index num_vars);

  AffineExpr transpose() const;
  AffineExpr block(Index row, Index col, Index rows, Index cols) const;
  /// Reshape to a (rows*cols) x 1 column.
  AffineExpr vectorized() const;
  /// Largest |E_ij - E_ji| over offset and coefficients.
  double max_asymmetry() const;

  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);
  AffineExpr& operator*=(double s);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
  friend AffineExpr operator+(AffineExpr a, const Mat& c);
  friend AffineExpr operator-(AffineExpr a, const Mat& c);
  friend AffineExpr operator*(const Mat& left, const AffineExpr& e);
  friend AffineExpr operator*(const AffineExpr& e, const Mat& right);

  static AffineExpr blocks(const std::vector<std::vector<AffineExpr>>& grid);
  static AffineExpr hstack(const std::vector<AffineExpr>& parts);
  static AffineExpr vstack(const std::vector<AffineExpr>& parts);

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Mat coefficients_;
  Vec offset_;
};

AffineExpr trace(const AffineExpr& e);
/// E + E^T.
AffineExpr plus_transpose(const AffineExpr& e);

/// Registry of decision variables shared by the SDP and least-squares
/// problem builders.
class Model {
 public:
  Var add_scalar(const std::string& name);
  Var add_symmetric(const std::string& name, Index n);
  Var add_matrix(const std::string& name, Index rows, Index cols);

  /// Expression whose value is the variable itself.
  AffineExpr expr(const Var& var) const;
  AffineExpr constant(const Mat& value) const;

  Index num_vars() const { return num_vars_; }
  const std::vector<Var>& variables() const { return vars_; }

 private:
  Var add(Var var);

  std::vector<Var> vars_;
  Index num_vars_ = 0;
};

}  // namespace dbctl::convex
