#include "dbctl/affine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dbctl/errors.hpp"

namespace dbctl::convex {
namespace {

std::string shape(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void match_vars(AffineExpr& a, AffineExpr& b) {
  const Index k = std::max(a.num_vars(), b.num_vars());
  a.resize_vars(k);
  b.resize_vars(k);
}

}  // namespace

Mat value_of(const Var& var, const Vec& x) {
  if (var.offset + var.size() > x.size()) {
    throw DimensionError("solution vector too short for variable '" + var.name + "'");
  }
  Mat out(var.rows, var.cols);
  if (var.kind == VarKind::kSymmetric) {
    Index idx = var.offset;
    for (Index j = 0; j < var.cols; ++j) {
      for (Index i = 0; i <= j; ++i) {
        out(i, j) = x(idx);
        out(j, i) = x(idx);
        ++idx;
      }
    }
  } else {
    out = Eigen::Map<const Mat>(x.data() + var.offset, var.rows, var.cols);
  }
  return out;
}

AffineExpr::AffineExpr(Index rows, Index cols, Index num_vars)
    : rows_(rows),
      cols_(cols),
      coefficients_(Mat::Zero(rows * cols, num_vars)),
      offset_(Vec::Zero(rows * cols)) {}

AffineExpr AffineExpr::constant(const Mat& value, Index num_vars) {
  AffineExpr e(value.rows(), value.cols(), num_vars);
  e.offset_ = Eigen::Map<const Vec>(value.data(), value.size());
  return e;
}

AffineExpr AffineExpr::zero(Index rows, Index cols, Index num_vars) {
  return AffineExpr(rows, cols, num_vars);
}

Mat AffineExpr::evaluate(const Vec& x) const {
  Vec v = offset_;
  if (num_vars() > 0) {
    if (x.size() < num_vars()) {
      throw DimensionError("evaluate: expected at least " + std::to_string(num_vars()) +
                           " unknowns, got " + std::to_string(x.size()));
    }
    v += coefficients_ * x.head(num_vars());
  }
  return Eigen::Map<const Mat>(v.data(), rows_, cols_);
}

Mat AffineExpr::constant_part() const {
  return Eigen::Map<const Mat>(offset_.data(), rows_, cols_);
}

Mat AffineExpr::coefficient_matrix(Index var) const {
  if (var >= num_vars()) return Mat::Zero(rows_, cols_);
  return Eigen::Map<const Mat>(coefficients_.col(var).data(), rows_, cols_);
}

void AffineExpr::resize_vars(Index num_vars) {
  const Index old = coefficients_.cols();
  if (num_vars <= old) return;
  coefficients_.conservativeResize(Eigen::NoChange, num_vars);
  coefficients_.rightCols(num_vars - old).setZero();
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr t(cols_, rows_, num_vars());
  for (Index j = 0; j < cols_; ++j) {
    for (Index i = 0; i < rows_; ++i) {
      const Index from = i + j * rows_;
      const Index to = j + i * cols_;
      t.offset_(to) = offset_(from);
      t.coefficients_.row(to) = coefficients_.row(from);
    }
  }
  return t;
}

AffineExpr AffineExpr::block(Index row, Index col, Index rows, Index cols) const {
  if (row < 0 || col < 0 || row + rows > rows_ || col + cols > cols_) {
    throw DimensionError("block out of range for " + shape(rows_, cols_) + " expression");
  }
  AffineExpr b(rows, cols, num_vars());
  for (Index j = 0; j < cols; ++j) {
    const Index from = row + (col + j) * rows_;
    b.offset_.segment(j * rows, rows) = offset_.segment(from, rows);
    b.coefficients_.middleRows(j * rows, rows) = coefficients_.middleRows(from, rows);
  }
  return b;
}

AffineExpr AffineExpr::vectorized() const {
  AffineExpr v = *this;
  v.rows_ = rows_ * cols_;
  v.cols_ = 1;
  return v;
}

double AffineExpr::max_asymmetry() const {
  if (rows_ != cols_) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (Index j = 0; j < cols_; ++j) {
    for (Index i = 0; i < j; ++i) {
      const Index a = i + j * rows_;
      const Index b = j + i * rows_;
      worst = std::max(worst, std::abs(offset_(a) - offset_(b)));
      if (num_vars() > 0) {
        worst = std::max(worst,
                         (coefficients_.row(a) - coefficients_.row(b)).cwiseAbs().maxCoeff());
      }
    }
  }
  return worst;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError("cannot add " + shape(rows_, cols_) + " and " +
                         shape(other.rows_, other.cols_) + " expressions");
  }
  AffineExpr rhs = other;
  match_vars(*this, rhs);
  coefficients_ += rhs.coefficients_;
  offset_ += rhs.offset_;
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) {
  return *this += -1.0 * other;
}

AffineExpr& AffineExpr::operator*=(double s) {
  coefficients_ *= s;
  offset_ *= s;
  return *this;
}

AffineExpr operator+(AffineExpr a, const Mat& c) {
  return a += AffineExpr::constant(c, a.num_vars());
}

AffineExpr operator-(AffineExpr a, const Mat& c) {
  return a -= AffineExpr::constant(c, a.num_vars());
}

AffineExpr operator*(const Mat& left, const AffineExpr& e) {
  if (left.cols() != e.rows_) {
    throw DimensionError("cannot multiply " + shape(left.rows(), left.cols()) + " by " +
                         shape(e.rows_, e.cols_) + " expression");
  }
  const Index p = left.rows();
  const Index r = e.rows_;
  AffineExpr out(p, e.cols_, e.num_vars());
  for (Index j = 0; j < e.cols_; ++j) {
    out.offset_.segment(j * p, p) = left * e.offset_.segment(j * r, r);
    if (e.num_vars() > 0) {
      out.coefficients_.middleRows(j * p, p) = left * e.coefficients_.middleRows(j * r, r);
    }
  }
  return out;
}

AffineExpr operator*(const AffineExpr& e, const Mat& right) {
  if (e.cols_ != right.rows()) {
    throw DimensionError("cannot multiply " + shape(e.rows_, e.cols_) +
                         " expression by " + shape(right.rows(), right.cols()));
  }
  const Index r = e.rows_;
  AffineExpr out(r, right.cols(), e.num_vars());
  for (Index l = 0; l < right.cols(); ++l) {
    for (Index j = 0; j < e.cols_; ++j) {
      const double w = right(j, l);
      if (w == 0.0) continue;
      out.offset_.segment(l * r, r) += w * e.offset_.segment(j * r, r);
      if (e.num_vars() > 0) {
        out.coefficients_.middleRows(l * r, r) += w * e.coefficients_.middleRows(j * r, r);
      }
    }
  }
  return out;
}

AffineExpr AffineExpr::blocks(const std::vector<std::vector<AffineExpr>>& grid) {
  if (grid.empty() || grid.front().empty()) return {};
  const std::size_t br = grid.size();
  const std::size_t bc = grid.front().size();
  std::vector<Index> heights(br), widths(bc);
  Index k = 0;
  for (std::size_t i = 0; i < br; ++i) {
    if (grid[i].size() != bc) throw DimensionError("ragged block grid");
    for (std::size_t j = 0; j < bc; ++j) {
      const AffineExpr& b = grid[i][j];
      if (j == 0) heights[i] = b.rows();
      if (i == 0) widths[j] = b.cols();
      if (b.rows() != heights[i] || b.cols() != widths[j]) {
        throw DimensionError("block (" + std::to_string(i) + "," + std::to_string(j) +
                             ") has shape " + shape(b.rows(), b.cols()) +
                             ", inconsistent with its block row/column");
      }
      k = std::max(k, b.num_vars());
    }
  }
  Index total_rows = 0, total_cols = 0;
  for (Index h : heights) total_rows += h;
  for (Index w : widths) total_cols += w;
  AffineExpr out(total_rows, total_cols, k);
  Index row0 = 0;
  for (std::size_t i = 0; i < br; ++i) {
    Index col0 = 0;
    for (std::size_t j = 0; j < bc; ++j) {
      const AffineExpr& b = grid[i][j];
      for (Index c = 0; c < b.cols(); ++c) {
        const Index to = row0 + (col0 + c) * total_rows;
        const Index from = c * b.rows();
        out.offset_.segment(to, b.rows()) = b.offset_.segment(from, b.rows());
        if (b.num_vars() > 0) {
          out.coefficients_.block(to, 0, b.rows(), b.num_vars()) =
              b.coefficients_.middleRows(from, b.rows());
        }
      }
      col0 += widths[j];
    }
    row0 += heights[i];
  }
  return out;
}

AffineExpr AffineExpr::hstack(const std::vector<AffineExpr>& parts) {
  return blocks({parts});
}

AffineExpr AffineExpr::vstack(const std::vector<AffineExpr>& parts) {
  std::vector<std::vector<AffineExpr>> grid;
  grid.reserve(parts.size());
  for (const auto& p : parts) grid.push_back({p});
  return blocks(grid);
}

AffineExpr trace(const AffineExpr& e) {
  if (e.rows() != e.cols()) throw DimensionError("trace of a non-square expression");
  AffineExpr t(1, 1, e.num_vars());
  for (Index i = 0; i < e.rows(); ++i) {
    const Index idx = i + i * e.rows();
    t.offset()(0) += e.offset()(idx);
    if (e.num_vars() > 0) t.coefficients().row(0) += e.coefficients().row(idx);
  }
  return t;
}

AffineExpr plus_transpose(const AffineExpr& e) { return e + e.transpose(); }

Var Model::add(Var var) {
  for (const auto& existing : vars_) {
    if (existing.name == var.name) {
      throw ValidationError("variable '" + var.name + "' declared twice");
    }
  }
  if (var.rows <= 0 || var.cols <= 0) {
    throw DimensionError("variable '" + var.name + "' has empty shape");
  }
  var.offset = num_vars_;
  num_vars_ += var.size();
  vars_.push_back(var);
  return var;
}

Var Model::add_scalar(const std::string& name) {
  return add(Var{name, VarKind::kScalar, 1, 1, 0});
}

Var Model::add_symmetric(const std::string& name, Index n) {
  return add(Var{name, VarKind::kSymmetric, n, n, 0});
}

Var Model::add_matrix(const std::string& name, Index rows, Index cols) {
  return add(Var{name, VarKind::kGeneral, rows, cols, 0});
}

AffineExpr Model::expr(const Var& var) const {
  AffineExpr e(var.rows, var.cols, num_vars_);
  if (var.kind == VarKind::kSymmetric) {
    Index idx = var.offset;
    for (Index j = 0; j < var.cols; ++j) {
      for (Index i = 0; i <= j; ++i) {
        e.coefficients()(i + j * var.rows, idx) = 1.0;
        e.coefficients()(j + i * var.rows, idx) = 1.0;
        ++idx;
      }
    }
  } else {
    for (Index k = 0; k < var.size(); ++k) e.coefficients()(k, var.offset + k) = 1.0;
  }
  return e;
}

AffineExpr Model::constant(const Mat& value) const {
  return AffineExpr::constant(value, num_vars_);
}

}  // namespace dbctl::convex
