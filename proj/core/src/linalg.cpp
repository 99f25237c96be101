#include "dbctl/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <string>

#include "dbctl/errors.hpp"

namespace dbctl::linalg {
namespace {

template <typename Derived>
Eigen::Index rank_from_singular_values(const Eigen::MatrixBase<Derived>& sv,
                                       double tol) {
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double threshold = tol * sv(0);
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > threshold) ++r;
  return r;
}

}  // namespace

void require_finite(const Mat& m, std::string_view name) {
  if (!m.allFinite()) {
    throw ValidationError("matrix '" + std::string(name) +
                          "' contains non-finite entries");
  }
}

void require_square(const Mat& m, std::string_view name) {
  if (m.rows() != m.cols()) {
    throw DimensionError("matrix '" + std::string(name) + "' must be square, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

EigDecomp eig(const Mat& m) {
  require_square(m, "eig input");
  require_finite(m, "eig input");
  if (m.rows() == 0) return {};
  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    throw NumericError("eigenvalue iteration did not converge for a " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       " matrix");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

CVec eigenvalues(const Mat& m) {
  require_square(m, "eig input");
  require_finite(m, "eig input");
  if (m.rows() == 0) return {};
  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericError("eigenvalue iteration did not converge");
  }
  return solver.eigenvalues();
}

Eigen::Index rank(const Mat& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  return rank_from_singular_values(svd.singularValues(), tol);
}

Eigen::Index rank(const CMat& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<CMat> svd(m);
  return rank_from_singular_values(svd.singularValues(), tol);
}

Mat null_space_basis(const Mat& m, double tol) {
  const Eigen::Index cols = m.cols();
  if (m.rows() == 0) return Mat::Identity(cols, cols);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Eigen::Index r = rank_from_singular_values(svd.singularValues(), tol);
  return svd.matrixV().rightCols(cols - r);
}

CMat null_space_basis(const CMat& m, double tol) {
  const Eigen::Index cols = m.cols();
  if (m.rows() == 0) return CMat::Identity(cols, cols);
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeFullV);
  const Eigen::Index r = rank_from_singular_values(svd.singularValues(), tol);
  return svd.matrixV().rightCols(cols - r);
}

Mat range_basis(const Mat& m, double tol) {
  if (m.size() == 0) return Mat(m.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const Eigen::Index r = rank_from_singular_values(svd.singularValues(), tol);
  return svd.matrixU().leftCols(r);
}

double spectral_abscissa(const Mat& m) {
  const CVec values = eigenvalues(m);
  double abscissa = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    abscissa = std::max(abscissa, values(i).real());
  }
  return abscissa;
}

bool is_hurwitz(const Mat& m, double margin) {
  if (margin < 0.0) throw ValidationError("Hurwitz margin must be nonnegative");
  return spectral_abscissa(m) < -margin;
}

Mat expm(const Mat& m) {
  require_square(m, "expm input");
  require_finite(m, "expm input");
  if (m.rows() == 0) return m;
  Mat result = m.exp();
  if (!result.allFinite()) {
    throw NumericError("matrix exponential overflowed (input norm " +
                       std::to_string(m.norm()) + ")");
  }
  return result;
}

Mat lstsq(const Mat& a, const Mat& b, double tol) {
  if (a.rows() != b.rows()) {
    throw DimensionError("lstsq: row mismatch " + std::to_string(a.rows()) + " vs " +
                         std::to_string(b.rows()));
  }
  if (a.size() == 0) return Mat::Zero(a.cols(), b.cols());
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Eigen::Index r = rank_from_singular_values(sv, tol);
  if (r == 0) return Mat::Zero(a.cols(), b.cols());
  const Mat utb = svd.matrixU().leftCols(r).transpose() * b;
  return svd.matrixV().leftCols(r) *
         (sv.head(r).cwiseInverse().asDiagonal() * utb);
}

double min_singular_value(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  // Wide or tall: the number of singular values is min(rows, cols).
  return sv(sv.size() - 1);
}

Eigen::Index controllability_rank(const Mat& a, const Mat& b, double tol) {
  require_square(a, "A");
  if (b.rows() != a.rows()) throw DimensionError("controllability: B rows != A rows");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  Mat ctrb(n, n * m);
  Mat block = b;
  // Each block is rescaled; column scaling leaves the rank unchanged but keeps
  // A^k B from swamping B under the relative threshold.
  for (Eigen::Index k = 0; k < n; ++k) {
    const double scale = block.norm();
    if (scale > 0.0) block /= scale;
    ctrb.middleCols(k * m, m) = block;
    block = a * block;
  }
  return rank(ctrb, tol);
}

}  // namespace dbctl::linalg
