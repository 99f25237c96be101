#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace dbctl::linalg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Relative singular-value threshold used for every rank decision.
inline constexpr double kDefaultRankTol = 1e-9;

struct EigDecomp {
  CVec values;   // length = matrix order
  CMat vectors;  // right eigenvectors, column-aligned with values
};

/// Throws ValidationError if any entry is NaN or infinite.
void require_finite(const Mat& m, std::string_view name);
void require_square(const Mat& m, std::string_view name);

/// Eigenvalues and right eigenvectors of a real square matrix.
EigDecomp eig(const Mat& m);
CVec eigenvalues(const Mat& m);

/// Numerical rank with the relative threshold tol * sigma_max.
Eigen::Index rank(const Mat& m, double tol = kDefaultRankTol);
Eigen::Index rank(const CMat& m, double tol = kDefaultRankTol);

/// Orthonormal basis of the right null space. Columns = cols(m) - rank(m).
Mat null_space_basis(const Mat& m, double tol = kDefaultRankTol);
CMat null_space_basis(const CMat& m, double tol = kDefaultRankTol);

/// Orthonormal basis of the column space (left singular vectors kept by the
/// rank rule).
Mat range_basis(const Mat& m, double tol = kDefaultRankTol);

/// True iff every eigenvalue has real part < -margin.
bool is_hurwitz(const Mat& m, double margin = 0.0);

/// Largest real part over the spectrum.
double spectral_abscissa(const Mat& m);

Mat expm(const Mat& m);

/// Minimum-norm least-squares solution of a * x = b.
Mat lstsq(const Mat& a, const Mat& b, double tol = kDefaultRankTol);

/// Smallest singular value (0 for empty matrices).
double min_singular_value(const Mat& m);

/// Rank of the controllability matrix [B, AB, ..., A^{n-1}B].
Eigen::Index controllability_rank(const Mat& a, const Mat& b,
                                  double tol = kDefaultRankTol);

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace dbctl::linalg
