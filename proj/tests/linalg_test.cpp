#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <random>

#include "dbctl/errors.hpp"
#include "dbctl/linalg.hpp"

namespace {

using dbctl::linalg::CVec;
using dbctl::linalg::Mat;
using dbctl::linalg::Vec;

Mat random_matrix(std::mt19937_64& rng, int r, int c) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

// Roots of a monic quadratic by the closed form.
std::vector<std::complex<double>> quadratic_roots(double b, double c) {
  const std::complex<double> disc = std::sqrt(std::complex<double>(b * b - 4.0 * c));
  return {(-b + disc) / 2.0, (-b - disc) / 2.0};
}

std::vector<std::complex<double>> sorted(const CVec& v) {
  std::vector<std::complex<double>> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

TEST(Eig, Diagonal) {
  Mat m = Vec(Eigen::Vector2d(-1, -2)).asDiagonal();
  auto v = sorted(dbctl::linalg::eig(m).values);
  EXPECT_NEAR(v[0].real(), -2.0, 1e-14);
  EXPECT_NEAR(v[1].real(), -1.0, 1e-14);
}

TEST(Eig, RotationGenerator) {
  Mat m(2, 2);
  m << 0, 1, -1, 0;
  auto v = sorted(dbctl::linalg::eigenvalues(m));
  EXPECT_NEAR(v[0].imag(), -1.0, 1e-14);
  EXPECT_NEAR(v[1].imag(), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(v[0].real()), 0.0, 1e-14);
}

TEST(Eig, CompanionMatchesQuadraticFormula) {
  Mat m(2, 2);
  m << 0, 1, -2, -3;
  auto v = sorted(dbctl::linalg::eigenvalues(m));
  auto r = quadratic_roots(3.0, 2.0);
  std::sort(r.begin(), r.end(), [](auto a, auto b) { return a.real() < b.real(); });
  EXPECT_NEAR(std::abs(v[0] - r[0]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(v[1] - r[1]), 0.0, 1e-12);
}

TEST(Eig, NonSquareRejected) {
  EXPECT_THROW(dbctl::linalg::eig(Mat::Zero(2, 3)), dbctl::DimensionError);
}

TEST(Eig, NonFiniteRejected) {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(dbctl::linalg::eig(m), dbctl::ValidationError);
}

TEST(Eig, RandomResidualAndConjugateClosure) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    const Mat m = random_matrix(rng, n, n);
    const auto d = dbctl::linalg::eig(m);
    for (int i = 0; i < n; ++i) {
      const auto v = d.vectors.col(i);
      const double res = (m.cast<std::complex<double>>() * v - d.values(i) * v).norm();
      ASSERT_LE(res, 1e-9 * m.norm() * v.norm());
      if (std::abs(d.values(i).imag()) > 0.0) {
        double best = 1e300;
        for (int k = 0; k < n; ++k) best = std::min(best, std::abs(d.values(k) - std::conj(d.values(i))));
        ASSERT_LE(best, 1e-9 * m.norm());
      }
    }
  }
}

TEST(NullSpace, Examples) {
  Mat a(1, 3);
  a << 1, 0, 0;
  Mat n = dbctl::linalg::null_space_basis(a);
  ASSERT_EQ(n.cols(), 2);
  EXPECT_NEAR(n.row(0).norm(), 0.0, 1e-15);
  EXPECT_EQ(dbctl::linalg::null_space_basis(Mat(Mat::Identity(3, 3))).cols(), 0);
  Mat b(1, 2);
  b << 1, 1;
  Mat nb = dbctl::linalg::null_space_basis(b);
  ASSERT_EQ(nb.cols(), 1);
  EXPECT_NEAR(std::abs(nb(0, 0)), 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(nb(0, 0) + nb(1, 0), 0.0, 1e-14);
}

TEST(NullSpace, RandomRankDeficient) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = 1 + static_cast<int>(rng() % 5);
    const int rows = r + static_cast<int>(rng() % 5);
    const int cols = r + static_cast<int>(rng() % 5);
    const Mat m = random_matrix(rng, rows, r) * random_matrix(rng, r, cols);
    const Mat n = dbctl::linalg::null_space_basis(m);
    ASSERT_EQ(n.cols(), cols - r);
    if (n.cols() == 0) continue;
    ASSERT_LE((m * n).norm(), 1e-9 * m.norm());
    ASSERT_LE((n.transpose() * n - Mat::Identity(n.cols(), n.cols())).norm(), 1e-12);
  }
}

TEST(Hurwitz, Examples) {
  EXPECT_TRUE(dbctl::linalg::is_hurwitz(Vec(Eigen::Vector2d(-1, -2)).asDiagonal().toDenseMatrix()));
  EXPECT_FALSE(dbctl::linalg::is_hurwitz(Vec(Eigen::Vector2d(-1, 0.5)).asDiagonal().toDenseMatrix()));
  EXPECT_FALSE(dbctl::linalg::is_hurwitz(Vec(Eigen::Vector2d(-1, -0.5)).asDiagonal().toDenseMatrix(), 0.6));
}

TEST(Expm, Examples) {
  EXPECT_TRUE(dbctl::linalg::expm(Mat::Zero(3, 3)).isApprox(Mat::Identity(3, 3), 1e-15));
  Mat d = Vec(Eigen::Vector3d(0.5, -1.0, 2.0)).asDiagonal();
  Mat e = dbctl::linalg::expm(d);
  EXPECT_NEAR(e(0, 0), std::exp(0.5), 1e-14);
  EXPECT_NEAR(e(1, 1), std::exp(-1.0), 1e-14);
  EXPECT_NEAR(e(2, 2), std::exp(2.0), 1e-13);
  Mat nil(2, 2);
  nil << 0, 1, 0, 0;
  Mat expected(2, 2);
  expected << 1, 1, 0, 1;
  EXPECT_LE((dbctl::linalg::expm(nil) - expected).norm(), 1e-15);
}

TEST(Expm, MatchesTaylorSeriesAndInverse) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    Mat m = random_matrix(rng, n, n);
    m *= 5.0 / std::max(1.0, m.norm());
    // Scaled Taylor series as an independent oracle.
    const int s = 8;
    const Mat ms = m / std::pow(2.0, s);
    Mat term = Mat::Identity(n, n), series = Mat::Identity(n, n);
    for (int k = 1; k < 30; ++k) {
      term = term * ms / k;
      series += term;
    }
    for (int k = 0; k < s; ++k) series = series * series;
    const Mat e = dbctl::linalg::expm(m);
    ASSERT_LE((e - series).norm(), 1e-10 * series.norm());
    ASSERT_LE((e * dbctl::linalg::expm(-m) - Mat::Identity(n, n)).norm(), 1e-8);
  }
}

TEST(Lstsq, Examples) {
  Mat b = Mat::Random(3, 2);
  EXPECT_LE((dbctl::linalg::lstsq(Mat::Identity(3, 3), b) - b).norm(), 1e-15);
  Mat a(2, 1), y(2, 1);
  a << 1, 1;
  y << 1, 3;
  // Normal equations: (a^T a) x = a^T y.
  const double normal = (a.transpose() * y)(0) / (a.transpose() * a)(0);
  EXPECT_NEAR(dbctl::linalg::lstsq(a, y)(0), normal, 1e-14);
  Mat r(1, 2), rb(1, 1);
  r << 1, 1;
  rb << 2;
  const Mat x = dbctl::linalg::lstsq(r, rb);
  EXPECT_NEAR(x(0), 1.0, 1e-14);
  EXPECT_NEAR(x(1), 1.0, 1e-14);
}

TEST(Lstsq, RandomMatchesPseudoinverse) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = 1 + static_cast<int>(rng() % 10);
    const int cols = 1 + static_cast<int>(rng() % 10);
    const Mat a = random_matrix(rng, rows, cols);
    const Mat b = random_matrix(rng, rows, 2);
    const Mat x = dbctl::linalg::lstsq(a, b);
    // Optimality: the residual is orthogonal to range(a); minimal norm: x in row space.
    ASSERT_LE((a.transpose() * (a * x - b)).norm(), 1e-9 * a.norm() * a.norm() * (1 + x.norm()));
    const Mat nul = dbctl::linalg::null_space_basis(a);
    if (nul.cols() > 0) ASSERT_LE((nul.transpose() * x).norm(), 1e-9 * (1 + x.norm()));
  }
}

TEST(Rank, ControllabilityOfChain) {
  Mat a(3, 3);
  a << 0, 1, 0, 0, 0, 1, 0, 0, 0;
  Mat b(3, 1);
  b << 0, 0, 1;
  EXPECT_EQ(dbctl::linalg::controllability_rank(a, b), 3);
  Mat b2(3, 1);
  b2 << 1, 0, 0;
  EXPECT_EQ(dbctl::linalg::controllability_rank(a, b2), 1);
}

}  // namespace
