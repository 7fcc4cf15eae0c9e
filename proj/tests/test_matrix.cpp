#include <gtest/gtest.h>

#include <cmath>

#include "lpcoreset/generators.hpp"
#include "lpcoreset/matrix.hpp"
#include "oracles.hpp"

using namespace lpcoreset;

namespace {

double max_offdiag_error(const Matrix& u) {
  const Matrix g = gram(u);
  double err = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) err = std::max(err, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return err;
}

}  // namespace

TEST(Matrix, RejectsNonFiniteAndBadShapes) {
  EXPECT_THROW(Matrix(1, 2, std::vector<double>{1.0, NAN}), InvalidArgument);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1.0}), ShapeMismatch);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), ShapeMismatch);
}

TEST(Matrix, ProductAndTranspose) {
  const Matrix a{{1, 2}, {3, 4}, {5, 6}};
  const Matrix g = a.transpose() * a;
  EXPECT_EQ(g, (Matrix{{35, 44}, {44, 56}}));
  EXPECT_EQ(gram(a), g);
  const auto y = a.apply(std::vector<double>{1.0, -1.0});
  EXPECT_EQ(y, (std::vector<double>{-1, -1, -1}));
}

TEST(OrthonormalBasis, Identity) {
  const OrthonormalBasis b = orthonormal_basis(Matrix::identity(3));
  EXPECT_EQ(b.rank, 3u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(std::abs(b.U(i, j)), i == j ? 1.0 : 0.0, 1e-15);
}

TEST(OrthonormalBasis, RankOneColumn) {
  const OrthonormalBasis b = orthonormal_basis(Matrix{{1, 2}, {2, 4}}, 1e-10);
  ASSERT_EQ(b.rank, 1u);
  const double s = b.U(0, 0) > 0 ? 1.0 : -1.0;
  EXPECT_NEAR(s * b.U(0, 0), 1.0 / std::sqrt(5.0), 1e-14);
  EXPECT_NEAR(s * b.U(1, 0), 2.0 / std::sqrt(5.0), 1e-14);
}

TEST(OrthonormalBasis, OrthogonalColumnsUpToSign) {
  const OrthonormalBasis b = orthonormal_basis(Matrix{{3, 0}, {0, 4}, {0, 0}});
  ASSERT_EQ(b.rank, 2u);
  // Pivoting puts the larger column first; the span is what matters.
  const Matrix p = b.U * b.U.transpose();
  EXPECT_NEAR(p(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p(1, 1), 1.0, 1e-15);
  EXPECT_NEAR(p(2, 2), 0.0, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-15);
}

TEST(OrthonormalBasis, AllZeroThrows) {
  EXPECT_THROW(orthonormal_basis(Matrix(3, 2, 0.0)), AllZeroMatrix);
  EXPECT_THROW(gram_pinv(Matrix(3, 2, 0.0)), AllZeroMatrix);
}

TEST(OrthonormalBasis, RandomGaussianProperties) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 10 + (seed * 37) % 491;
    const std::size_t d = 1 + seed % 10;
    const Matrix a = gaussian_matrix(n, d, seed);
    const OrthonormalBasis b = orthonormal_basis(a);
    ASSERT_EQ(b.rank, d);
    EXPECT_LT(max_offdiag_error(b.U), 1e-10) << "seed " << seed;
    // A lies in span(U): ‖A − UUᵀA‖ small relative to ‖A‖.
    const Matrix resid = a - b.U * (b.U.transpose() * a);
    EXPECT_LT(max_abs(resid.data()) / max_abs(a.data()), 1e-8);
    // to_source inverts the parameterization.
    std::vector<double> z(d);
    for (std::size_t j = 0; j < d; ++j) z[j] = std::sin(1.0 + static_cast<double>(j));
    const auto ax = a.apply(b.to_source(z));
    const auto uz = b.U.apply(z);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ax[i], uz[i], 1e-9);
  }
}

TEST(OrthonormalBasis, DetectsRankDeficiency) {
  Matrix a = gaussian_matrix(50, 3, 9);
  Matrix b(50, 4);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 3; ++j) b(i, j) = a(i, j);
    b(i, 3) = a(i, 0) - 2.0 * a(i, 2);
  }
  EXPECT_EQ(orthonormal_basis(b).rank, 3u);
}

TEST(GramPinv, Examples) {
  const Matrix i2 = gram_pinv(Matrix::identity(2));
  EXPECT_NEAR(i2(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(i2(0, 1), 0.0, 1e-14);
  const Matrix g = gram_pinv(Matrix{{1, 0}, {0, 1}, {1, 1}});
  EXPECT_NEAR(g(0, 0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(g(0, 1), -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(g(1, 1), 2.0 / 3.0, 1e-12);
  const Matrix h = gram_pinv(Matrix{{1}, {1}});
  EXPECT_NEAR(h(0, 0), 0.5, 1e-14);
}

TEST(GramPinv, InverseOnFullRank) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix a = gaussian_matrix(40, 5, seed + 100);
    const Matrix prod = gram(a) * gram_pinv(a);
    EXPECT_LT(max_abs((prod - Matrix::identity(5)).data()), 1e-8);
    const Matrix ref = oracle::inverse(oracle::ata(a));
    EXPECT_LT(max_abs((gram_pinv(a) - ref).data()), 1e-10);
  }
}

TEST(LpNorm, Examples) {
  EXPECT_DOUBLE_EQ(lp_norm(std::vector<double>{3, 4}, 2.0), 5.0);
  EXPECT_DOUBLE_EQ(lp_norm(std::vector<double>{1, 1, 1, 1}, 1.0), 4.0);
  EXPECT_NEAR(lp_norm(std::vector<double>{2, -1}, 3.0), std::cbrt(9.0), 1e-15);
  EXPECT_EQ(lp_norm(std::vector<double>{}, 3.0), 0.0);
  EXPECT_THROW(lp_norm(std::vector<double>{1.0}, 0.5), InvalidArgument);
}

TEST(LpNorm, ScaleInvarianceMonotonicityAndOverflowSafety) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng.below(20));
    for (double& x : v) x = rng.normal();
    const double p = 1.0 + 7.0 * rng.uniform();
    const double q = p + 3.0 * rng.uniform();
    const double c = -3.5;
    std::vector<double> cv(v);
    for (double& x : cv) x *= c;
    EXPECT_NEAR(lp_norm(cv, p), std::abs(c) * lp_norm(v, p), 1e-14 * lp_norm(cv, p));
    EXPECT_LE(lp_norm(v, q), lp_norm(v, p) * (1.0 + 1e-15));
  }
  EXPECT_NEAR(lp_norm(std::vector<double>{1e300, 1e300}, 4.0), 1e300 * std::pow(2.0, 0.25), 1e286);
}

TEST(SymmetricEigen, DiagonalizesRandomSymmetric) {
  const Matrix a = gaussian_matrix(30, 6, 17);
  const Matrix g = gram(a);
  const SymmetricEigen e = symmetric_eigen(g);
  for (std::size_t k = 1; k < e.values.size(); ++k) EXPECT_LE(e.values[k - 1], e.values[k]);
  // G v = λ v for every pair
  for (std::size_t k = 0; k < 6; ++k) {
    for (std::size_t i = 0; i < 6; ++i) {
      double gv = 0.0;
      for (std::size_t j = 0; j < 6; ++j) gv += g(i, j) * e.vectors(j, k);
      EXPECT_NEAR(gv, e.values[k] * e.vectors(i, k), 1e-9 * e.values.back());
    }
  }
}

TEST(SingularValues, MatchSpectralNorm) {
  const Matrix a = gaussian_matrix(80, 4, 3);
  const auto [smin, smax] = singular_value_range(a);
  EXPECT_GT(smin, 0.0);
  EXPECT_NEAR(spectral_norm(a), smax, 1e-5 * smax);
  const auto [imin, imax] = singular_value_range(Matrix::identity(3));
  EXPECT_NEAR(imin, 1.0, 1e-14);
  EXPECT_NEAR(imax, 1.0, 1e-14);
}

TEST(Csv, RoundTripIsExact) {
  const Matrix a = gaussian_matrix(25, 4, 44);
  EXPECT_EQ(parse_csv(to_csv(a)), a);
}

TEST(Csv, RejectsMalformedInput) {
  EXPECT_THROW(parse_csv("1,2\n3\n"), ParseError);
  EXPECT_THROW(parse_csv("1,abc\n"), ParseError);
  EXPECT_THROW(parse_csv("1,nan\n"), ParseError);
  EXPECT_THROW(parse_csv("1,inf\n"), ParseError);
  EXPECT_THROW(parse_csv(""), ParseError);
  EXPECT_THROW(parse_csv("1,,2\n"), ParseError);
  EXPECT_EQ(parse_csv("1,2\r\n3,4\r\n"), (Matrix{{1, 2}, {3, 4}}));
  EXPECT_THROW(read_csv("/nonexistent/file.csv"), IoError);
}
