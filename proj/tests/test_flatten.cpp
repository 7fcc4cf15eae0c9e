#include <gtest/gtest.h>

#include <cmath>

#include "lpcoreset/flatten.hpp"
#include "lpcoreset/generators.hpp"
#include "oracles.hpp"

using namespace lpcoreset;

namespace {

void expect_norms_preserved(const Matrix& a, const Matrix& f, double p, std::uint64_t seed) {
  Rng rng(seed);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(a.cols());
    for (double& v : x) v = rng.normal();
    const double na = oracle::lp_pow(oracle::mul(a, x), p);
    EXPECT_NEAR(oracle::lp_pow(oracle::mul(f, x), p), na, 1e-12 * na);
  }
}

}  // namespace

TEST(FlattenSensitivities, HandExample) {
  const Matrix a{{10}, {1}};
  const Flattened f = flatten_sensitivities(a, 1.0, 1.0);
  ASSERT_EQ(f.matrix.rows(), 3u);
  EXPECT_DOUBLE_EQ(f.matrix(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(f.matrix(1, 0), 5.0);
  EXPECT_DOUBLE_EQ(f.matrix(2, 0), 1.0);
  const ScoreVector s = lp_sensitivities(f.matrix, 1.0);
  EXPECT_NEAR(s.values[0], 5.0 / 11.0, 1e-8);
  EXPECT_NEAR(s.values[2], 1.0 / 11.0, 1e-8);
  EXPECT_EQ(f.map.entries[0].k, 2u);
  EXPECT_EQ(f.map.entries[1].k, 1u);
}

TEST(FlattenSensitivities, NoOpBelowThreshold) {
  const Matrix a = Matrix::ones(6, 1);
  const Flattened f = flatten_sensitivities(a, 3.0, 1.0);
  EXPECT_EQ(f.matrix, a);
}

TEST(FlattenSensitivities, Postconditions) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Matrix a = gaussian_matrix(60, 3, seed);
    const double p = seed % 2 ? 3.0 : 1.5;
    const double c = 1.0 + static_cast<double>(seed % 3);
    const ScoreVector s = lp_sensitivities(a, p);
    const Flattened f = flatten_sensitivities(a, p, c, s);
    EXPECT_LE(static_cast<double>(f.matrix.rows()), (1.0 + 1.0 / c) * 60.0);
    expect_norms_preserved(a, f.matrix, p, seed);
    const ScoreVector s2 = lp_sensitivities(f.matrix, p);
    EXPECT_LE(s2.max(), c * s.sum() / 60.0 + 1e-6);
    EXPECT_NEAR(s2.sum(), s.sum(), 1e-6);
    EXPECT_EQ(unflatten(f.matrix, f.map).rows(), a.rows());
    EXPECT_LT(max_abs((unflatten(f.matrix, f.map) - a).data()), 1e-12);
  }
  EXPECT_THROW(flatten_sensitivities(Matrix::identity(2), 2.0, 0.5), InvalidArgument);
}

TEST(FlattenUniform, Examples) {
  const Flattened f = flatten_uniform(Matrix::identity(2), 2.0, 0.5);
  ASSERT_EQ(f.matrix.rows(), 4u);
  EXPECT_NEAR(f.matrix(0, 0), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(f.matrix(1, 0), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(f.matrix(2, 1), std::sqrt(0.5), 1e-15);
  for (double v : leverage_scores(f.matrix).values) EXPECT_NEAR(v, 0.5, 1e-14);
  // ℓ1 norm grows by k^{1-1/p} = √2
  const std::vector<double> x{0.3, -1.2};
  const double l1a = oracle::lp_pow(x, 1.0);
  const double l1f = oracle::lp_pow(oracle::mul(f.matrix, x), 1.0);
  EXPECT_NEAR(l1f, std::sqrt(2.0) * l1a, 1e-14);
  EXPECT_NEAR(uniform_flatten_norm_factor(2, 2.0, 1.0), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(flatten_uniform(Matrix::identity(2), 2.0, 1.0), InvalidArgument);
}

TEST(FlattenSensLev, Postconditions) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // A few heavy rows so that something is split.
    Matrix a = gaussian_matrix(50, 3, seed + 40);
    for (std::size_t j = 0; j < 3; ++j) a(seed, j) *= 8.0;
    const double p = 3.0 + static_cast<double>(seed);
    const double c = 2.0;
    const ScoreVector lev = leverage_scores(a);
    const Flattened f = flatten_sens_lev(a, p, c, lev);
    EXPECT_LE(static_cast<double>(f.matrix.rows()), (1.0 + 1.0 / c) * 50.0);
    EXPECT_GT(f.matrix.rows(), 50u);
    expect_norms_preserved(a, f.matrix, p, seed);
    const ScoreVector lev2 = leverage_scores(f.matrix);
    EXPECT_LE(lev2.max(), sens_lev_leverage_bound(c, 3.0, 50, p, lev.max()) + 1e-6);
    // ℓ2 norms do not shrink; sensitivities of copies do not exceed the source's
    Rng rng(seed);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
      EXPECT_GE(oracle::lp_pow(oracle::mul(f.matrix, x), 2.0),
                oracle::lp_pow(oracle::mul(a, x), 2.0) * (1.0 - 1e-12));
    }
    const ScoreVector s = lp_sensitivities(a, p);
    const ScoreVector s2 = lp_sensitivities(f.matrix, p);
    const auto src = f.map.expand();
    for (std::size_t r = 0; r < src.size(); ++r) EXPECT_LE(s2.values[r], s.values[src[r]] + 1e-6);
    EXPECT_NEAR(s2.sum(), s.sum(), 1e-6);
  }
  EXPECT_THROW(flatten_sens_lev(Matrix::identity(2), 2.0, 1.0), ExponentOutOfRange);
}

TEST(RowMap, ExpandAndCounts) {
  const Flattened f = split_rows(Matrix{{1}, {2}, {3}}, 2.0, {1, 3, 2});
  EXPECT_EQ(f.map.output_rows(), 6u);
  EXPECT_EQ(f.map.source_rows(), 3u);
  EXPECT_EQ(f.map.expand(), (std::vector<std::size_t>{0, 1, 1, 1, 2, 2}));
  EXPECT_NEAR(f.map.entries[1].scale, 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_EQ(copies_for(0.3, 0.1), 3u);
  EXPECT_EQ(copies_for(0.1, 0.1), 1u);
}
