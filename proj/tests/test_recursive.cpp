#include <gtest/gtest.h>

#include <cmath>

#include "lpcoreset/generators.hpp"
#include "lpcoreset/recursive.hpp"

using namespace lpcoreset;

namespace {

RecursiveOptions forced(double target, double per_round) {
  RecursiveOptions o;
  o.target_rows = target;
  o.per_round_eps = per_round;
  o.probes = 16;
  o.restarts = 2;
  return o;
}

// Output row j equals weight_j · A[src_j].
void expect_lineage_consistent(const Matrix& a, const RecursiveResult& r) {
  ASSERT_EQ(r.lineage.size(), r.matrix.rows());
  for (std::size_t j = 0; j < r.matrix.rows(); ++j)
    for (std::size_t c = 0; c < a.cols(); ++c)
      EXPECT_NEAR(r.matrix(j, c), r.lineage[j].weight * a(r.lineage[j].index, c), 1e-12 * (1.0 + std::abs(r.matrix(j, c))));
}

}  // namespace

TEST(RecursiveSensitivity, ForcedRoundsShrinkAndCompose) {
  const Matrix a = gaussian_matrix(1200, 3, 5);
  const RecursiveResult r = recursive_sensitivity(a, 3.0, 0.3, 0.1, 11, forced(400.0, 0.3));
  ASSERT_GE(r.trace.size(), 1u);
  std::size_t prev = a.rows();
  double prod = 1.0;
  for (const auto& rec : r.trace) {
    EXPECT_EQ(rec.rows_in, prev);
    EXPECT_LT(rec.rows_out, rec.rows_in);
    EXPECT_LE(static_cast<double>(rec.rows_out), 15.0 / 16.0 * static_cast<double>(rec.rows_in));
    EXPECT_LE(rec.lambda_est, 0.3);
    EXPECT_TRUE(rec.flatten_ok);
    EXPECT_LE(static_cast<double>(rec.rows_flat), 1.25 * static_cast<double>(rec.rows_in));
    prev = rec.rows_out;
    prod *= 1.0 + rec.lambda_est;
  }
  EXPECT_EQ(r.matrix.rows(), prev);
  EXPECT_NEAR(r.composed_lambda(), prod - 1.0, 1e-15);
  expect_lineage_consistent(a, r);
  // total sensitivity preserved within a factor 1 ± 0.5
  const double s0 = total_sensitivity_of(a, 3.0), s1 = total_sensitivity_of(r.matrix, 3.0);
  EXPECT_GT(s1, 0.5 * s0);
  EXPECT_LT(s1, 1.5 * s0);
  EXPECT_EQ(orthonormal_basis(r.matrix).rank, 3u);
}

TEST(RecursiveSensitivity, DeterministicAndDefaultsStopImmediately) {
  const Matrix a = gaussian_matrix(600, 3, 2);
  const RecursiveResult r1 = recursive_sensitivity(a, 3.0, 0.3, 0.1, 4, forced(300.0, 0.4));
  const RecursiveResult r2 = recursive_sensitivity(a, 3.0, 0.3, 0.1, 4, forced(300.0, 0.4));
  EXPECT_EQ(r1.matrix, r2.matrix);
  ASSERT_EQ(r1.trace.size(), r2.trace.size());
  // Default target (𝔖^{2−2/p}ε⁻²(log₂ n)³) exceeds n at this size.
  const RecursiveResult d = recursive_sensitivity(a, 3.0, 0.3, 0.1, 4);
  EXPECT_GT(d.target_rows, 600.0);
  EXPECT_TRUE(d.trace.empty());
  EXPECT_EQ(d.matrix, a);
  EXPECT_DOUBLE_EQ(d.per_round_eps, 0.3 / std::ceil(std::log2(600.0)));
  EXPECT_THROW(recursive_sensitivity(a, 2.0, 0.3, 0.1, 4), ExponentOutOfRange);
}

TEST(RecursiveSensitivity, RetryExhaustion) {
  const Matrix a = gaussian_matrix(400, 3, 9);
  RecursiveOptions o = forced(100.0, 1e-6);
  o.max_retries = 3;
  try {
    recursive_sensitivity(a, 3.0, 0.3, 0.1, 1, o);
    FAIL() << "expected RoundRetryExhausted";
  } catch (const RoundRetryExhausted& e) {
    ASSERT_EQ(e.partial().trace.size(), 1u);
    EXPECT_EQ(e.partial().trace[0].attempts, 3u);
    EXPECT_EQ(e.partial().matrix, a);
  }
}

TEST(RecursiveSensLev, DoubleFlattenAssertions) {
  const Matrix v = vandermonde_features(gaussian_matrix(1500, 1, 3), 3);
  const RecursiveResult r = recursive_sens_lev(v, 4.0, 0.3, 0.1, 8, forced(500.0, 0.3));
  ASSERT_GE(r.trace.size(), 1u);
  for (const auto& rec : r.trace) {
    EXPECT_TRUE(rec.flatten_ok);
    EXPECT_LE(static_cast<double>(rec.rows_flat), 25.0 / 16.0 * static_cast<double>(rec.rows_in));
    EXPECT_LE(rec.max_leverage, rec.leverage_bound);
    EXPECT_LE(rec.max_sensitivity, rec.sensitivity_bound);
  }
  expect_lineage_consistent(v, r);
  EXPECT_THROW(recursive_sens_lev(v, 1.5, 0.3, 0.1, 8), ExponentOutOfRange);
}

TEST(RecursiveRootLeverage, SingleRoundBelowCap) {
  const Matrix a = gaussian_matrix(3000, 3, 21);
  RecursiveOptions o;
  o.probes = 16;
  o.restarts = 2;
  const RecursiveResult r = recursive_root_leverage(a, 1.5, 0.3, 0.1, 6, o);
  const double loglog = std::ceil(std::log2(std::log2(3000.0)));
  EXPECT_LE(static_cast<double>(r.trace.size()), loglog + 2.0);
  ASSERT_GE(r.trace.size(), 1u);
  EXPECT_TRUE(r.trace[0].alpha.has_value());
  EXPECT_DOUBLE_EQ(r.per_round_eps, 0.3 / std::max(2.0, loglog));
  EXPECT_DOUBLE_EQ(r.target_rows, root_leverage_cap(3.0, 0.3, 1.5, 3000));
  EXPECT_LT(static_cast<double>(r.matrix.rows()), r.target_rows);
  EXPECT_EQ(orthonormal_basis(r.matrix).rank, 3u);
  expect_lineage_consistent(a, r);
  const DistortionReport rep = recursive_distortion(a, r, 1.5, 32, 2, 1);
  EXPECT_LE(rep.lambda_est, 0.3);
  EXPECT_THROW(recursive_root_leverage(a, 2.0, 0.3, 0.1, 6), ExponentOutOfRange);
}

TEST(RecursiveRootLeverage, MultipleForcedRounds) {
  const Matrix a = gaussian_matrix(4000, 2, 13);
  RecursiveOptions o;
  o.target_rows = 200.0;
  o.per_round_eps = 0.15;
  o.probes = 16;
  o.restarts = 2;
  const RecursiveResult r = recursive_root_leverage(a, 1.0, 0.3, 0.1, 3, o);
  std::size_t prev = a.rows();
  for (const auto& rec : r.trace) {
    EXPECT_EQ(rec.rows_in, prev);
    EXPECT_LE(rec.rows_out, rec.rows_in);
    prev = rec.rows_out;
  }
  EXPECT_LE(r.trace.size(), r.max_rounds);
  expect_lineage_consistent(a, r);
}
