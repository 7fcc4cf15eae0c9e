#pragma once

// Row-splitting transforms. A row a is replaced by k copies of a / k^{1/p};
// this leaves ‖Ax‖_p unchanged for every x while dividing the row's share of
// any lp-type score by k.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "lpcoreset/errors.hpp"
#include "lpcoreset/matrix.hpp"
#include "lpcoreset/scores.hpp"

namespace lpcoreset {

/// Provenance of a flattened matrix: one entry per source row, in source
/// order. Copies of a source row are contiguous in the output.
struct RowMap {
  struct Entry {
    std::size_t src = 0;
    std::size_t k = 1;
    double scale = 1.0;  // k^{-1/p}
  };
  std::vector<Entry> entries;
  double p = 2.0;

  std::size_t output_rows() const noexcept {
    std::size_t m = 0;
    for (const auto& e : entries) m += e.k;
    return m;
  }
  std::size_t source_rows() const noexcept { return entries.size(); }

  /// Source index of every output row.
  std::vector<std::size_t> expand() const {
    std::vector<std::size_t> out;
    out.reserve(output_rows());
    for (const auto& e : entries) out.insert(out.end(), e.k, e.src);
    return out;
  }
};

struct Flattened {
  Matrix matrix;
  RowMap map;
};

/// Builds the split matrix for the given copy counts.
inline Flattened split_rows(const Matrix& a, double p, const std::vector<std::size_t>& copies) {
  if (copies.size() != a.rows()) throw ShapeMismatch("split_rows: one copy count per row required");
  RowMap map;
  map.p = p;
  std::size_t m = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const std::size_t k = std::max<std::size_t>(1, copies[i]);
    map.entries.push_back({i, k, k == 1 ? 1.0 : std::pow(static_cast<double>(k), -1.0 / p)});
    m += k;
  }
  Matrix out(m, a.cols());
  std::size_t r = 0;
  for (const auto& e : map.entries) {
    auto src = a.row(e.src);
    for (std::size_t c = 0; c < e.k; ++c, ++r) {
      auto dst = out.row(r);
      for (std::size_t j = 0; j < a.cols(); ++j) dst[j] = e.scale * src[j];
    }
  }
  return {std::move(out), std::move(map)};
}

/// Inverse of split_rows: sums the copies of each source row and undoes the
/// scaling. Returns the original matrix exactly up to rounding.
inline Matrix unflatten(const Matrix& flat, const RowMap& map) {
  if (flat.rows() != map.output_rows()) throw ShapeMismatch("unflatten: row count mismatch");
  Matrix out(map.source_rows(), flat.cols());
  std::size_t r = 0;
  for (std::size_t s = 0; s < map.entries.size(); ++s) {
    const auto& e = map.entries[s];
    for (std::size_t j = 0; j < flat.cols(); ++j) out(s, j) = flat(r, j) / e.scale;
    r += e.k;
  }
  return out;
}

inline std::size_t copies_for(double score, double threshold) {
  // Slack absorbs rounding when a score sits exactly on the threshold.
  const double ratio = score / threshold;
  if (!(ratio > 1.0 + 1e-9)) return 1;
  return static_cast<std::size_t>(std::ceil(ratio - 1e-9));
}

/// Splits every row whose lp sensitivity exceeds C·𝔖/n into
/// ⌈σᵢ/(C·𝔖/n)⌉ copies. At most n/C rows are added.
inline Flattened flatten_sensitivities(const Matrix& a, double p, double c, const ScoreVector& s) {
  if (!(c >= 1.0)) throw InvalidArgument("flatten_sensitivities: C must be >= 1");
  if (s.size() != a.rows()) throw ShapeMismatch("flatten_sensitivities: score count != rows");
  if (s.kind == ScoreKind::lewis) throw InvalidArgument("flatten_sensitivities: needs sensitivity scores");
  const double total = s.sum();
  const double threshold = c * total / static_cast<double>(a.rows());
  std::vector<std::size_t> copies(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) copies[i] = copies_for(s.values[i], threshold);
  return split_rows(a, p, copies);
}

inline Flattened flatten_sensitivities(const Matrix& a, double p, double c,
                                       double tol = kDefaultSensitivityTol) {
  const ScoreVector s = p == 2.0 ? leverage_scores(a) : lp_sensitivities(a, p, tol);
  return flatten_sensitivities(a, p, c, s);
}

/// Every row becomes k = ⌈1/α⌉ copies, so every lq sensitivity of the output
/// is at most 1/k ≤ α for every q.
inline Flattened flatten_uniform(const Matrix& a, double p, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("flatten_uniform: alpha must lie in (0,1)");
  const auto k = static_cast<std::size_t>(std::ceil(1.0 / alpha));
  return split_rows(a, p, std::vector<std::size_t>(a.rows(), k));
}

/// The exact lq norm factor ‖A'x‖_q / ‖Ax‖_q = k^{1/q − 1/p} of flatten_uniform.
inline double uniform_flatten_norm_factor(std::size_t k, double p, double q) {
  return std::pow(static_cast<double>(k), 1.0 / q - 1.0 / p);
}

/// For p > 2: splits rows whose leverage score exceeds C·d/n into
/// ⌈τᵢ/(C·d/n)⌉ copies scaled by k^{-1/p}. Here d is the rank (Σ τᵢ).
inline Flattened flatten_sens_lev(const Matrix& a, double p, double c, const ScoreVector& lev) {
  if (!(p > 2.0)) throw ExponentOutOfRange(p, "(2, inf)");
  if (!(c >= 1.0)) throw InvalidArgument("flatten_sens_lev: C must be >= 1");
  if (lev.kind != ScoreKind::leverage) throw InvalidArgument("flatten_sens_lev: needs leverage scores");
  if (lev.size() != a.rows()) throw ShapeMismatch("flatten_sens_lev: score count != rows");
  const double threshold = c * lev.sum() / static_cast<double>(a.rows());
  std::vector<std::size_t> copies(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) copies[i] = copies_for(lev.values[i], threshold);
  return split_rows(a, p, copies);
}

inline Flattened flatten_sens_lev(const Matrix& a, double p, double c) {
  if (!(p > 2.0)) throw ExponentOutOfRange(p, "(2, inf)");
  return flatten_sens_lev(a, p, c, leverage_scores(a));
}

/// Right-hand side of the leverage bound after flatten_sens_lev:
/// (C·d/n)^{2/p} · (max τᵢ(A))^{1−2/p}.
inline double sens_lev_leverage_bound(double c, double d, std::size_t n, double p, double max_lev) {
  return std::pow(c * d / static_cast<double>(n), 2.0 / p) * std::pow(max_lev, 1.0 - 2.0 / p);
}

}  // namespace lpcoreset
