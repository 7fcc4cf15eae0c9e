#pragma once

// Sampling plans and lp sampling matrices. A draw keeps row i independently
// with probability qᵢ and reweights it by qᵢ^{-1/p}, so E‖SAx‖_p^p = ‖Ax‖_p^p.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lpcoreset/errors.hpp"
#include "lpcoreset/matrix.hpp"
#include "lpcoreset/random.hpp"
#include "lpcoreset/scores.hpp"

namespace lpcoreset {

enum class PlanMethod { sensitivity, root_leverage, lewis, uniform_half, custom };

inline std::string to_string(PlanMethod m) {
  switch (m) {
    case PlanMethod::sensitivity: return "sensitivity";
    case PlanMethod::root_leverage: return "rootlev";
    case PlanMethod::lewis: return "lewis";
    case PlanMethod::uniform_half: return "half";
    case PlanMethod::custom: return "custom";
  }
  return "?";
}

inline PlanMethod parse_plan_method(const std::string& s) {
  if (s == "sensitivity") return PlanMethod::sensitivity;
  if (s == "rootlev" || s == "root_leverage") return PlanMethod::root_leverage;
  if (s == "lewis") return PlanMethod::lewis;
  if (s == "half" || s == "uniform_half") return PlanMethod::uniform_half;
  if (s == "custom") return PlanMethod::custom;
  throw InvalidArgument("unknown sampling method '" + s + "'");
}

/// Per-row inclusion probabilities. qᵢ = 0 marks a row that carries no mass
/// (zero score) and is never kept.
struct SamplingPlan {
  std::vector<double> q;
  double p = 2.0;
  PlanMethod method = PlanMethod::custom;
  std::optional<double> alpha;

  std::size_t size() const noexcept { return q.size(); }
  double expected_rows() const noexcept { return std::accumulate(q.begin(), q.end(), 0.0); }
};

struct SampleDraw {
  struct Kept {
    std::size_t index = 0;
    double weight = 1.0;
    friend bool operator==(const Kept&, const Kept&) = default;
  };
  std::vector<Kept> kept;
  std::uint64_t seed = 0;
  double p = 2.0;
  std::size_t source_rows = 0;

  std::size_t size() const noexcept { return kept.size(); }
};

namespace detail {

inline double floor_probability(double q, double score, std::size_t n) {
  if (q > 0.0) return q;
  if (score > 0.0) return 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  return 0.0;
}

inline void check_exponent(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("sampling requires finite p >= 1");
}

}  // namespace detail

/// qᵢ = min{1, 1/n + σᵢ/α}
inline SamplingPlan sensitivity_plan(const ScoreVector& s, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("sensitivity_plan: alpha must be positive");
  if (s.kind == ScoreKind::lewis) throw InvalidArgument("sensitivity_plan: needs sensitivity scores");
  const std::size_t n = s.size();
  SamplingPlan plan{std::vector<double>(n), s.p, PlanMethod::sensitivity, alpha};
  const double base = n ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) plan.q[i] = std::min(1.0, base + s.values[i] / alpha);
  return plan;
}

/// qᵢ = min{1, τᵢ^{p/2}/α} for 1 ≤ p < 2.
inline SamplingPlan root_leverage_plan(const ScoreVector& lev, double p, double alpha) {
  if (!(p >= 1.0 && p < 2.0)) throw ExponentOutOfRange(p, "[1, 2)");
  if (!(alpha > 0.0)) throw InvalidArgument("root_leverage_plan: alpha must be positive");
  if (lev.kind != ScoreKind::leverage) throw InvalidArgument("root_leverage_plan: needs leverage scores");
  const std::size_t n = lev.size();
  SamplingPlan plan{std::vector<double>(n), p, PlanMethod::root_leverage, alpha};
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::min(1.0, std::pow(lev.values[i], p / 2.0) / alpha);
    plan.q[i] = detail::floor_probability(q, lev.values[i], n);
  }
  return plan;
}

/// qᵢ = min{1, m·wᵢ/Σw}; zero results for positive weights are floored at 1/n².
inline SamplingPlan lewis_plan(const ScoreVector& w, double m_target) {
  if (w.kind != ScoreKind::lewis) throw InvalidArgument("lewis_plan: needs Lewis weights");
  if (!(m_target >= 0.0)) throw InvalidArgument("lewis_plan: m_target must be >= 0");
  const std::size_t n = w.size();
  const double total = w.sum();
  SamplingPlan plan{std::vector<double>(n), w.p, PlanMethod::lewis, std::nullopt};
  for (std::size_t i = 0; i < n; ++i) {
    const double q = total > 0.0 ? std::min(1.0, m_target * w.values[i] / total) : 0.0;
    plan.q[i] = detail::floor_probability(q, w.values[i], n);
  }
  return plan;
}

inline SamplingPlan half_plan(std::size_t n, double p) {
  return {std::vector<double>(n, 0.5), p, PlanMethod::uniform_half, std::nullopt};
}

inline SamplingPlan custom_plan(std::vector<double> q, double p) {
  for (double v : q)
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("custom_plan: probabilities must lie in [0,1]");
  return {std::move(q), p, PlanMethod::custom, std::nullopt};
}

/// Independent Bernoulli(qᵢ) per row from a single seeded stream, consumed in
/// row order (one uniform per row, including rows with q = 0 or 1).
inline SampleDraw draw(const SamplingPlan& plan, std::uint64_t seed) {
  detail::check_exponent(plan.p);
  Rng rng(seed);
  SampleDraw out;
  out.seed = seed;
  out.p = plan.p;
  out.source_rows = plan.size();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const double u = rng.uniform();
    const double q = plan.q[i];
    if (q > 0.0 && u < q) {
      out.kept.push_back({i, q == 1.0 ? 1.0 : std::pow(q, -1.0 / plan.p)});
    }
  }
  return out;
}

/// Row j of the result is weight_j · A[kept_j].
inline Matrix apply(const SampleDraw& dr, const Matrix& a) {
  if (dr.source_rows != a.rows()) {
    throw ShapeMismatch("apply: draw is for " + std::to_string(dr.source_rows) +
                        " rows, matrix has " + std::to_string(a.rows()));
  }
  Matrix out(dr.kept.size(), a.cols());
  for (std::size_t j = 0; j < dr.kept.size(); ++j) {
    auto src = a.row(dr.kept[j].index);
    auto dst = out.row(j);
    for (std::size_t c = 0; c < a.cols(); ++c) dst[c] = dr.kept[j].weight * src[c];
  }
  return out;
}

/// ‖SAx‖_p^p evaluated from the draw without materializing SA.
inline double sampled_norm_pow(const SampleDraw& dr, std::span<const double> ax) {
  double s = 0.0;
  for (const auto& k : dr.kept) s += std::pow(k.weight, dr.p) * std::pow(std::abs(ax[k.index]), dr.p);
  return s;
}

}  // namespace lpcoreset
