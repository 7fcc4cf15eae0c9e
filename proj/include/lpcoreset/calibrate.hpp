#pragma once

// Empirical choice of the oversampling parameter α. The sample-size formulas
// for sensitivity, root-leverage and Lewis sampling predict how α scales with
// ε and the scores but leave the constants open, so α is found by search:
// start from the leading-order guess and halve until the median estimated
// sampling error over a few draws is within ε.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "lpcoreset/errors.hpp"
#include "lpcoreset/matrix.hpp"
#include "lpcoreset/sampling.hpp"
#include "lpcoreset/scores.hpp"
#include "lpcoreset/verify.hpp"

namespace lpcoreset {

struct CalibrationOptions {
  std::size_t budget = 24;        // maximum number of halvings
  std::size_t draws = 5;          // draws per candidate α
  double quantile = 0.5;          // order statistic of the draws' Λ that must meet ε
  std::size_t refine_steps = 3;   // log-space bisection between the last two candidates
  std::size_t probes = 64;
  std::size_t restarts = 4;

  /// Accept α only when every one of ⌈1/δ⌉ (at least 5) draws meets ε, so a
  /// fresh draw at the accepted α fails with probability about δ or less.
  static CalibrationOptions for_failure_probability(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
    CalibrationOptions opt;
    opt.draws = std::max<std::size_t>(5, static_cast<std::size_t>(std::ceil(1.0 / delta)));
    opt.quantile = 1.0;
    return opt;
  }
};

struct CalibrationResult {
  double alpha = 0.0;
  double alpha0 = 0.0;
  double median_lambda = 0.0;  // Λ at the calibration order statistic
  SamplingPlan plan;
  SampleDraw draw;           // the draw holding that order statistic at the accepted α
  DistortionReport report;   // its distortion report
  std::size_t halvings = 0;
  std::size_t evaluations = 0;
};

class BudgetExhausted : public Error {
 public:
  BudgetExhausted(const std::string& what, CalibrationResult best)
      : Error(what), best_(std::move(best)) {}
  const CalibrationResult& best() const noexcept { return best_; }

 private:
  CalibrationResult best_;
};

/// Scores a method samples from: sensitivities (leverage scores when p = 2),
/// leverage scores for root-leverage sampling, Lewis weights for Lewis sampling.
inline ScoreVector scores_for(const Matrix& a, double p, PlanMethod method,
                              double tol = kDefaultSensitivityTol) {
  switch (method) {
    case PlanMethod::sensitivity:
      if (p == 2.0) return leverage_scores(a);
      return lp_sensitivities(a, p, tol);
    case PlanMethod::root_leverage:
      return leverage_scores(a);
    case PlanMethod::lewis:
      return lewis_weights(a, p);
    default:
      throw InvalidArgument("scores_for: method " + to_string(method) + " has no scores");
  }
}

/// Plan of the given method at oversampling parameter α. Lewis plans use
/// m_target = Σw / α, i.e. qᵢ = min{1, wᵢ/α}.
inline SamplingPlan plan_for(const ScoreVector& s, double p, PlanMethod method, double alpha) {
  switch (method) {
    case PlanMethod::sensitivity: {
      SamplingPlan plan = sensitivity_plan(s, alpha);
      plan.p = p;
      return plan;
    }
    case PlanMethod::root_leverage:
      return root_leverage_plan(s, p, alpha);
    case PlanMethod::lewis: {
      SamplingPlan plan = lewis_plan(s, s.sum() / alpha);
      plan.alpha = alpha;
      return plan;
    }
    default:
      throw InvalidArgument("plan_for: method " + to_string(method) + " is not calibratable");
  }
}

/// Leading-order starting point: ε²·𝔖^{1−2/p} for p > 2 and ε²·𝔖^{2/p−1} for
/// p < 2 under sensitivity sampling; ε² otherwise.
inline double initial_alpha(const ScoreVector& s, double p, PlanMethod method, double eps) {
  const double e2 = eps * eps;
  if (method != PlanMethod::sensitivity || p == 2.0) return e2;
  const double total = std::max(s.sum(), 1e-300);
  return p > 2.0 ? e2 * std::pow(total, 1.0 - 2.0 / p) : e2 * std::pow(total, 2.0 / p - 1.0);
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xC2B2AE3D27D4EB4FULL);
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDULL;
  x ^= x >> 33;
  return x;
}

struct Candidate {
  double alpha = 0.0;
  double median = 0.0;  // the selected order statistic (the median by default)
  SamplingPlan plan;
  SampleDraw draw;
  DistortionReport report;
};

inline Candidate evaluate_alpha(const Matrix& a, const ScoreVector& s, double p, PlanMethod method,
                                double alpha, std::uint64_t seed, std::uint64_t tag,
                                const CalibrationOptions& opt) {
  Candidate c;
  c.alpha = alpha;
  c.plan = plan_for(s, p, method, alpha);
  std::vector<std::pair<double, std::size_t>> lams;
  std::vector<SampleDraw> draws;
  std::vector<DistortionReport> reports;
  for (std::size_t j = 0; j < opt.draws; ++j) {
    const std::uint64_t ds = mix_seed(seed, tag, j);
    SampleDraw dr = draw(c.plan, ds);
    DistortionReport rep =
        distortion_best(a, apply(dr, a), p, opt.probes, opt.restarts, mix_seed(ds, 0x5eed, j));
    lams.emplace_back(rep.lambda_est, j);
    draws.push_back(std::move(dr));
    reports.push_back(std::move(rep));
  }
  std::sort(lams.begin(), lams.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(std::clamp(opt.quantile, 0.0, 1.0) * static_cast<double>(lams.size())));
  const std::size_t pos = std::min(lams.size() - 1, rank > 0 ? rank - 1 : 0);
  const std::size_t mid = lams[pos].second;
  c.median = lams[pos].first;
  c.draw = std::move(draws[mid]);
  c.report = std::move(reports[mid]);
  return c;
}

inline bool keeps_everything(const SamplingPlan& plan) {
  return std::all_of(plan.q.begin(), plan.q.end(), [](double q) { return q >= 1.0; });
}

}  // namespace detail

/// Halving search on α with precomputed scores. The accepted α never exceeds
/// the starting value.
inline CalibrationResult calibrate_alpha(const Matrix& a, const ScoreVector& s, double p, double eps,
                                         PlanMethod method, std::uint64_t seed,
                                         const CalibrationOptions& opt = {}) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("calibrate_alpha: eps must lie in (0,1)");
  if (opt.draws == 0) throw InvalidArgument("calibrate_alpha: need at least one draw per candidate");
  CalibrationResult result;
  result.alpha0 = initial_alpha(s, p, method, eps);

  std::optional<detail::Candidate> best;
  std::optional<detail::Candidate> accepted;
  double rejected_alpha = 0.0;
  double alpha = result.alpha0;
  std::uint64_t tag = 0;
  for (std::size_t h = 0; h <= opt.budget; ++h) {
    detail::Candidate c = detail::evaluate_alpha(a, s, p, method, alpha, seed, tag++, opt);
    ++result.evaluations;
    result.halvings = h;
    if (!best || c.median < best->median) best = c;
    if (c.median <= eps || detail::keeps_everything(c.plan)) {
      accepted = std::move(c);
      break;
    }
    rejected_alpha = alpha;
    alpha *= 0.5;
  }
  if (!accepted) {
    result.alpha = best->alpha;
    result.median_lambda = best->median;
    result.plan = best->plan;
    result.draw = best->draw;
    result.report = best->report;
    throw BudgetExhausted("calibrate_alpha: no alpha met eps within the halving budget", result);
  }
  if (rejected_alpha > 0.0) {
    double lo = accepted->alpha;
    double hi = rejected_alpha;
    for (std::size_t r = 0; r < opt.refine_steps; ++r) {
      const double mid = std::sqrt(lo * hi);
      detail::Candidate c = detail::evaluate_alpha(a, s, p, method, mid, seed, tag++, opt);
      ++result.evaluations;
      if (c.median <= eps) {
        lo = mid;
        accepted = std::move(c);
      } else {
        hi = mid;
      }
    }
  }
  result.alpha = accepted->alpha;
  result.median_lambda = accepted->median;
  result.plan = std::move(accepted->plan);
  result.draw = std::move(accepted->draw);
  result.report = std::move(accepted->report);
  return result;
}

inline CalibrationResult calibrate_alpha(const Matrix& a, double p, double eps, PlanMethod method,
                                         std::uint64_t seed, const CalibrationOptions& opt = {}) {
  return calibrate_alpha(a, scores_for(a, p, method), p, eps, method, seed, opt);
}

}  // namespace lpcoreset
