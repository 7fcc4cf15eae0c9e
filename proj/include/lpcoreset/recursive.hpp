#pragma once

// Recursive row reduction. Each round shrinks the current matrix by sampling
// and checks the round's sampling error; the final matrix is compared to the
// input directly, and the per-round errors compose multiplicatively:
// Λ_total ≤ Π(1 + Λ_round) − 1.
//
//   recursive_sensitivity   p > 2: flatten sensitivities (C = 4), keep each
//                           row with probability 1/2.
//   recursive_sens_lev      p > 2: flatten sensitivities, then leverage
//                           scores (both C = 4), keep with probability 1/2.
//   recursive_root_leverage 1 ≤ p < 2: root-leverage sampling with a
//                           calibrated α per round.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lpcoreset/calibrate.hpp"
#include "lpcoreset/errors.hpp"
#include "lpcoreset/flatten.hpp"
#include "lpcoreset/matrix.hpp"
#include "lpcoreset/sampling.hpp"
#include "lpcoreset/scores.hpp"
#include "lpcoreset/verify.hpp"

namespace lpcoreset {

struct RoundRecord {
  std::size_t round = 0;
  std::size_t rows_in = 0;
  std::size_t rows_flat = 0;     // after flattening (= rows_in when none)
  std::size_t rows_out = 0;
  double lambda_est = 0.0;       // sampling error of this round's draw
  double total_sens_est = 0.0;   // 𝔖ᵖ of the round's input
  std::optional<double> alpha;   // calibrated α (root-leverage rounds)
  std::size_t attempts = 0;
  // Flattening audit (sensitivity drivers).
  double max_sensitivity = 0.0;
  double sensitivity_bound = 0.0;
  double max_leverage = 0.0;
  double leverage_bound = 0.0;
  bool flatten_ok = true;
};

struct RecursiveOptions {
  std::optional<double> target_rows;     // overrides the stop size formula
  std::optional<double> per_round_eps;   // overrides the per-round error budget
  std::size_t max_retries = 10;
  std::optional<std::size_t> min_rounds;  // rounds run even when already below target
                                          // (default 0; 1 for root-leverage)
  std::size_t probes = 64;
  std::size_t restarts = 4;
  double polylog_exponent = 3.0;         // stop sizes use (log₂ n)^exponent
  double sensitivity_tol = kDefaultSensitivityTol;
};

struct RecursiveResult {
  Matrix matrix;
  std::vector<RoundRecord> trace;
  /// Source row in the input and accumulated weight of every output row.
  std::vector<SampleDraw::Kept> lineage;
  double target_rows = 0.0;
  double per_round_eps = 0.0;
  std::size_t max_rounds = 0;
  double delta = 0.0;

  /// Π(1 + Λ_round) − 1 over the trace.
  double composed_lambda() const {
    double prod = 1.0;
    for (const auto& r : trace) prod *= 1.0 + r.lambda_est;
    return prod - 1.0;
  }
};

class RoundRetryExhausted : public Error {
 public:
  RoundRetryExhausted(const std::string& what, RecursiveResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const RecursiveResult& partial() const noexcept { return partial_; }

 private:
  RecursiveResult partial_;
};

inline constexpr double kRecursiveFlattenC = 4.0;
inline constexpr double kRoundShrink = 15.0 / 16.0;
inline constexpr double kDoubleFlattenGrowth = 25.0 / 16.0;
inline constexpr double kSensLevLeverageConstant = 8.0;
inline constexpr double kFlattenAuditTol = 1e-6;

namespace detail {

inline double log2_rows(std::size_t n) { return std::log2(static_cast<double>(std::max<std::size_t>(n, 2))); }

inline std::vector<SampleDraw::Kept> identity_lineage(std::size_t n) {
  std::vector<SampleDraw::Kept> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {i, 1.0};
  return out;
}

inline std::vector<SampleDraw::Kept> lineage_after_flatten(const std::vector<SampleDraw::Kept>& lin,
                                                           const RowMap& map) {
  std::vector<SampleDraw::Kept> out;
  out.reserve(map.output_rows());
  for (const auto& e : map.entries)
    for (std::size_t c = 0; c < e.k; ++c) out.push_back({lin[e.src].index, lin[e.src].weight * e.scale});
  return out;
}

inline std::vector<SampleDraw::Kept> lineage_after_draw(const std::vector<SampleDraw::Kept>& lin,
                                                        const SampleDraw& dr) {
  std::vector<SampleDraw::Kept> out;
  out.reserve(dr.kept.size());
  for (const auto& k : dr.kept) out.push_back({lin[k.index].index, lin[k.index].weight * k.weight});
  return out;
}

inline ScoreVector sensitivities_or_leverage(const Matrix& a, double p, double tol) {
  return p == 2.0 ? leverage_scores(a) : lp_sensitivities(a, p, tol);
}

/// Half-sampling step shared by both sensitivity drivers. Returns false when
/// no seed produced an acceptable draw.
inline bool half_sample_round(const Matrix& flat, std::size_t rows_in, double p, double budget,
                              std::uint64_t seed, std::size_t round, const RecursiveOptions& opt,
                              RoundRecord& rec, SampleDraw& accepted) {
  const SamplingPlan plan = half_plan(flat.rows(), p);
  for (std::size_t attempt = 0; attempt < opt.max_retries; ++attempt) {
    rec.attempts = attempt + 1;
    const SampleDraw dr = draw(plan, mix_seed(seed, round, attempt));
    if (static_cast<double>(dr.size()) > kRoundShrink * static_cast<double>(rows_in)) continue;
    if (dr.size() == 0) continue;
    const DistortionReport rep = distortion_best(flat, apply(dr, flat), p, opt.probes, opt.restarts,
                                                 mix_seed(seed, round + 0x100, attempt));
    rec.lambda_est = rep.lambda_est;
    if (rep.lambda_est <= budget) {
      accepted = dr;
      return true;
    }
  }
  return false;
}

enum class SensDriver { sensitivity, sens_lev };

inline RecursiveResult recursive_sens_driver(const Matrix& a, double p, double eps, double delta,
                                             std::uint64_t seed, const RecursiveOptions& opt,
                                             SensDriver kind) {
  if (!(p > 2.0)) throw ExponentOutOfRange(p, "(2, inf)");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0,1)");
  const std::size_t n0 = a.rows();
  const double logn = log2_rows(n0);
  const auto d = static_cast<double>(orthonormal_basis(a).rank);

  RecursiveResult res;
  res.delta = delta;
  res.max_rounds = static_cast<std::size_t>(std::ceil(logn));
  res.per_round_eps = opt.per_round_eps.value_or(eps / std::ceil(logn));

  ScoreVector s = sensitivities_or_leverage(a, p, opt.sensitivity_tol);
  const double total0 = s.sum();
  const double polylog = std::pow(logn, opt.polylog_exponent);
  if (opt.target_rows) {
    res.target_rows = *opt.target_rows;
  } else if (kind == SensDriver::sensitivity) {
    res.target_rows = std::pow(total0, 2.0 - 2.0 / p) / (eps * eps) * polylog;
  } else {
    res.target_rows = std::pow(d, 2.0 / p) * std::pow(total0, 2.0 - 4.0 / p) / (eps * eps) * polylog;
  }

  Matrix current = a;
  res.lineage = identity_lineage(n0);
  for (std::size_t round = 0; round < res.max_rounds; ++round) {
    const bool above = static_cast<double>(current.rows()) > res.target_rows;
    if (!above && round >= opt.min_rounds.value_or(0)) break;

    RoundRecord rec;
    rec.round = round;
    rec.rows_in = current.rows();
    if (round > 0) s = sensitivities_or_leverage(current, p, opt.sensitivity_tol);
    const double total = s.sum();
    rec.total_sens_est = total;
    const double nin = static_cast<double>(rec.rows_in);

    Flattened flat = flatten_sensitivities(current, p, kRecursiveFlattenC, s);
    std::vector<SampleDraw::Kept> lin = lineage_after_flatten(res.lineage, flat.map);
    const ScoreVector s1 = sensitivities_or_leverage(flat.matrix, p, opt.sensitivity_tol);
    rec.max_sensitivity = s1.max();
    rec.sensitivity_bound = kRecursiveFlattenC * total / nin + kFlattenAuditTol;
    rec.flatten_ok = rec.max_sensitivity <= rec.sensitivity_bound &&
                     flat.matrix.rows() <= static_cast<std::size_t>(nin + nin / kRecursiveFlattenC);

    if (kind == SensDriver::sens_lev) {
      const ScoreVector lev = leverage_scores(flat.matrix);
      Flattened flat2 = flatten_sens_lev(flat.matrix, p, kRecursiveFlattenC, lev);
      lin = lineage_after_flatten(lin, flat2.map);
      flat = Flattened{std::move(flat2.matrix), std::move(flat2.map)};
      const ScoreVector lev2 = leverage_scores(flat.matrix);
      rec.max_leverage = lev2.max();
      rec.leverage_bound = std::pow(kRecursiveFlattenC * d / nin, 2.0 / p) *
                               std::pow(kSensLevLeverageConstant * total / nin, 1.0 - 2.0 / p) +
                           kFlattenAuditTol;
      rec.flatten_ok = rec.flatten_ok && rec.max_leverage <= rec.leverage_bound &&
                       static_cast<double>(flat.matrix.rows()) <= kDoubleFlattenGrowth * nin;
    }
    rec.rows_flat = flat.matrix.rows();

    SampleDraw accepted;
    if (!half_sample_round(flat.matrix, rec.rows_in, p, res.per_round_eps, seed, round, opt, rec,
                           accepted)) {
      res.matrix = current;
      res.trace.push_back(rec);
      throw RoundRetryExhausted("round " + std::to_string(round) + ": no draw met the per-round budget " +
                                    std::to_string(res.per_round_eps) + " in " +
                                    std::to_string(opt.max_retries) + " attempts",
                                std::move(res));
    }
    current = apply(accepted, flat.matrix);
    res.lineage = lineage_after_draw(lin, accepted);
    rec.rows_out = current.rows();
    res.trace.push_back(rec);
  }
  res.matrix = std::move(current);
  return res;
}

}  // namespace detail

/// Flatten (C = 4) then half-sample, until the row count reaches
/// 𝔖^{2−2/p}·ε⁻²·(log₂ n)³ or ⌈log₂ n⌉ rounds have run.
inline RecursiveResult recursive_sensitivity(const Matrix& a, double p, double eps, double delta,
                                             std::uint64_t seed, const RecursiveOptions& opt = {}) {
  return detail::recursive_sens_driver(a, p, eps, delta, seed, opt, detail::SensDriver::sensitivity);
}

/// As recursive_sensitivity with a second, leverage-score flattening per round;
/// stops at d^{2/p}·𝔖^{2−4/p}·ε⁻²·(log₂ n)³ rows.
inline RecursiveResult recursive_sens_lev(const Matrix& a, double p, double eps, double delta,
                                          std::uint64_t seed, const RecursiveOptions& opt = {}) {
  return detail::recursive_sens_driver(a, p, eps, delta, seed, opt, detail::SensDriver::sens_lev);
}

/// Cap on the output size of recursive root-leverage sampling:
/// d·ε^{−4/p}·(log₂ n)^exponent.
inline double root_leverage_cap(double d, double eps, double p, std::size_t n, double exponent = 3.0) {
  return d * std::pow(eps, -4.0 / p) * std::pow(detail::log2_rows(n), exponent);
}

/// Repeated root-leverage sampling for 1 ≤ p < 2. Each round calibrates α
/// for ε/max(2, ⌈log₂ log₂ n⌉); the run stops once the rows fall below the
/// cap or stop decreasing. One round runs even below the cap unless
/// min_rounds is set to 0.
inline RecursiveResult recursive_root_leverage(const Matrix& a, double p, double eps, double delta,
                                               std::uint64_t seed, RecursiveOptions opt = {},
                                               std::optional<CalibrationOptions> calibration = {}) {
  if (!(p >= 1.0 && p < 2.0)) throw ExponentOutOfRange(p, "[1, 2)");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  const std::size_t n0 = a.rows();
  const double loglog = std::ceil(std::log2(detail::log2_rows(n0)));
  const double divisor = std::max(2.0, loglog);

  RecursiveResult res;
  res.delta = delta;
  res.max_rounds = static_cast<std::size_t>(loglog) + 2;
  res.per_round_eps = opt.per_round_eps.value_or(eps / divisor);
  const double d = static_cast<double>(orthonormal_basis(a).rank);
  res.target_rows = opt.target_rows.value_or(root_leverage_cap(d, eps, p, n0, opt.polylog_exponent));

  CalibrationOptions cal = calibration.value_or(CalibrationOptions{});
  if (!calibration) {
    // Per-round failure probability δ / rounds, read off the order statistics
    // of the calibration draws.
    cal.quantile = 1.0 - delta / static_cast<double>(res.max_rounds);
    cal.probes = opt.probes;
    cal.restarts = opt.restarts;
  }

  Matrix current = a;
  res.lineage = detail::identity_lineage(n0);
  for (std::size_t round = 0; round < res.max_rounds; ++round) {
    const bool above = static_cast<double>(current.rows()) > res.target_rows;
    if (!above && round >= opt.min_rounds.value_or(1)) break;

    RoundRecord rec;
    rec.round = round;
    rec.rows_in = current.rows();
    rec.rows_flat = current.rows();
    const ScoreVector lev = leverage_scores(current);
    rec.total_sens_est = lev.sum();

    std::optional<CalibrationResult> accepted;
    for (std::size_t attempt = 0; attempt < opt.max_retries && !accepted; ++attempt) {
      rec.attempts = attempt + 1;
      try {
        accepted = calibrate_alpha(current, lev, p, res.per_round_eps, PlanMethod::root_leverage,
                                   detail::mix_seed(seed, round, attempt), cal);
      } catch (const BudgetExhausted&) {
      }
    }
    if (!accepted) {
      res.matrix = current;
      res.trace.push_back(rec);
      throw RoundRetryExhausted("round " + std::to_string(round) + ": calibration failed in " +
                                    std::to_string(opt.max_retries) + " attempts",
                                std::move(res));
    }
    rec.alpha = accepted->alpha;
    rec.lambda_est = accepted->report.lambda_est;
    const SampleDraw& dr = accepted->draw;
    rec.rows_out = dr.size();
    if (dr.size() >= current.rows()) {
      rec.rows_out = current.rows();
      rec.lambda_est = 0.0;
      res.trace.push_back(rec);
      break;  // rows stopped decreasing
    }
    current = apply(dr, current);
    res.lineage = detail::lineage_after_draw(res.lineage, dr);
    res.trace.push_back(rec);
  }
  res.matrix = std::move(current);
  return res;
}

/// Final matrix against the input: Λ of the whole recursion.
inline DistortionReport recursive_distortion(const Matrix& a, const RecursiveResult& r, double p,
                                             std::size_t probes, std::size_t restarts,
                                             std::uint64_t seed) {
  return distortion_best(a, r.matrix, p, probes, restarts, seed);
}

}  // namespace lpcoreset
