#pragma once

// Sampling-error estimation and empirical checks of the sensitivity bounds.
//
// The sampling error of B relative to A is
//
//     Λ = sup_{Ax ≠ 0} | ‖Bx‖_p^p / ‖Ax‖_p^p − 1 |.
//
// For p = 2 it is read off the extreme eigenvalues of (BX)ᵀ(BX), where X maps
// orthonormal-basis coordinates of col(A) to source coordinates. For other p
// only lower bounds are available: random probes followed by projected
// gradient ascent of the ratio on the unit sphere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lpcoreset/errors.hpp"
#include "lpcoreset/generators.hpp"
#include "lpcoreset/matrix.hpp"
#include "lpcoreset/random.hpp"
#include "lpcoreset/sampling.hpp"
#include "lpcoreset/scores.hpp"

namespace lpcoreset {

enum class DistortionMethod { exact_l2, probe, optimize };

inline std::string to_string(DistortionMethod m) {
  switch (m) {
    case DistortionMethod::exact_l2: return "exact_l2";
    case DistortionMethod::probe: return "probe";
    case DistortionMethod::optimize: return "optimize";
  }
  return "?";
}

inline DistortionMethod parse_distortion_method(const std::string& s) {
  if (s == "exact_l2") return DistortionMethod::exact_l2;
  if (s == "probe") return DistortionMethod::probe;
  if (s == "optimize") return DistortionMethod::optimize;
  throw ParseError("unknown distortion method '" + s + "'");
}

struct DistortionReport {
  double lambda_lower = 0.0;  // certified by the witness
  double lambda_est = 0.0;    // best estimate; ≥ lambda_lower
  std::vector<double> witness;
  DistortionMethod method = DistortionMethod::probe;
  std::size_t probes = 0;
  std::size_t restarts = 0;
};

/// |‖Bx‖_p^p / ‖Ax‖_p^p − 1|, the value a witness certifies.
inline double witness_distortion(const Matrix& a, const Matrix& b, std::span<const double> x, double p) {
  const double den = lp_norm_pow(a.apply(x), p);
  if (!(den > 0.0)) return 0.0;
  const std::vector<double> bx = b.rows() ? b.apply(x) : std::vector<double>{};
  return std::abs(lp_norm_pow(bx, p) / den - 1.0);
}

namespace detail {

/// B·X where X (d × r) maps basis coordinates z to x with Ax = Uz.
inline Matrix in_basis_coordinates(const OrthonormalBasis& basis, const Matrix& b) {
  if (b.cols() != basis.source_cols) throw ShapeMismatch("distortion: column counts differ");
  Matrix x(basis.source_cols, basis.rank);
  std::vector<double> e(basis.rank);
  for (std::size_t j = 0; j < basis.rank; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    const auto col = basis.to_source(e);
    for (std::size_t i = 0; i < basis.source_cols; ++i) x(i, j) = col[i];
  }
  return b.rows() ? b * x : Matrix(0, basis.rank);
}

/// Ratio R(z) = ‖Bz z‖_p^p / ‖U z‖_p^p and its gradient.
struct RatioObjective {
  const Matrix& u;
  const Matrix& bz;
  double p;

  double value(std::span<const double> z) const {
    const double den = lp_norm_pow(u.apply(z), p);
    if (!(den > 0.0)) return 1.0;
    const double num = bz.rows() ? lp_norm_pow(bz.apply(z), p) : 0.0;
    return num / den;
  }

  double value_and_gradient(std::span<const double> z, std::vector<double>& g) const {
    const std::size_t r = z.size();
    g.assign(r, 0.0);
    const std::vector<double> uy = u.apply(z);
    const double den = lp_norm_pow(uy, p);
    if (!(den > 0.0)) return 1.0;
    std::vector<double> gn(r, 0.0);
    std::vector<double> gd(r, 0.0);
    double num = 0.0;
    if (bz.rows()) {
      const std::vector<double> by = bz.apply(z);
      num = lp_norm_pow(by, p);
      accumulate(bz, by, gn);
    }
    accumulate(u, uy, gd);
    const double ratio = num / den;
    for (std::size_t a = 0; a < r; ++a) g[a] = p * (gn[a] - ratio * gd[a]) / den;
    return ratio;
  }

  void accumulate(const Matrix& m, const std::vector<double>& y, std::vector<double>& g) const {
    for (std::size_t j = 0; j < m.rows(); ++j) {
      const double yj = y[j];
      if (yj == 0.0) continue;  // subgradient 0 at the kink
      const double c = (yj > 0 ? 1.0 : -1.0) * pow_abs(yj, p - 1.0);
      auto row = m.row(j);
      for (std::size_t a = 0; a < g.size(); ++a) g[a] += c * row[a];
    }
  }
};

inline void normalize(std::vector<double>& z) {
  const double n = lp_norm(z, 2.0);
  if (n > 0.0)
    for (double& v : z) v /= n;
}

inline std::vector<double> random_unit(Rng& rng, std::size_t r) {
  std::vector<double> z(r);
  for (double& v : z) v = rng.normal();
  normalize(z);
  if (lp_norm(z, 2.0) == 0.0) z[0] = 1.0;
  return z;
}

/// Projected gradient ascent of sign·R(z) on the unit sphere with
/// Barzilai-Borwein trial steps and Armijo backtracking.
inline std::vector<double> ascend(const RatioObjective& obj, std::vector<double> z, double sign,
                                  int max_iter = 200, double grad_tol = 1e-8) {
  std::vector<double> g;
  std::vector<double> g_prev;
  std::vector<double> z_prev;
  double f = sign * obj.value_and_gradient(z, g);
  double step = 1.0;
  int stalled = 0;
  const std::size_t r = z.size();
  for (int it = 0; it < max_iter; ++it) {
    // Tangential component (R is 0-homogeneous so g ⟂ z up to rounding).
    double gz = 0.0;
    for (std::size_t a = 0; a < r; ++a) gz += g[a] * z[a];
    std::vector<double> t(r);
    double tn2 = 0.0;
    for (std::size_t a = 0; a < r; ++a) {
      t[a] = sign * (g[a] - gz * z[a]);
      tn2 += t[a] * t[a];
    }
    if (std::sqrt(tn2) < grad_tol) break;
    if (it > 0) {
      double ss = 0.0;
      double sy = 0.0;
      for (std::size_t a = 0; a < r; ++a) {
        const double s = z[a] - z_prev[a];
        const double y = sign * (g[a] - g_prev[a]);
        ss += s * s;
        sy += s * y;
      }
      if (sy < 0.0) step = std::clamp(ss / -sy, 1e-8, 1e8);
      else step = std::min(step * 4.0, 1e8);
    }
    bool accepted = false;
    std::vector<double> zn(r);
    for (int h = 0; h < 60; ++h) {
      for (std::size_t a = 0; a < r; ++a) zn[a] = z[a] + step * t[a];
      normalize(zn);
      const double fn = sign * obj.value(zn);
      if (fn >= f + 1e-4 * step * tn2 || (h > 40 && fn > f)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    z_prev = z;
    g_prev = g;
    z = zn;
    const double f_old = f;
    f = sign * obj.value_and_gradient(z, g);
    stalled = (f - f_old <= 1e-14 * std::abs(f)) ? stalled + 1 : 0;
    if (stalled >= 3) break;
  }
  return z;
}

}  // namespace detail

/// Exact Λ for p = 2 between A and an arbitrary B over the same columns.
inline DistortionReport distortion_exact_l2(const Matrix& a, const Matrix& b) {
  const OrthonormalBasis basis = orthonormal_basis(a);
  const Matrix bz = detail::in_basis_coordinates(basis, b);
  Matrix m = bz.rows() ? gram(bz) : Matrix(basis.rank, basis.rank);
  const SymmetricEigen eig = symmetric_eigen(m);
  const double lo = eig.values.front();
  const double hi = eig.values.back();
  const std::size_t pick = (hi - 1.0 >= 1.0 - lo) ? basis.rank - 1 : 0;
  std::vector<double> z(basis.rank);
  for (std::size_t i = 0; i < basis.rank; ++i) z[i] = eig.vectors(i, pick);
  DistortionReport rep;
  rep.method = DistortionMethod::exact_l2;
  rep.witness = basis.to_source(z);
  rep.lambda_lower = witness_distortion(a, b, rep.witness, 2.0);
  rep.lambda_est = std::max(std::max(hi - 1.0, 1.0 - lo), rep.lambda_lower);
  return rep;
}

inline DistortionReport distortion_exact_l2(const Matrix& a, const SampleDraw& dr) {
  if (dr.p != 2.0) throw InvalidArgument("distortion_exact_l2 requires a p = 2 draw");
  return distortion_exact_l2(a, apply(dr, a));
}

/// Lower bound on Λ: `probes` random directions, then `restarts` ascent runs
/// for each sign of the deviation. Restart 0 begins at the best probe.
inline DistortionReport distortion_estimate(const Matrix& a, const Matrix& b, double p,
                                            std::size_t probes, std::size_t restarts,
                                            std::uint64_t seed) {
  if (!(p >= 1.0)) throw InvalidArgument("distortion_estimate requires p >= 1");
  const OrthonormalBasis basis = orthonormal_basis(a);
  const Matrix bz = detail::in_basis_coordinates(basis, b);
  const detail::RatioObjective obj{basis.U, bz, p};
  const std::size_t r = basis.rank;
  Rng rng(seed);

  double best_dev = -1.0;
  std::vector<double> best_z(r, 0.0);
  std::vector<double> best_hi_z;
  std::vector<double> best_lo_z;
  double best_hi = -std::numeric_limits<double>::infinity();
  double best_lo = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<double>& z) {
    const double ratio = obj.value(z);
    const double dev = std::abs(ratio - 1.0);
    if (dev > best_dev) {
      best_dev = dev;
      best_z = z;
    }
    if (ratio > best_hi) {
      best_hi = ratio;
      best_hi_z = z;
    }
    if (ratio < best_lo) {
      best_lo = ratio;
      best_lo_z = z;
    }
  };
  // Coordinate directions first; they are cheap and often extremal for sparse B.
  for (std::size_t j = 0; j < r && j < probes; ++j) {
    std::vector<double> z(r, 0.0);
    z[j] = 1.0;
    consider(z);
  }
  for (std::size_t k = r; k < probes; ++k) consider(detail::random_unit(rng, r));

  for (std::size_t k = 0; k < restarts; ++k) {
    std::vector<double> start_hi = (k == 0 && !best_hi_z.empty()) ? best_hi_z : detail::random_unit(rng, r);
    std::vector<double> start_lo = (k == 0 && !best_lo_z.empty()) ? best_lo_z : detail::random_unit(rng, r);
    consider(detail::ascend(obj, std::move(start_hi), +1.0));
    consider(detail::ascend(obj, std::move(start_lo), -1.0));
  }

  DistortionReport rep;
  rep.method = restarts > 0 ? DistortionMethod::optimize : DistortionMethod::probe;
  rep.probes = probes;
  rep.restarts = restarts;
  if (best_dev < 0.0) {
    best_z.assign(r, 0.0);
    best_z[0] = 1.0;
  }
  rep.witness = basis.to_source(best_z);
  rep.lambda_lower = witness_distortion(a, b, rep.witness, p);
  rep.lambda_est = rep.lambda_lower;
  return rep;
}

inline DistortionReport distortion_estimate(const Matrix& a, const SampleDraw& dr,
                                            std::size_t probes, std::size_t restarts,
                                            std::uint64_t seed) {
  return distortion_estimate(a, apply(dr, a), dr.p, probes, restarts, seed);
}

/// Exact evaluation for p = 2, the estimator otherwise.
inline DistortionReport distortion_best(const Matrix& a, const Matrix& b, double p,
                                        std::size_t probes, std::size_t restarts,
                                        std::uint64_t seed) {
  if (p == 2.0) return distortion_exact_l2(a, b);
  return distortion_estimate(a, b, p, probes, restarts, seed);
}

struct EmbeddingCheck {
  bool pass = false;
  DistortionReport report;
};

/// ‖SAx‖_p^p = (1 ± ε)‖Ax‖_p^p, judged by the estimated Λ.
inline EmbeddingCheck check_embedding(const Matrix& a, const SampleDraw& dr, double p, double eps,
                                      std::size_t probes, std::size_t restarts,
                                      std::uint64_t seed) {
  if (dr.p != p) throw InvalidArgument("check_embedding: draw exponent differs from p");
  EmbeddingCheck out;
  out.report = distortion_estimate(a, dr, probes, restarts, seed);
  out.pass = out.report.lambda_est <= eps;
  return out;
}

// ---------------------------------------------------------------------------
// Inequality checks
// ---------------------------------------------------------------------------

inline constexpr double kCheckSlack = 1e-10;

struct MonotonicityCheck {
  bool pass = false;
  double ratio_p = 0.0;        // ‖y‖_∞^p / ‖y‖_p^p
  double ratio_q = 0.0;        // ‖y‖_∞^q / ‖y‖_q^q
  double reverse_bound = 0.0;  // ratio_p^{q/p} n^{q/p − 1}
};

/// Forward and reverse monotonicity of the max-coordinate share in p.
inline MonotonicityCheck check_vector_monotonicity(std::span<const double> y, double p, double q) {
  if (!(q >= p && p > 0.0)) throw InvalidArgument("check_vector_monotonicity: need q >= p > 0");
  const double m = max_abs(y);
  if (m == 0.0) throw InvalidArgument("check_vector_monotonicity: y must be nonzero");
  // Ratios computed on y/‖y‖_∞, which leaves them unchanged.
  double sp = 0.0;
  double sq = 0.0;
  for (double v : y) {
    const double t = std::abs(v) / m;
    sp += std::pow(t, p);
    sq += std::pow(t, q);
  }
  MonotonicityCheck out;
  out.ratio_p = 1.0 / sp;
  out.ratio_q = 1.0 / sq;
  out.reverse_bound =
      std::pow(out.ratio_p, q / p) * std::pow(static_cast<double>(y.size()), q / p - 1.0);
  out.pass = out.ratio_p <= out.ratio_q + kCheckSlack && out.ratio_q <= out.reverse_bound + kCheckSlack;
  return out;
}

struct BoundCheck {
  bool pass = false;
  double value = 0.0;
  double bound = 0.0;
};

/// Lower bound on total sensitivity of a full-rank matrix:
/// d/2 for p > 2 and d^{p/2}/2 for p < 2 (d for p = 2, where it is exact).
inline double total_sensitivity_lower_bound(std::size_t d, double p) {
  const double dd = static_cast<double>(d);
  if (p > 2.0) return dd / 2.0;
  if (p < 2.0) return std::pow(dd, p / 2.0) / 2.0;
  return dd;
}

inline void require_full_rank(const Matrix& a) {
  const OrthonormalBasis basis = orthonormal_basis(a);
  if (basis.rank < a.cols()) {
    throw RankDeficient("matrix has rank " + std::to_string(basis.rank) + " < " +
                        std::to_string(a.cols()) + " columns");
  }
}

inline BoundCheck check_total_sens_bounds(const Matrix& a, double p,
                                          double tol = kDefaultSensitivityTol) {
  require_full_rank(a);
  BoundCheck out;
  out.value = total_sensitivity_of(a, p, tol);
  out.bound = total_sensitivity_lower_bound(a.cols(), p);
  out.pass = out.value >= out.bound - 1e-9;
  return out;
}

/// 𝔖ᵖ(A+E) ≤ 2^p(𝔖ᵖ(A)+1) for E from perturb_within_bound.
inline BoundCheck check_perturbation_bound(const Matrix& a, double p, std::uint64_t seed,
                                           double tol = kDefaultSensitivityTol) {
  require_full_rank(a);
  const Matrix perturbed = perturb_within_bound(a, p, seed);
  BoundCheck out;
  out.value = total_sensitivity_of(perturbed, p, tol);
  out.bound = std::pow(2.0, p) * (total_sensitivity_of(a, p, tol) + 1.0);
  out.pass = out.value <= out.bound * (1.0 + 1e-6);
  return out;
}

inline constexpr double kGaussianSensSlack = 10.0;

/// 𝔖ᵖ(G) ≤ slack·(d·ln(d+1))^{p/2} for an n × d standard Gaussian G, 1 ≤ p < 2.
inline BoundCheck check_gaussian_small_sens(std::size_t n, std::size_t d, double p,
                                            std::uint64_t seed, double slack = kGaussianSensSlack,
                                            double tol = kDefaultSensitivityTol) {
  if (!(p >= 1.0 && p < 2.0)) throw ExponentOutOfRange(p, "[1, 2)");
  if (n < 256 * d) throw InvalidArgument("check_gaussian_small_sens: need n >= 256 d");
  BoundCheck out;
  out.value = total_sensitivity_of(gaussian_matrix(n, d, seed), p, tol);
  out.bound = slack * std::pow(static_cast<double>(d) * std::log(static_cast<double>(d) + 1.0), p / 2.0);
  out.pass = out.value <= out.bound;
  return out;
}

}  // namespace lpcoreset
