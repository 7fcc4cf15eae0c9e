#pragma once

// Per-row importance scores: leverage scores, lp sensitivities and Lewis
// weights.
//
// The i-th lp sensitivity is the reciprocal of
//
//     min ‖A x‖_p^p   subject to   [A x](i) = 1,
//
// which is solved here in the orthonormal basis U of col(A) by iteratively
// reweighted least squares. Each step solves the weighted equality-constrained
// least-squares problem min zᵀ(UᵀWU)z s.t. uᵢᵀz = 1 in closed form,
// z = M⁻¹uᵢ / (uᵢᵀM⁻¹uᵢ), with weights W = diag(max(|r|, floor)^{p-2}).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpcoreset/errors.hpp"
#include "lpcoreset/matrix.hpp"
#include "lpcoreset/random.hpp"

namespace lpcoreset {

enum class ScoreKind { leverage, lp_sensitivity, lewis };

inline std::string to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::leverage: return "leverage";
    case ScoreKind::lp_sensitivity: return "lp_sensitivity";
    case ScoreKind::lewis: return "lewis";
  }
  return "?";
}

inline ScoreKind parse_score_kind(const std::string& s) {
  if (s == "leverage") return ScoreKind::leverage;
  if (s == "lp_sensitivity") return ScoreKind::lp_sensitivity;
  if (s == "lewis") return ScoreKind::lewis;
  throw ParseError("unknown score kind '" + s + "'");
}

struct ScoreVector {
  std::vector<double> values;
  ScoreKind kind = ScoreKind::leverage;
  double p = 2.0;
  double tol = 0.0;

  std::size_t size() const noexcept { return values.size(); }
  double sum() const noexcept { return std::accumulate(values.begin(), values.end(), 0.0); }
  double max() const noexcept {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  }
};

struct TotalSensitivity {
  double value = 0.0;
  double p = 2.0;
  std::size_t n = 0;
  std::size_t d = 0;
};

namespace detail {

/// |x|^e with cheap paths for the exponents that dominate in practice.
inline double pow_abs(double x, double e) {
  const double a = std::abs(x);
  if (e == 0.0) return 1.0;
  if (e == 1.0) return a;
  if (e == 2.0) return a * a;
  if (e == 3.0) return a * a * a;
  if (e == 4.0) return (a * a) * (a * a);
  if (e == 0.5) return std::sqrt(a);
  if (e == -1.0) return 1.0 / a;
  if (e == -0.5) return 1.0 / std::sqrt(a);
  return std::pow(a, e);
}

/// Solve the symmetric positive (semi)definite system M y = b by Cholesky,
/// falling back to the eigen pseudo-inverse when M is numerically singular.
inline std::vector<double> spd_solve(const Matrix& m, std::span<const double> b) {
  const std::size_t r = m.rows();
  Matrix l(r, r);
  bool ok = true;
  for (std::size_t j = 0; j < r && ok; ++j) {
    double s = m(j, j);
    for (std::size_t k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
    if (!(s > 1e-300)) {
      ok = false;
      break;
    }
    l(j, j) = std::sqrt(s);
    for (std::size_t i = j + 1; i < r; ++i) {
      double t = m(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= l(i, k) * l(j, k);
      l(i, j) = t / l(j, j);
    }
  }
  std::vector<double> y(b.begin(), b.end());
  if (ok) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
      y[i] /= l(i, i);
    }
    for (std::size_t i = r; i-- > 0;) {
      for (std::size_t k = i + 1; k < r; ++k) y[i] -= l(k, i) * y[k];
      y[i] /= l(i, i);
    }
    return y;
  }
  const SymmetricEigen eig = symmetric_eigen(m);
  const double cut = eig.values.back() * 1e-14;
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t k = 0; k < r; ++k) {
    if (eig.values[k] <= cut) continue;
    double c = 0.0;
    for (std::size_t i = 0; i < r; ++i) c += eig.vectors(i, k) * b[i];
    c /= eig.values[k];
    for (std::size_t i = 0; i < r; ++i) y[i] += c * eig.vectors(i, k);
  }
  return y;
}

inline double row_norm_sq(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

/// Dense solve with partial pivoting; empty when the system is singular.
inline std::optional<std::vector<double>> lu_solve(Matrix m, std::vector<double> b) {
  const std::size_t r = m.rows();
  double scale = 0.0;
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t c = 0; c < r; ++c) scale = std::max(scale, std::abs(m(a, c)));
  for (std::size_t k = 0; k < r; ++k) {
    std::size_t piv = k;
    for (std::size_t a = k + 1; a < r; ++a)
      if (std::abs(m(a, k)) > std::abs(m(piv, k))) piv = a;
    if (!(std::abs(m(piv, k)) > 1e-13 * scale)) return std::nullopt;
    if (piv != k) {
      for (std::size_t c = 0; c < r; ++c) std::swap(m(k, c), m(piv, c));
      std::swap(b[k], b[piv]);
    }
    for (std::size_t a = k + 1; a < r; ++a) {
      const double f = m(a, k) / m(k, k);
      if (f == 0.0) continue;
      for (std::size_t c = k; c < r; ++c) m(a, c) -= f * m(k, c);
      b[a] -= f * b[k];
    }
  }
  for (std::size_t k = r; k-- > 0;) {
    for (std::size_t c = k + 1; c < r; ++c) b[k] -= m(k, c) * b[c];
    b[k] /= m(k, k);
  }
  return b;
}

/// Exact p = 1 solve by walking LP vertices (r−1 zero residuals plus the
/// constraint uᵢᵀz = 1), started from the residuals `res` of an approximate
/// solution. Each pivot leaves the vertex along an edge with negative slope
/// and line-searches exactly (weighted median of breakpoints). The zero
/// targets of the basis rows are perturbed by tiny random offsets so ties
/// cannot stall the walk; the unperturbed vertex of the final basis carries
/// the same dual certificate |tⱼ| ≤ 1 and is returned. Empty if the basis
/// turns singular or the pivot cap is hit.
inline std::optional<std::vector<double>> l1_vertex_walk(const Matrix& u, std::size_t i,
                                                         std::span<const double> res) {
  const std::size_t n = u.rows();
  const std::size_t r = u.cols();

  // Initial basis: smallest residuals first, skipping rows dependent on the
  // ones already chosen.
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) order.push_back(j);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(res[a]) < std::abs(res[b]); });
  std::vector<std::vector<double>> q;  // orthonormalized span of uᵢ and the basis rows
  auto try_add = [&](std::size_t j) {
    std::vector<double> v(u.row(j).begin(), u.row(j).end());
    const double n0 = std::sqrt(detail::row_norm_sq(v));
    if (!(n0 > 0.0)) return false;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& e : q) {
        double c = 0.0;
        for (std::size_t a = 0; a < r; ++a) c += e[a] * v[a];
        for (std::size_t a = 0; a < r; ++a) v[a] -= c * e[a];
      }
    const double nv = std::sqrt(detail::row_norm_sq(v));
    if (!(nv > 1e-8 * n0)) return false;
    for (double& x : v) x /= nv;
    q.push_back(std::move(v));
    return true;
  };
  try_add(i);
  std::vector<std::size_t> basis;
  for (std::size_t j : order) {
    if (basis.size() + 1 == r) break;
    if (try_add(j)) basis.push_back(j);
  }
  if (basis.size() + 1 != r) return std::nullopt;

  std::vector<char> in_basis(n, 0);
  for (std::size_t j : basis) in_basis[j] = 1;
  Rng rng(0x11u + i);
  const double shift = 1e-9 * max_abs(res);
  std::vector<double> delta(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) delta[j] = shift * (1.0 + rng.uniform());

  const std::size_t max_pivots = 10 * n + 100;
  for (std::size_t pivot = 0; pivot <= max_pivots; ++pivot) {
    Matrix m(r, r);
    for (std::size_t k = 0; k + 1 < r; ++k)
      for (std::size_t c = 0; c < r; ++c) m(k, c) = u(basis[k], c);
    for (std::size_t c = 0; c < r; ++c) m(r - 1, c) = u(i, c);
    std::vector<double> rhs(r, 0.0);
    for (std::size_t k = 0; k + 1 < r; ++k) rhs[k] = delta[basis[k]];
    rhs[r - 1] = 1.0;
    const auto zs = lu_solve(m, rhs);
    if (!zs) return std::nullopt;
    std::vector<double> y = u.apply(*zs);
    for (std::size_t j = 0; j < n; ++j) y[j] -= delta[j];
    auto sign_of = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };

    // Dual: Σ_{j∈B} tⱼuⱼ − μuᵢ = −Σ_{j∉B} sign(yⱼ)uⱼ
    std::vector<double> g(r, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (in_basis[j]) continue;
      const double sg = sign_of(y[j]);
      if (sg == 0.0) continue;
      for (std::size_t c = 0; c < r; ++c) g[c] -= sg * u(j, c);
    }
    Matrix mt(r, r);
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t c = 0; c < r; ++c) mt(a, c) = m(c, a);
    const auto t = lu_solve(mt, g);
    if (!t) return std::nullopt;

    std::size_t leave = r;
    for (std::size_t k = 0; k + 1 < r; ++k)
      if (std::abs((*t)[k]) > 1.0 + 1e-9 && (leave == r || std::abs((*t)[k]) > std::abs((*t)[leave]))) leave = k;
    if (leave == r) {
      std::vector<double> unit(r, 0.0);
      unit[r - 1] = 1.0;
      return lu_solve(m, unit);
    }

    // Edge direction: u_leaveᵀd = sign(t), other basis rows and uᵢ stay fixed.
    std::vector<double> unit(r, 0.0);
    unit[leave] = (*t)[leave] > 0.0 ? 1.0 : -1.0;
    const auto d = lu_solve(m, unit);
    if (!d) return std::nullopt;
    const std::vector<double> e = u.apply(*d);
    const double e_tol = 1e-12 * max_abs(e);

    double slope = 1.0;
    std::vector<std::pair<double, std::size_t>> brk;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_basis[j] || j == i || std::abs(e[j]) <= e_tol) continue;
      const double sg = sign_of(y[j]);
      if (sg == 0.0) {
        slope -= std::abs(e[j]);
        brk.emplace_back(0.0, j);
      } else {
        slope += sg * e[j];
        if (sg * e[j] < 0.0) brk.emplace_back(-y[j] / e[j], j);
      }
    }
    if (!(slope < 0.0)) return std::nullopt;
    std::sort(brk.begin(), brk.end());
    std::size_t enter = n;
    for (const auto& [tb, j] : brk) {
      slope += 2.0 * std::abs(e[j]);
      if (slope >= 0.0) {
        enter = j;
        break;
      }
    }
    if (enter == n) return std::nullopt;
    in_basis[basis[leave]] = 0;
    basis[leave] = enter;
    in_basis[enter] = 1;
  }
  return std::nullopt;
}

/// M = Uᵀ diag(w) U
inline Matrix weighted_gram(const Matrix& u, std::span<const double> w) {
  const std::size_t r = u.cols();
  Matrix m(r, r);
  for (std::size_t j = 0; j < u.rows(); ++j) {
    const double wj = w[j];
    if (wj == 0.0) continue;
    auto row = u.row(j);
    for (std::size_t a = 0; a < r; ++a) {
      const double t = wj * row[a];
      for (std::size_t b = a; b < r; ++b) m(a, b) += t * row[b];
    }
  }
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = 0; b < a; ++b) m(a, b) = m(b, a);
  return m;
}

}  // namespace detail

inline constexpr double kZeroRowNorm = 1e-14;
inline constexpr double kDefaultSensitivityTol = 1e-8;
inline constexpr int kIrlsMaxIter = 500;
inline constexpr int kMaxStepHalvings = 30;
inline constexpr int kL1WarmStartIter = 20;

/// Outcome of one constrained lp minimization.
struct SensitivitySolve {
  double sensitivity = 0.0;        // 1 / objective, clamped to [0, 1]
  double objective = 0.0;          // ‖Uz‖_p^p at the returned z
  std::vector<double> z;           // minimizer in basis coordinates, uᵢᵀz = 1
  int iterations = 0;
};

/// Relative KKT stationarity residual of min ‖Uz‖_p^p s.t. uᵢᵀz = 1 at z:
/// the component of the gradient orthogonal to the constraint normal uᵢ,
/// divided by the gradient norm.
inline double irls_kkt_residual(const Matrix& u, std::size_t i, double p,
                                std::span<const double> z) {
  const std::size_t r = u.cols();
  const std::vector<double> y = u.apply(z);
  std::vector<double> g(r, 0.0);
  for (std::size_t j = 0; j < u.rows(); ++j) {
    const double yj = y[j];
    if (yj == 0.0) continue;
    const double c = (yj > 0 ? 1.0 : -1.0) * detail::pow_abs(yj, p - 1.0);
    auto row = u.row(j);
    for (std::size_t a = 0; a < r; ++a) g[a] += c * row[a];
  }
  auto ui = u.row(i);
  const double uu = detail::row_norm_sq(ui);
  double gu = 0.0;
  for (std::size_t a = 0; a < r; ++a) gu += g[a] * ui[a];
  double res = 0.0;
  double gn = 0.0;
  for (std::size_t a = 0; a < r; ++a) {
    const double t = g[a] - gu / uu * ui[a];
    res += t * t;
    gn += g[a] * g[a];
  }
  return gn > 0.0 ? std::sqrt(res / gn) : 0.0;
}

/// Solves the i-th sensitivity problem in the orthonormal basis `u`.
///
/// Steps for p > 2 are damped to η = 1/(p−1), which is the constrained Newton
/// step for ‖Uz‖_p^p; η is halved while the objective increases.
inline SensitivitySolve solve_sensitivity(const Matrix& u, std::size_t i, double p,
                                          double tol = kDefaultSensitivityTol,
                                          int max_iter = kIrlsMaxIter) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("sensitivity requires finite p >= 1");
  if (i >= u.rows()) throw InvalidArgument("row index out of range");
  const std::size_t n = u.rows();
  const std::size_t r = u.cols();
  auto ui = u.row(i);
  const double uu = detail::row_norm_sq(ui);
  SensitivitySolve out;
  if (std::sqrt(uu) < kZeroRowNorm) {
    out.z.assign(r, 0.0);
    return out;
  }

  // ℓ2 solution as the starting point.
  std::vector<double> z(ui.begin(), ui.end());
  for (double& v : z) v /= uu;
  std::vector<double> res = u.apply(z);
  auto objective_of = [&](std::span<const double> y) { return lp_norm_pow(y, p); };
  double f = objective_of(res);

  const double eta0 = p > 2.0 ? 1.0 / (p - 1.0) : 1.0;
  std::vector<double> w(n);
  std::vector<double> z_try(r);
  int it = 0;
  bool converged = (p == 2.0);
  for (; it < max_iter && !converged; ++it) {
    const double floor = 1e-12 * max_abs(res);
    for (std::size_t j = 0; j < n; ++j)
      w[j] = detail::pow_abs(std::max(std::abs(res[j]), floor), p - 2.0);
    const Matrix m = detail::weighted_gram(u, w);
    std::vector<double> y = detail::spd_solve(m, ui);
    double denom = 0.0;
    for (std::size_t a = 0; a < r; ++a) denom += ui[a] * y[a];
    if (!(denom > 0.0)) break;
    for (double& v : y) v /= denom;

    double eta = eta0;
    double f_try = f;
    std::vector<double> res_try;
    bool improved = false;
    for (int h = 0; h <= kMaxStepHalvings; ++h) {
      for (std::size_t a = 0; a < r; ++a) z_try[a] = z[a] + eta * (y[a] - z[a]);
      res_try = u.apply(z_try);
      f_try = objective_of(res_try);
      if (f_try <= f) {
        improved = true;
        break;
      }
      eta *= 0.5;
    }
    if (!improved) {
      converged = true;  // no descent available at working precision
      break;
    }
    const double change = (f - f_try) / f;
    z = z_try;
    res = std::move(res_try);
    f = f_try;
    if (change < tol) converged = true;
    if (p == 1.0 && ((it + 1) % kL1WarmStartIter == 0 || converged)) {
      if (auto zv = detail::l1_vertex_walk(u, i, res)) {
        std::vector<double> rv = u.apply(*zv);
        const double fv = objective_of(rv);
        if (fv <= f * (1.0 + 1e-12)) {
          z = std::move(*zv);
          res = std::move(rv);
          f = fv;
          converged = true;
        }
      }
    }
  }
  out.iterations = it;
  out.objective = f;
  out.z = std::move(z);
  out.sensitivity = std::clamp(1.0 / f, 0.0, 1.0);
  if (!converged) {
    throw NoConvergence("sensitivity IRLS hit the iteration cap", out.sensitivity, f,
                        static_cast<long>(i));
  }
  return out;
}

/// τᵢ = ‖eᵢᵀU‖²
inline ScoreVector leverage_scores(const OrthonormalBasis& basis) {
  ScoreVector s{std::vector<double>(basis.U.rows()), ScoreKind::leverage, 2.0, 0.0};
  for (std::size_t i = 0; i < basis.U.rows(); ++i)
    s.values[i] = std::min(1.0, detail::row_norm_sq(basis.U.row(i)));
  return s;
}

inline ScoreVector leverage_scores(const Matrix& a, double rank_tol = kDefaultRankTol) {
  return leverage_scores(orthonormal_basis(a, rank_tol));
}

inline double lp_sensitivity_row(const OrthonormalBasis& basis, std::size_t i, double p,
                                 double tol = kDefaultSensitivityTol) {
  return solve_sensitivity(basis.U, i, p, tol).sensitivity;
}

inline double lp_sensitivity_row(const Matrix& a, std::size_t i, double p,
                                 double tol = kDefaultSensitivityTol) {
  return lp_sensitivity_row(orthonormal_basis(a), i, p, tol);
}

inline ScoreVector lp_sensitivities(const OrthonormalBasis& basis, double p,
                                    double tol = kDefaultSensitivityTol) {
  ScoreVector s{std::vector<double>(basis.U.rows()), ScoreKind::lp_sensitivity, p, tol};
  for (std::size_t i = 0; i < basis.U.rows(); ++i)
    s.values[i] = solve_sensitivity(basis.U, i, p, tol).sensitivity;
  return s;
}

inline ScoreVector lp_sensitivities(const Matrix& a, double p,
                                    double tol = kDefaultSensitivityTol) {
  return lp_sensitivities(orthonormal_basis(a), p, tol);
}

inline TotalSensitivity total_sensitivity(const ScoreVector& s, std::size_t d = 0) {
  if (s.kind == ScoreKind::lewis) throw InvalidArgument("total_sensitivity: Lewis weights are not sensitivities");
  return {s.sum(), s.p, s.size(), d};
}

/// Convenience: 𝔖ᵖ(A) from freshly computed scores (leverage scores when p = 2).
inline double total_sensitivity_of(const Matrix& a, double p,
                                   double tol = kDefaultSensitivityTol) {
  const OrthonormalBasis basis = orthonormal_basis(a);
  if (p == 2.0) return leverage_scores(basis).sum();
  return lp_sensitivities(basis, p, tol).sum();
}

/// Lewis weights for 1 ≤ p < 4 by the fixed-point iteration
/// wᵢ ← (uᵢᵀ(Uᵀ W^{1−2/p} U)⁻¹uᵢ)^{p/2}, started from all ones.
inline ScoreVector lewis_weights(const Matrix& a, double p, double tol = 1e-10,
                                 int max_iter = 2000) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("lewis_weights requires p >= 1");
  if (p >= 4.0) throw UnsupportedExponent(p);
  const OrthonormalBasis basis = orthonormal_basis(a);
  const Matrix& u = basis.U;
  const std::size_t n = u.rows();
  const std::size_t r = u.cols();
  std::vector<bool> zero_row(n);
  for (std::size_t i = 0; i < n; ++i)
    zero_row[i] = std::sqrt(detail::row_norm_sq(u.row(i))) < kZeroRowNorm;

  std::vector<double> w(n, 1.0);
  std::vector<double> scale(n);
  const double expo = 1.0 - 2.0 / p;
  double resid = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) scale[i] = zero_row[i] ? 0.0 : std::pow(w[i], expo);
    const Matrix m = detail::weighted_gram(u, scale);
    const Matrix minv = [&] {
      Matrix inv(r, r);
      std::vector<double> e(r);
      for (std::size_t c = 0; c < r; ++c) {
        std::fill(e.begin(), e.end(), 0.0);
        e[c] = 1.0;
        auto col = detail::spd_solve(m, e);
        for (std::size_t k = 0; k < r; ++k) inv(k, c) = col[k];
      }
      return inv;
    }();
    resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (zero_row[i]) {
        w[i] = 0.0;
        continue;
      }
      auto ui = u.row(i);
      double q = 0.0;
      for (std::size_t x = 0; x < r; ++x) {
        double t = 0.0;
        for (std::size_t y = 0; y < r; ++y) t += minv(x, y) * ui[y];
        q += ui[x] * t;
      }
      const double next = std::pow(std::max(q, 0.0), p / 2.0);
      if (next > 0.0) resid = std::max(resid, std::abs(next - w[i]) / next);
      w[i] = next;
    }
    if (resid <= tol) break;
  }
  if (resid > tol) throw NoConvergence("Lewis weight iteration hit the iteration cap", resid, resid);
  for (double& v : w) v = std::min(v, 1.0);
  return {std::move(w), ScoreKind::lewis, p, tol};
}

}  // namespace lpcoreset
