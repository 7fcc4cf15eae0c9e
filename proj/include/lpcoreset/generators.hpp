#pragma once

// Test-matrix families: Gaussian, concatenated Vandermonde (polynomial
// feature maps), low-rank plus sparse, and small perturbations of a full-rank
// matrix. Every family is a pure function of its parameters and seed.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "lpcoreset/errors.hpp"
#include "lpcoreset/matrix.hpp"
#include "lpcoreset/random.hpp"

namespace lpcoreset {

enum class Family { gaussian, vandermonde_features, low_rank_sparse, perturbed };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::vandermonde_features: return "vandermonde";
    case Family::low_rank_sparse: return "lowrank_sparse";
    case Family::perturbed: return "perturbed";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "vandermonde" || s == "vandermonde_features") return Family::vandermonde_features;
  if (s == "lowrank_sparse" || s == "low_rank_sparse") return Family::low_rank_sparse;
  if (s == "perturbed") return Family::perturbed;
  throw InvalidArgument("unknown generator family '" + s + "'");
}

/// Parameters of a generated instance.
///   gaussian:     n × d
///   vandermonde:  features of an n × k Gaussian base matrix, degree q
///   lowrank_sparse: n × d, rank k plus s nonzeros per row
///   perturbed:    n × d Gaussian plus a perturbation at the edge of the
///                 sensitivity-stability bound for exponent p
struct GeneratorSpec {
  Family family = Family::gaussian;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t q = 0;
  std::size_t s = 0;
  double p = 2.0;
  std::uint64_t seed = 0;
};

inline Matrix gaussian_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0 || d == 0) throw InvalidArgument("gaussian_matrix: n and d must be >= 1");
  Rng rng(seed);
  Matrix a(n, d);
  for (double& v : a.data()) v = rng.normal();
  return a;
}

/// Horizontal concatenation of the degree-q Vandermonde matrices of each
/// column of A: block b, column j holds A[i,b]^j for j = 0..q.
inline Matrix vandermonde_features(const Matrix& a, std::size_t q) {
  if (q == 0) throw InvalidArgument("vandermonde_features: degree must be >= 1");
  const std::size_t k = a.cols();
  const std::size_t w = k * (q + 1);
  Matrix out(a.rows(), w);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t b = 0; b < k; ++b) {
      const double x = a(i, b);
      double pw = 1.0;
      for (std::size_t j = 0; j <= q; ++j) {
        if (!std::isfinite(pw)) {
          throw Overflow("vandermonde_features: |A[" + std::to_string(i) + "," +
                         std::to_string(b) + "]|^" + std::to_string(j) + " overflows");
        }
        out(i, b * (q + 1) + j) = pw;
        pw *= x;
      }
    }
  }
  return out;
}

struct LowRankSparse {
  Matrix sum;        // K + S
  Matrix low_rank;   // K
  Matrix sparse;     // S
};

/// K = G1·G2 with Gaussian factors of inner dimension k; S holds exactly s
/// Gaussian entries per row on a support drawn without replacement.
inline LowRankSparse low_rank_plus_sparse_parts(std::size_t n, std::size_t d, std::size_t k,
                                                std::size_t s, std::uint64_t seed) {
  if (n == 0 || d == 0) throw InvalidArgument("low_rank_plus_sparse: n and d must be >= 1");
  if (k > d || s > d) throw InvalidArgument("low_rank_plus_sparse: need k <= d and s <= d");
  Rng rng(seed);
  Matrix g1(n, k);
  Matrix g2(k, d);
  for (double& v : g1.data()) v = rng.normal();
  for (double& v : g2.data()) v = rng.normal();
  Matrix low = k > 0 ? g1 * g2 : Matrix(n, d);

  Matrix sparse(n, d);
  std::vector<std::size_t> idx(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t t = 0; t < s; ++t) {
      const std::size_t j = t + static_cast<std::size_t>(rng.below(d - t));
      std::swap(idx[t], idx[j]);
    }
    for (std::size_t t = 0; t < s; ++t) {
      double v = rng.normal();
      while (v == 0.0) v = rng.normal();
      sparse(i, idx[t]) = v;
    }
  }
  return {low + sparse, std::move(low), std::move(sparse)};
}

inline Matrix low_rank_plus_sparse(std::size_t n, std::size_t d, std::size_t k, std::size_t s,
                                   std::uint64_t seed) {
  return low_rank_plus_sparse_parts(n, d, k, s, seed).sum;
}

/// Largest perturbation norm for which 𝔖ᵖ(A+E) ≤ 2^p(𝔖ᵖ(A)+1) is guaranteed.
inline double perturbation_bound(double sigma_min, std::size_t n, double p) {
  return sigma_min / (2.0 * std::pow(static_cast<double>(n), 1.0 + 1.0 / p));
}

inline constexpr double kPerturbationFraction = 0.99;

/// A + E with E Gaussian, rescaled to spectral norm 0.99 × perturbation_bound.
inline Matrix perturb_within_bound(const Matrix& a, double p, std::uint64_t seed,
                                   double rank_tol = kDefaultRankTol) {
  const auto [smin, smax] = singular_value_range(a);
  if (a.cols() > a.rows() || !(smin > rank_tol * smax)) {
    throw RankDeficient("perturb_within_bound: matrix is not full column rank");
  }
  Matrix e = gaussian_matrix(a.rows(), a.cols(), seed);
  const double enorm = singular_value_range(e).second;
  const double target = kPerturbationFraction * perturbation_bound(smin, a.rows(), p);
  for (double& v : e.data()) v *= target / enorm;
  return a + e;
}

inline Matrix generate(const GeneratorSpec& spec) {
  switch (spec.family) {
    case Family::gaussian:
      return gaussian_matrix(spec.n, spec.d, spec.seed);
    case Family::vandermonde_features:
      return vandermonde_features(gaussian_matrix(spec.n, spec.k, spec.seed), spec.q);
    case Family::low_rank_sparse:
      return low_rank_plus_sparse(spec.n, spec.d, spec.k, spec.s, spec.seed);
    case Family::perturbed:
      return perturb_within_bound(gaussian_matrix(spec.n, spec.d, spec.seed), spec.p,
                                  spec.seed ^ 0x5bd1e995ULL);
  }
  throw InvalidArgument("unknown family");
}

}  // namespace lpcoreset
