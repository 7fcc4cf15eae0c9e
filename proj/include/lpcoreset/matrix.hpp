#pragma once

// Dense row-major matrices and the handful of exact kernels the rest of the
// library is built on: pivoted Householder QR, a cyclic Jacobi symmetric
// eigensolver, Gram pseudo-inverses and overflow-safe lp norms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lpcoreset/errors.hpp"

namespace lpcoreset {

inline constexpr double kDefaultRankTol = 1e-10;

/// Dense real matrix stored row-major. Entries are always finite.
///
/// A matrix with zero rows is representable; it arises as the image of an
/// empty sample and carries its column count.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeMismatch("entry count " + std::to_string(data_.size()) +
                          " != rows*cols " + std::to_string(rows_ * cols_));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw InvalidArgument("matrix entry is not finite");
    }
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeMismatch("ragged initializer rows");
      for (double v : r) {
        if (!std::isfinite(v)) throw InvalidArgument("matrix entry is not finite");
        data_.push_back(v);
      }
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix ones(std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols, 1.0);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_zero() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  /// y = A x
  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != cols_) throw ShapeMismatch("matrix-vector product: bad length");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = data_.data() + i * cols_;
      double s = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) s += r[j] * x[j];
      y[i] = s;
    }
    return y;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("matrix product: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("matrix sum: shapes differ");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("matrix difference: shapes differ");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

/// AᵀA
inline Matrix gram(const Matrix& a) {
  const std::size_t d = a.cols();
  Matrix g(d, d);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (r[j] == 0.0) continue;
      for (std::size_t k = j; k < d; ++k) g(j, k) += r[j] * r[k];
    }
  }
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < j; ++k) g(j, k) = g(k, j);
  return g;
}

inline double max_abs(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// (Σ|vᵢ|^p)^{1/p}, rescaled by the largest magnitude so neither the powers
/// nor the sum overflow.
inline double lp_norm(std::span<const double> v, double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("lp_norm requires finite p >= 1");
  const double m = max_abs(v);
  if (m == 0.0) return 0.0;
  double s = 0.0;
  if (p == 2.0) {
    for (double x : v) {
      const double t = x / m;
      s += t * t;
    }
    return m * std::sqrt(s);
  }
  if (p == 1.0) {
    for (double x : v) s += std::abs(x);
    return s;
  }
  for (double x : v) s += std::pow(std::abs(x) / m, p);
  return m * std::pow(s, 1.0 / p);
}

/// Σ|vᵢ|^p without the root. May overflow for huge entries; callers in this
/// library work with normalized data.
inline double lp_norm_pow(std::span<const double> v, double p) {
  double s = 0.0;
  if (p == 2.0) {
    for (double x : v) s += x * x;
  } else if (p == 1.0) {
    for (double x : v) s += std::abs(x);
  } else {
    for (double x : v) s += std::pow(std::abs(x), p);
  }
  return s;
}

/// Eigen-decomposition of a symmetric matrix: values ascending, vectors in the
/// matching columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

/// Cyclic Jacobi rotations. Intended for the small (d×d) Gram-type matrices
/// used throughout; cost is O(d³) per sweep.
inline SymmetricEigen symmetric_eigen(const Matrix& s, int max_sweeps = 100) {
  const std::size_t n = s.rows();
  if (s.cols() != n) throw ShapeMismatch("symmetric_eigen: matrix is not square");
  Matrix a = s;
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off == 0.0 || off <= 1e-36 * diag) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

/// Orthonormal basis for the column space of a matrix, together with the
/// triangular factor needed to map basis coordinates back to the source
/// coordinates: A·to_source(z) = U·z.
struct OrthonormalBasis {
  Matrix U;
  std::size_t rank = 0;
  std::size_t source_cols = 0;
  std::vector<std::size_t> perm;  // pivot order of source columns
  Matrix R;                       // rank × source_cols, columns in pivot order

  /// Returns x with A x = U z (exact up to the discarded trailing block).
  std::vector<double> to_source(std::span<const double> z) const {
    if (z.size() != rank) throw ShapeMismatch("to_source: coordinate length != rank");
    std::vector<double> y(rank);
    for (std::size_t i = rank; i-- > 0;) {
      double s = z[i];
      for (std::size_t j = i + 1; j < rank; ++j) s -= R(i, j) * y[j];
      y[i] = s / R(i, i);
    }
    std::vector<double> x(source_cols, 0.0);
    for (std::size_t j = 0; j < rank; ++j) x[perm[j]] = y[j];
    return x;
  }
};

/// Householder QR with column pivoting. Columns are accepted while the pivot
/// norm is at least rank_tol times the first (largest) pivot norm.
inline OrthonormalBasis orthonormal_basis(const Matrix& a, double rank_tol = kDefaultRankTol) {
  if (!(rank_tol > 0.0)) throw InvalidArgument("rank_tol must be positive");
  if (a.empty() || a.all_zero()) throw AllZeroMatrix();
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();
  const std::size_t kmax = std::min(n, d);

  // Column-major working copy.
  std::vector<std::vector<double>> col(d, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) col[j][i] = a(i, j);

  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<double>> reflectors;
  std::vector<double> diag;
  double first_pivot = 0.0;
  std::size_t rank = 0;

  for (std::size_t k = 0; k < kmax; ++k) {
    std::size_t best = k;
    double best_norm = -1.0;
    for (std::size_t j = k; j < d; ++j) {
      const double nj = lp_norm(std::span<const double>(col[j]).subspan(k), 2.0);
      if (nj > best_norm) {
        best_norm = nj;
        best = j;
      }
    }
    if (k == 0) first_pivot = best_norm;
    if (best_norm <= rank_tol * first_pivot || best_norm == 0.0) break;
    std::swap(col[k], col[best]);
    std::swap(perm[k], perm[best]);

    std::vector<double> v(col[k].begin() + static_cast<std::ptrdiff_t>(k), col[k].end());
    const double alpha = v[0] >= 0 ? -best_norm : best_norm;
    v[0] -= alpha;
    const double vnorm = lp_norm(v, 2.0);
    if (vnorm > 0.0) {
      for (double& x : v) x /= vnorm;
      for (std::size_t j = k; j < d; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * col[j][k + i];
        for (std::size_t i = 0; i < v.size(); ++i) col[j][k + i] -= 2.0 * dot * v[i];
      }
    }
    reflectors.push_back(std::move(v));
    diag.push_back(col[k][k]);
    ++rank;
  }

  OrthonormalBasis out;
  out.rank = rank;
  out.source_cols = d;
  out.perm = perm;
  out.R = Matrix(rank, d);
  for (std::size_t i = 0; i < rank; ++i)
    for (std::size_t j = i; j < d; ++j) out.R(i, j) = col[j][i];

  // Q e_j for j < rank, by applying reflectors in reverse.
  out.U = Matrix(n, rank);
  std::vector<double> e(n);
  for (std::size_t j = 0; j < rank; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    for (std::size_t k = rank; k-- > 0;) {
      const auto& v = reflectors[k];
      double dot = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * e[k + i];
      for (std::size_t i = 0; i < v.size(); ++i) e[k + i] -= 2.0 * dot * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) out.U(i, j) = e[i];
  }
  return out;
}

/// Pseudo-inverse of AᵀA via its eigen-decomposition. Eigenvalues below
/// max(rank_tol², 64·ε)·λ_max are treated as zero.
inline Matrix gram_pinv(const Matrix& a, double rank_tol = kDefaultRankTol) {
  if (!(rank_tol > 0.0)) throw InvalidArgument("rank_tol must be positive");
  if (a.empty() || a.all_zero()) throw AllZeroMatrix();
  const std::size_t d = a.cols();
  const Matrix g = gram(a);
  const SymmetricEigen eig = symmetric_eigen(g);
  const double lmax = eig.values.back();
  const double cut =
      lmax * std::max(rank_tol * rank_tol, 64.0 * std::numeric_limits<double>::epsilon());
  Matrix out(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    const double lam = eig.values[k];
    if (lam <= cut) continue;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out(i, j) += eig.vectors(i, k) * eig.vectors(j, k) / lam;
  }
  return out;
}

/// Extreme singular values of A from the eigenvalues of AᵀA.
inline std::pair<double, double> singular_value_range(const Matrix& a) {
  const SymmetricEigen eig = symmetric_eigen(gram(a));
  return {std::sqrt(std::max(0.0, eig.values.front())),
          std::sqrt(std::max(0.0, eig.values.back()))};
}

/// Spectral norm by power iteration on AᵀA, stopping at the given relative
/// change of the estimate.
inline double spectral_norm(const Matrix& a, double rel_tol = 1e-6, int max_iter = 10000) {
  const std::size_t d = a.cols();
  if (a.empty()) return 0.0;
  std::vector<double> x(d);
  // Deterministic start with no special alignment.
  for (std::size_t j = 0; j < d; ++j) x[j] = 1.0 + 0.1 * static_cast<double>(j % 7);
  double prev = 0.0;
  double est = 0.0;
  const Matrix g = gram(a);
  for (int it = 0; it < max_iter; ++it) {
    const double nx = lp_norm(x, 2.0);
    if (nx == 0.0) return 0.0;
    for (double& v : x) v /= nx;
    std::vector<double> y = g.apply(x);
    double lam = 0.0;
    for (std::size_t j = 0; j < d; ++j) lam += x[j] * y[j];
    est = std::sqrt(std::max(0.0, lam));
    x = std::move(y);
    if (it > 0 && std::abs(est - prev) <= rel_tol * 1e-3 * est) break;
    prev = est;
  }
  return est;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// One row per line, comma-separated, no header. Ragged rows are rejected.
inline Matrix parse_csv(const std::string& text) {
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string field =
          line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(lineno) + ": bad number '" + field + "'");
      }
      while (used < field.size() && (field[used] == ' ' || field[used] == '\t')) ++used;
      if (used != field.size())
        throw ParseError("line " + std::to_string(lineno) + ": bad number '" + field + "'");
      if (!std::isfinite(v)) throw ParseError("line " + std::to_string(lineno) + ": non-finite entry");
      data.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw ParseError("line " + std::to_string(lineno) + ": ragged row (" +
                       std::to_string(count) + " fields, expected " + std::to_string(cols) + ")");
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("empty matrix CSV");
  return Matrix(rows, cols, std::move(data));
}

inline std::string to_csv(const Matrix& a) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (j) out << ',';
      out << a(i, j);
    }
    out << '\n';
  }
  return out.str();
}

inline Matrix read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

inline void write_csv(const Matrix& a, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << to_csv(a);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace lpcoreset
