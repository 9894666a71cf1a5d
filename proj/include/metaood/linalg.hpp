#pragma once

// Small dense linear algebra: symmetric eigendecomposition (cyclic Jacobi)
// and truncated SVD by subspace iteration.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "metaood/error.hpp"
#include "metaood/rng.hpp"

namespace metaood {

/// Row-major dense matrix.
struct DenseMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw ValidationError("multiply: dimension mismatch");
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double v = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += v * b(k, j);
    }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

struct SymmetricEigen {
  std::vector<double> values;  // descending
  DenseMatrix vectors;         // column k pairs with values[k]
};

/// Cyclic Jacobi rotations on a symmetric matrix.
inline SymmetricEigen symmetric_eigen(DenseMatrix a, std::size_t max_sweeps = 100) {
  const std::size_t n = a.rows;
  if (a.cols != n) throw ValidationError("symmetric_eigen: matrix not square");
  DenseMatrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= 1e-30 * total || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{std::vector<double>(n), DenseMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

/// Orthonormalises the columns in place (modified Gram-Schmidt, two passes).
/// Columns that collapse numerically are replaced by fresh random directions.
inline void orthonormalise_columns(DenseMatrix& m, Rng& rng) {
  for (std::size_t k = 0; k < m.cols; ++k) {
    for (int attempt = 0;; ++attempt) {
      double before = 0.0;
      for (std::size_t i = 0; i < m.rows; ++i) before += m(i, k) * m(i, k);
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t j = 0; j < k; ++j) {
          double dot = 0.0;
          for (std::size_t i = 0; i < m.rows; ++i) dot += m(i, j) * m(i, k);
          for (std::size_t i = 0; i < m.rows; ++i) m(i, k) -= dot * m(i, j);
        }
      double norm = 0.0;
      for (std::size_t i = 0; i < m.rows; ++i) norm += m(i, k) * m(i, k);
      if (norm > 1e-20 * std::max(before, 1e-300) && norm > 1e-300) {
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < m.rows; ++i) m(i, k) /= norm;
        break;
      }
      if (attempt > 8) throw NumericalError("orthonormalise_columns: cannot complete basis");
      for (std::size_t i = 0; i < m.rows; ++i) m(i, k) = rng.uniform(-1.0, 1.0);
    }
  }
}

struct TruncatedSvd {
  DenseMatrix u;              // rows x k, orthonormal columns (zero where sigma = 0)
  std::vector<double> sigma;  // descending
  DenseMatrix v;              // cols x k, orthonormal columns
};

/// Rank-k SVD of `a` by subspace iteration on a^T a from a seeded random
/// start, with a final Rayleigh-Ritz step. The iteration count is fixed.
inline TruncatedSvd truncated_svd(const DenseMatrix& a, std::size_t k, std::size_t iterations = 200,
                                  std::uint64_t seed = 0) {
  if (k < 1 || k > std::min(a.rows, a.cols))
    throw ValidationError("truncated_svd: rank " + std::to_string(k) + " outside [1, " +
                          std::to_string(std::min(a.rows, a.cols)) + "]");
  const DenseMatrix gram = multiply(transpose(a), a);
  Rng rng(seed);
  DenseMatrix v(a.cols, k);
  for (auto& x : v.data) x = rng.uniform(-1.0, 1.0);
  orthonormalise_columns(v, rng);
  for (std::size_t it = 0; it < iterations; ++it) {
    v = multiply(gram, v);
    orthonormalise_columns(v, rng);
  }
  const auto ritz = symmetric_eigen(multiply(transpose(v), multiply(gram, v)));
  v = multiply(v, ritz.vectors);
  TruncatedSvd out{DenseMatrix(a.rows, k), std::vector<double>(k), v};
  const DenseMatrix av = multiply(a, v);
  for (std::size_t c = 0; c < k; ++c) {
    double norm = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) norm += av(i, c) * av(i, c);
    norm = std::sqrt(norm);
    out.sigma[c] = norm;
    if (norm > 0.0)
      for (std::size_t i = 0; i < a.rows; ++i) out.u(i, c) = av(i, c) / norm;
  }
  return out;
}

}  // namespace metaood
