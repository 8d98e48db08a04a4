#include "attnlab/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagTol = 1e-12;

double column_dot(const Matrix& m, std::size_t p, std::size_t q) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, p) * m(i, q);
  return s;
}

void rotate_columns(Matrix& m, std::size_t p, std::size_t q, double c, double s) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double vp = m(i, p);
    const double vq = m(i, q);
    m(i, p) = c * vp - s * vq;
    m(i, q) = s * vp + c * vq;
  }
}

// Orthogonalizes the columns of `work` in place, accumulating the rotations
// into `v`. Returns the largest relative off-diagonal correlation remaining.
double jacobi_orthogonalize(Matrix& work, Matrix& v) {
  const std::size_t n = work.cols();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double app = column_dot(work, p, p);
        const double aqq = column_dot(work, q, q);
        const double apq = column_dot(work, p, q);
        const double denom = std::sqrt(app * aqq);
        if (denom == 0.0 || std::abs(apq) <= kOffDiagTol * denom) continue;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_columns(work, p, q, c, s);
        rotate_columns(v, p, q, c, s);
        rotated = true;
      }
    }
    if (!rotated) return 0.0;
  }
  double residual = 0.0;
  for (std::size_t p = 0; p + 1 < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      const double denom =
          std::sqrt(column_dot(work, p, p) * column_dot(work, q, q));
      if (denom > 0.0) {
        residual = std::max(residual, std::abs(column_dot(work, p, q)) / denom);
      }
    }
  }
  throw ConvergenceError("truncated_svd: no convergence after " +
                             std::to_string(kMaxSweeps) +
                             " sweeps, residual " + std::to_string(residual),
                         residual);
}

// Replaces a numerically null column of u (index `col`) with a unit vector
// orthogonal to all other columns, so truncation past the true rank still
// returns an orthonormal basis.
void complete_orthonormal_column(Matrix& u, std::size_t col, std::size_t n_cols) {
  const std::size_t m = u.rows();
  std::vector<double> best;
  double best_norm = -1.0;
  for (std::size_t cand = 0; cand < m; ++cand) {
    std::vector<double> v(m, 0.0);
    v[cand] = 1.0;
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (j == col) continue;
      double proj = 0.0;
      for (std::size_t i = 0; i < m; ++i) proj += v[i] * u(i, j);
      for (std::size_t i = 0; i < m; ++i) v[i] -= proj * u(i, j);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > best_norm) {
      best_norm = norm;
      best = std::move(v);
    }
  }
  for (std::size_t i = 0; i < m; ++i) u(i, col) = best[i] / best_norm;
}

SvdResult svd_tall(const Matrix& a, std::size_t rank) {
  const std::size_t n = a.cols();
  Matrix work = a;
  Matrix v = Matrix::identity(n);
  jacobi_orthogonalize(work, v);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(column_dot(work, j, j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double s_max = norms[order.front()];
  const double null_threshold = s_max * 1e-13;

  SvdResult out;
  out.u = Matrix(a.rows(), rank);
  out.vt = Matrix(rank, n);
  out.singular_values.resize(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = norms[j];
    for (std::size_t c = 0; c < n; ++c) out.vt(k, c) = v(c, j);
    if (norms[j] > null_threshold) {
      for (std::size_t i = 0; i < a.rows(); ++i) out.u(i, k) = work(i, j) / norms[j];
    }
  }
  for (std::size_t k = 0; k < rank; ++k) {
    if (out.singular_values[k] <= null_threshold) {
      complete_orthonormal_column(out.u, k, rank);
    }
  }
  return out;
}

}  // namespace

Matrix SvdResult::reconstruct() const {
  Matrix us = u;
  for (std::size_t i = 0; i < us.rows(); ++i) {
    for (std::size_t k = 0; k < us.cols(); ++k) {
      us(i, k) *= singular_values[k];
    }
  }
  return matmul(us, vt);
}

SvdResult truncated_svd(const Matrix& m, std::size_t rank) {
  if (m.empty()) {
    throw ArgumentError("truncated_svd: empty matrix " + m.shape_string());
  }
  if (!m.all_finite()) {
    throw ArgumentError("truncated_svd: non-finite entries in " + m.shape_string());
  }
  const std::size_t min_dim = std::min(m.rows(), m.cols());
  if (rank == 0 || rank > min_dim) {
    throw ArgumentError("truncated_svd: rank " + std::to_string(rank) +
                        " out of range [1, " + std::to_string(min_dim) + "] for " +
                        m.shape_string());
  }
  if (m.rows() >= m.cols()) {
    return svd_tall(m, rank);
  }
  // Wide case: factor the transpose and swap the roles of U and V.
  SvdResult t = svd_tall(transpose(m), rank);
  SvdResult out;
  out.singular_values = std::move(t.singular_values);
  out.u = transpose(t.vt);
  out.vt = transpose(t.u);
  return out;
}

}  // namespace attnlab
