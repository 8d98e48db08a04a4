#include "attnlab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void ensure_finite(const Matrix& m, const char* role) {
  if (!m.all_finite()) {
    throw ArgumentError(std::string(role) + " contains non-finite entries (" +
                        m.shape_string() + "); only additive masks may hold -inf");
  }
}

// Accepts -inf (mask cells) but rejects NaN and +inf.
void ensure_mask_compatible(const Matrix& m, const char* role) {
  for (double v : m.data()) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw ArgumentError(std::string(role) + " contains NaN or +inf entries (" +
                          m.shape_string() + ")");
    }
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ArgumentError("matrix data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
  rows_ = init.size();
  cols_ = rows_ == 0 ? 0 : init.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : init) {
    if (r.size() != cols_) {
      throw ArgumentError("ragged initializer: expected " + std::to_string(cols_) +
                          " columns, got " + std::to_string(r.size()));
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + a.shape_string() + " * " +
                     b.shape_string());
  }
  ensure_finite(a, "matmul lhs");
  ensure_finite(b, "matmul rhs");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out(j, i) = m(i, j);
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add shape mismatch: " + a.shape_string() + " + " +
                     b.shape_string());
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("subtract shape mismatch: " + a.shape_string() + " - " +
                     b.shape_string());
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("hadamard shape mismatch: " + a.shape_string() + " . " +
                     b.shape_string());
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

Matrix scale(const Matrix& m, double factor) {
  Matrix out = m;
  for (double& v : out.data()) v *= factor;
  return out;
}

Matrix row_softmax(const Matrix& m) {
  ensure_mask_compatible(m, "row_softmax input");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double max_v = kNegInf;
    for (std::size_t j = 0; j < m.cols(); ++j) max_v = std::max(max_v, m(i, j));
    if (max_v == kNegInf) {
      throw DegenerateRowError("row_softmax: row " + std::to_string(i) +
                               " is fully masked (all -inf)");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double e = std::exp(m(i, j) - max_v);  // exp(-inf) == 0 exactly
      out(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

Matrix concat_cols(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) {
    throw ArgumentError("concat_cols: empty block list");
  }
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const Matrix& b : blocks) {
    if (b.rows() != rows) {
      throw ShapeError("concat_cols row mismatch: " + blocks.front().shape_string() +
                       " vs " + b.shape_string());
    }
    cols += b.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Matrix& b : blocks) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(i, offset + j) = b(i, j);
      }
    }
    offset += b.cols();
  }
  return out;
}

std::vector<Matrix> split_cols(const Matrix& m, const std::vector<std::size_t>& widths) {
  std::size_t total = 0;
  for (std::size_t w : widths) total += w;
  if (total != m.cols()) {
    throw ShapeError("split_cols widths sum to " + std::to_string(total) +
                     " but matrix is " + m.shape_string());
  }
  std::vector<Matrix> out;
  out.reserve(widths.size());
  std::size_t offset = 0;
  for (std::size_t w : widths) {
    Matrix block(m.rows(), w);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        block(i, j) = m(i, offset + j);
      }
    }
    out.push_back(std::move(block));
    offset += w;
  }
  return out;
}

Matrix block_diag(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) {
    throw ArgumentError("block_diag: empty block list");
  }
  std::size_t rows = 0, cols = 0;
  for (const Matrix& b : blocks) {
    ensure_finite(b, "block_diag block");
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out(rows, cols);
  std::size_t r0 = 0, c0 = 0;
  for (const Matrix& b : blocks) {
    for (std::size_t i = 0; i < b.rows(); ++i) {
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(r0 + i, c0 + j) = b(i, j);
      }
    }
    r0 += b.rows();
    c0 += b.cols();
  }
  return out;
}

double frobenius_norm(const Matrix& m) {
  double sum = 0.0;
  for (double v : m.data()) sum += v * v;
  return std::sqrt(sum);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("max_abs_diff shape mismatch: " + a.shape_string() + " vs " +
                     b.shape_string());
  }
  double max_d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    max_d = std::max(max_d, std::abs(a.data()[i] - b.data()[i]));
  }
  return max_d;
}

}  // namespace attnlab
