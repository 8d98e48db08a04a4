#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace attnlab {

// Dense row-major matrix of doubles; the single numeric carrier for inputs,
// weights, scores and caches. Entries are expected to be finite. -inf is
// tolerated only where a function documents additive-mask semantics; NaN and
// +inf are rejected everywhere.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> init);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  // "3x4" -- used by shape-error messages.
  std::string shape_string() const;

  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Standard product; rejects non-finite entries (masks never flow through here).
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);

// Row-wise softmax with max subtraction; -inf entries map to exactly 0.
// A row of all -inf is a fully masked query and raises DegenerateRowError.
Matrix row_softmax(const Matrix& m);

// Column-wise concatenation of blocks sharing a row count.
Matrix concat_cols(const std::vector<Matrix>& blocks);

// Inverse of concat_cols for the given widths.
std::vector<Matrix> split_cols(const Matrix& m, const std::vector<std::size_t>& widths);

// Block-diagonal assembly; zeros elsewhere.
Matrix block_diag(const std::vector<Matrix>& blocks);

double frobenius_norm(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

inline Matrix operator*(const Matrix& a, const Matrix& b) { return matmul(a, b); }
inline Matrix operator+(const Matrix& a, const Matrix& b) { return add(a, b); }
inline Matrix operator-(const Matrix& a, const Matrix& b) { return subtract(a, b); }

}  // namespace attnlab
