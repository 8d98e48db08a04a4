#pragma once

#include <cstdint>
#include <random>

#include "attnlab/matrix.hpp"

namespace attnlab {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                              double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

inline Matrix uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                             double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

}  // namespace attnlab
