#pragma once

#include <cstddef>
#include <vector>

#include "attnlab/matrix.hpp"

namespace attnlab {

struct SvdResult {
  Matrix u;                             // rows x rank, orthonormal columns
  std::vector<double> singular_values;  // rank values, nonincreasing
  Matrix vt;                            // rank x cols, orthonormal rows

  Matrix reconstruct() const;  // u * diag(s) * vt
};

// Best rank-`rank` approximation via one-sided Jacobi (cap 100 sweeps,
// relative off-diagonal tolerance 1e-12). Throws ArgumentError when rank is
// out of [1, min(rows, cols)] and ConvergenceError (with residual) at the cap.
SvdResult truncated_svd(const Matrix& m, std::size_t rank);

}  // namespace attnlab
