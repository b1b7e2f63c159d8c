#pragma once

#include <cstddef>
#include <vector>

#include "scale/matrix.hpp"

namespace scale {

// Thin SVD g = u * diag(sigma) * vt with r = min(m, n).
struct SvdResult {
  Matrix u;                   // m x r, orthonormal columns
  std::vector<double> sigma;  // r entries, non-negative, descending
  Matrix vt;                  // r x n, orthonormal rows
};

// Above this min(m, n) svd_exact hands off to LAPACK's divide-and-conquer
// driver; at or below it the one-sided Jacobi routine is used.
inline constexpr std::size_t kJacobiMaxDim = 64;
inline constexpr int kDefaultJacobiSweeps = 60;

// One-sided (Hestenes) Jacobi SVD. Throws ConvergenceError when the
// off-diagonal mass is still above tolerance after max_sweeps sweeps.
SvdResult svd_jacobi(const Matrix& g, int max_sweeps = kDefaultJacobiSweeps);

SvdResult svd_exact(const Matrix& g);

// u * diag(sigma) * vt
Matrix reconstruct(const SvdResult& svd);

}  // namespace scale
