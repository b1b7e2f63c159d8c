#include "scale/svd.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "scale/errors.hpp"

namespace scale {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Columns are stored contiguously: column j occupies [j*len, (j+1)*len).
struct ColumnStore {
  std::size_t len;
  std::size_t count;
  std::vector<double> data;

  double* col(std::size_t j) { return data.data() + j * len; }
  const double* col(std::size_t j) const { return data.data() + j * len; }
};

void rotate(double* p, double* q, std::size_t len, double c, double s) {
  for (std::size_t i = 0; i < len; ++i) {
    const double xp = p[i];
    const double xq = q[i];
    p[i] = c * xp - s * xq;
    q[i] = s * xp + c * xq;
  }
}

// Fills the columns flagged in `missing` with unit vectors orthogonal to all
// other columns (classical Gram-Schmidt against the standard basis, run twice).
void complete_orthonormal(ColumnStore& u, const std::vector<bool>& missing) {
  std::size_t basis = 0;
  for (std::size_t j = 0; j < u.count; ++j) {
    if (!missing[j]) continue;
    double* target = u.col(j);
    for (; basis < u.len; ++basis) {
      std::fill(target, target + u.len, 0.0);
      target[basis] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < u.count; ++k) {
          if (k == j || (missing[k] && k > j)) continue;
          const double proj = dot(u.col(k), target, u.len);
          for (std::size_t i = 0; i < u.len; ++i) target[i] -= proj * u.col(k)[i];
        }
      }
      const double norm = std::sqrt(dot(target, target, u.len));
      if (norm > 0.5) {
        for (std::size_t i = 0; i < u.len; ++i) target[i] /= norm;
        ++basis;
        break;
      }
    }
  }
}

// Jacobi SVD for a tall (m >= n) matrix.
SvdResult jacobi_tall(const Matrix& a, int max_sweeps) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  ColumnStore w{m, n, std::vector<double>(m * n)};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) w.col(j)[i] = a(i, j);
  }
  ColumnStore v{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) v.col(j)[j] = 1.0;

  const double tol = static_cast<double>(m) * kEps;
  bool converged = n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(w.col(p), w.col(p), m);
        const double beta = dot(w.col(q), w.col(q), m);
        const double gamma = dot(w.col(p), w.col(q), m);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(w.col(p), w.col(q), m, c, s);
        rotate(v.col(p), v.col(q), n, c, s);
      }
    }
  }
  if (!converged) {
    throw ConvergenceError("svd_jacobi: not converged after " + std::to_string(max_sweeps) +
                           " sweeps");
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(w.col(j), w.col(j), m));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double sigma_max = n == 0 ? 0.0 : norms[order[0]];
  const double negligible = sigma_max * static_cast<double>(m) * kEps;

  SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  ColumnStore u{m, n, std::vector<double>(m * n, 0.0)};
  std::vector<bool> missing(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = norms[j];
    if (norms[j] > negligible && norms[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) u.col(k)[i] = w.col(j)[i] / norms[j];
    } else {
      missing[k] = true;
    }
    for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = v.col(j)[i];
  }
  if (std::any_of(missing.begin(), missing.end(), [](bool b) { return b; })) {
    complete_orthonormal(u, missing);
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = u.col(k)[i];
  }
  return out;
}

SvdResult swap_sides(SvdResult t) {
  return SvdResult{transpose(t.vt), std::move(t.sigma), transpose(t.u)};
}

SvdResult lapack_svd(const Matrix& g) {
  const auto m = static_cast<lapack_int>(g.rows());
  const auto n = static_cast<lapack_int>(g.cols());
  const lapack_int r = std::min(m, n);
  std::vector<double> a(g.data().begin(), g.data().end());
  SvdResult out{Matrix(g.rows(), static_cast<std::size_t>(r)),
                std::vector<double>(static_cast<std::size_t>(r)),
                Matrix(static_cast<std::size_t>(r), g.cols())};
  const lapack_int info = LAPACKE_dgesdd(LAPACK_ROW_MAJOR, 'S', m, n, a.data(), n,
                                         out.sigma.data(), out.u.data().data(), r,
                                         out.vt.data().data(), n);
  if (info > 0) {
    throw ConvergenceError("svd_exact: LAPACK dgesdd did not converge (info=" +
                           std::to_string(info) + ")");
  }
  if (info < 0) {
    throw std::invalid_argument("svd_exact: LAPACK dgesdd rejected argument " +
                                std::to_string(-info));
  }
  return out;
}

}  // namespace

SvdResult svd_jacobi(const Matrix& g, int max_sweeps) {
  if (g.rows() >= g.cols()) return jacobi_tall(g, max_sweeps);
  return swap_sides(jacobi_tall(transpose(g), max_sweeps));
}

SvdResult svd_exact(const Matrix& g) {
  if (std::min(g.rows(), g.cols()) <= kJacobiMaxDim) return svd_jacobi(g);
  return lapack_svd(g);
}

Matrix reconstruct(const SvdResult& svd) {
  Matrix us = svd.u;
  for (std::size_t i = 0; i < us.rows(); ++i) {
    for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= svd.sigma[k];
  }
  return matmul(us, svd.vt);
}

}  // namespace scale
