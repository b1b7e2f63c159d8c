#include "scale/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "scale/errors.hpp"
#include "scale/svd.hpp"

namespace scale {

std::string_view to_string(NormKind kind) {
  switch (kind) {
    case NormKind::SingularValue: return "singular_value";
    case NormKind::SingularValueNS: return "singular_value_ns";
    case NormKind::ColumnWise: return "column_wise";
    case NormKind::RowWise: return "row_wise";
    case NormKind::Sign: return "sign";
  }
  return "unknown";
}

std::optional<NormKind> parse_norm_kind(std::string_view name) {
  for (NormKind k : {NormKind::SingularValue, NormKind::SingularValueNS, NormKind::ColumnWise,
                     NormKind::RowWise, NormKind::Sign}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void validate(const NsConfig& ns) {
  if (ns.steps < 1) throw ConfigError("NsConfig: steps must be >= 1");
  if (!std::isfinite(ns.a) || !std::isfinite(ns.b) || !std::isfinite(ns.c)) {
    throw ConfigError("NsConfig: coefficients must be finite");
  }
}

Matrix sign_normalize(const Matrix& g) {
  Matrix out = g;
  for (double& v : out.data()) v = v != 0.0 ? std::copysign(1.0, v) : 0.0;
  return out;
}

Matrix column_normalize(const Matrix& g) {
  const auto norms = column_norms(g);
  std::vector<double> inv(norms.size());
  for (std::size_t j = 0; j < norms.size(); ++j) {
    inv[j] = norms[j] > kNormGuard ? 1.0 / norms[j] : 0.0;
  }
  Matrix out = g;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= inv[j];
  }
  return out;
}

Matrix row_normalize(const Matrix& g) {
  const auto norms = row_norms(g);
  Matrix out = g;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double inv = norms[i] > kNormGuard ? 1.0 / norms[i] : 0.0;
    for (double& v : out.row(i)) v *= inv;
  }
  return out;
}

Matrix orthogonalize_exact(const Matrix& g) {
  const SvdResult svd = svd_exact(g);
  const double cutoff = svd.sigma.empty()
                            ? 0.0
                            : svd.sigma[0] * static_cast<double>(std::max(g.rows(), g.cols())) *
                                  std::numeric_limits<double>::epsilon();
  std::size_t rank = 0;
  while (rank < svd.sigma.size() && svd.sigma[rank] > cutoff) ++rank;
  if (rank == 0) return Matrix(g.rows(), g.cols());
  if (rank == svd.sigma.size()) return matmul(svd.u, svd.vt);
  Matrix u(g.rows(), rank);
  Matrix vt(rank, g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t k = 0; k < rank; ++k) u(i, k) = svd.u(i, k);
  }
  for (std::size_t k = 0; k < rank; ++k) {
    for (std::size_t j = 0; j < g.cols(); ++j) vt(k, j) = svd.vt(k, j);
  }
  return matmul(u, vt);
}

Matrix newton_schulz(const Matrix& g, const NsConfig& ns) {
  validate(ns);
  const double fro = frobenius_norm(g);
  if (fro == 0.0) return Matrix(g.rows(), g.cols());
  // Iterate on the wide orientation so the Gram matrix is the small one.
  const bool flip = g.rows() > g.cols();
  Matrix x = flip ? transpose(g) : g;
  x *= 1.0 / fro;
  for (int step = 0; step < ns.steps; ++step) {
    const Matrix a = gram(x);
    Matrix b = gram(a);
    b *= ns.c;
    axpy(ns.b, a, b);
    Matrix bx = matmul(b, x);
    axpy(ns.a, x, bx);
    x = std::move(bx);
  }
  return flip ? transpose(x) : x;
}

Matrix normalize(NormKind kind, const Matrix& g, const NsConfig& ns) {
  switch (kind) {
    case NormKind::SingularValue: return orthogonalize_exact(g);
    case NormKind::SingularValueNS: return newton_schulz(g, ns);
    case NormKind::ColumnWise: return column_normalize(g);
    case NormKind::RowWise: return row_normalize(g);
    case NormKind::Sign: return sign_normalize(g);
  }
  throw ConfigError("normalize: unknown NormKind");
}

double dual_norm(NormKind kind, const Matrix& g) {
  switch (kind) {
    case NormKind::Sign: {
      double acc = 0.0;
      for (double v : g.data()) acc += std::abs(v);
      return acc;
    }
    case NormKind::ColumnWise: {
      const auto n = column_norms(g);
      return std::accumulate(n.begin(), n.end(), 0.0);
    }
    case NormKind::RowWise: {
      const auto n = row_norms(g);
      return std::accumulate(n.begin(), n.end(), 0.0);
    }
    case NormKind::SingularValue:
    case NormKind::SingularValueNS: {
      const auto svd = svd_exact(g);
      return std::accumulate(svd.sigma.begin(), svd.sigma.end(), 0.0);
    }
  }
  throw ConfigError("dual_norm: unknown NormKind");
}

double primal_norm(NormKind kind, const Matrix& d) {
  switch (kind) {
    case NormKind::Sign: return max_abs(d);
    case NormKind::ColumnWise: {
      const auto n = column_norms(d);
      return *std::max_element(n.begin(), n.end());
    }
    case NormKind::RowWise: {
      const auto n = row_norms(d);
      return *std::max_element(n.begin(), n.end());
    }
    case NormKind::SingularValue:
    case NormKind::SingularValueNS: return svd_exact(d).sigma.front();
  }
  throw ConfigError("primal_norm: unknown NormKind");
}

namespace {

// Uniform direction on the unit sphere scaled to a radius in (0, 1]; one
// draw in four sits exactly on the sphere so boundary points are covered.
void fill_ball_vector(std::span<double> v, Rng& rng) {
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double radius =
      rng.uniform() < 0.25 ? 1.0 : std::pow(rng.uniform(), 1.0 / static_cast<double>(v.size()));
  const double s = radius / std::sqrt(norm2);
  for (double& x : v) x *= s;
}

}  // namespace

Matrix sample_unit_ball(NormKind kind, std::size_t rows, std::size_t cols, Rng& rng) {
  switch (kind) {
    case NormKind::Sign: {
      if (rng.uniform() < 0.25) {
        Matrix out(rows, cols);
        for (double& v : out.data()) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
        return out;
      }
      return rng.uniform_matrix(rows, cols, -1.0, 1.0);
    }
    case NormKind::RowWise: {
      Matrix out(rows, cols);
      for (std::size_t i = 0; i < rows; ++i) fill_ball_vector(out.row(i), rng);
      return out;
    }
    case NormKind::ColumnWise: {
      Matrix t(cols, rows);
      for (std::size_t j = 0; j < cols; ++j) fill_ball_vector(t.row(j), rng);
      return transpose(t);
    }
    case NormKind::SingularValue:
    case NormKind::SingularValueNS: {
      Matrix out = rng.normal_matrix(rows, cols);
      const double spectral = svd_exact(out).sigma.front();
      const double radius = rng.uniform() < 0.25 ? 1.0 : rng.uniform();
      out *= radius / spectral;
      return out;
    }
  }
  throw ConfigError("sample_unit_ball: unknown NormKind");
}

bool lmo_optimality_check(NormKind kind, const Matrix& g, std::int64_t trials, Rng& rng,
                          const NsConfig& ns) {
  if (trials <= 0) return true;
  const Matrix d = normalize(kind, g, ns);
  const double lmo_value = -inner_product(g, d);
  for (std::int64_t t = 0; t < trials; ++t) {
    Matrix candidate = sample_unit_ball(kind, g.rows(), g.cols(), rng);
    const double norm = primal_norm(kind, candidate);
    if (norm > 1.0) candidate *= 1.0 / norm;
    if (inner_product(g, candidate) + 1e-9 < lmo_value) return false;
  }
  return true;
}

}  // namespace scale
