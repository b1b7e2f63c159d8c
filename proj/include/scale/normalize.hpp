#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "scale/matrix.hpp"
#include "scale/rng.hpp"

namespace scale {

// Matrix norm whose unit ball defines the steepest-descent direction.
//   SingularValue / SingularValueNS : spectral norm (2 -> 2)
//   ColumnWise                      : max column norm (1 -> 2)
//   RowWise                         : max row norm (2 -> inf)
//   Sign                            : max entry magnitude (1 -> inf)
enum class NormKind { SingularValue, SingularValueNS, ColumnWise, RowWise, Sign };

std::string_view to_string(NormKind kind);
std::optional<NormKind> parse_norm_kind(std::string_view name);

// Quintic Newton-Schulz iteration X <- aX + b(XX^T)X + c(XX^T)^2 X applied
// to G / ||G||_F. Defaults are the Muon coefficients.
struct NsConfig {
  int steps = 5;
  double a = 3.4445;
  double b = -4.7750;
  double c = 2.0315;

  friend bool operator==(const NsConfig&, const NsConfig&) = default;
};

void validate(const NsConfig& ns);

// Columns (rows) whose norm is at or below this are mapped to zero by the
// column-wise (row-wise) normalization.
inline constexpr double kNormGuard = 1e-8;

// Direction D(G) with ||D||_kind <= 1 (NS excepted) such that -D minimizes
// <G, D'> over the unit ball of the chosen norm.
Matrix normalize(NormKind kind, const Matrix& g, const NsConfig& ns = {});

Matrix sign_normalize(const Matrix& g);
Matrix column_normalize(const Matrix& g);
Matrix row_normalize(const Matrix& g);
// U V^T over the nonzero part of the spectrum; zero input gives zero.
Matrix orthogonalize_exact(const Matrix& g);
Matrix newton_schulz(const Matrix& g, const NsConfig& ns = {});

// Dual norm ||G||_* = max over the unit ball of <G, D>. SingularValueNS
// shares the nuclear norm with SingularValue.
double dual_norm(NormKind kind, const Matrix& g);

// Primal norm ||D||_kind, used for feasibility checks.
double primal_norm(NormKind kind, const Matrix& d);

// Monte-Carlo check that -normalize(kind, g) attains the smallest value of
// <g, D'> among `trials` random feasible D' (up to 1e-9).
bool lmo_optimality_check(NormKind kind, const Matrix& g, std::int64_t trials, Rng& rng,
                          const NsConfig& ns = {});

// Random point inside the unit ball of `kind`.
Matrix sample_unit_ball(NormKind kind, std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace scale
