#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scale/problems.hpp"
#include "scale/rng.hpp"
#include "scale/schedule.hpp"

namespace scale {

// ---------------------------------------------------------------------------
// Per-block gradient variance.
//
// The training-batch gradient is compared with a gradient over a larger
// batch that contains it; the estimate for block l is the mean over draws of
// ||g_small_l - g_large_l||_F^2. For i.i.d. samples its expectation is
// (1 - small/large) * Var(g_small_l), so the large batch is a biased but
// consistent stand-in for the full gradient.

struct VarianceProtocol {
  std::size_t small_batch = 32;
  std::size_t large_batch = 512;
  std::size_t window = 50;

  friend bool operator==(const VarianceProtocol&, const VarianceProtocol&) = default;
};

void validate(const VarianceProtocol& p);

std::vector<double> estimate_layer_variance(const Problem& problem, const Params& params,
                                            const VarianceProtocol& protocol, Rng& rng,
                                            std::size_t draws);

// Trailing moving average; entry k averages the last min(k + 1, window) values.
std::vector<double> smooth_window(std::span<const double> series, std::size_t window);

struct VarianceTrace {
  std::vector<std::string> block_names;
  std::vector<std::int64_t> steps;
  std::vector<std::vector<double>> raw;       // [row][block]
  std::vector<std::vector<double>> smoothed;  // [row][block], window-smoothed per block
};

// Trains with `config` and records estimate_layer_variance every `every` steps.
VarianceTrace track_variance(const Problem& problem, const OptimizerConfig& config,
                             const LrSchedule& schedule, std::int64_t steps, std::uint64_t seed,
                             const VarianceProtocol& protocol, std::size_t draws,
                             std::int64_t every);

inline constexpr std::string_view kVarianceSchema = "scale_opt.variance/1";
void write_variance_csv(std::ostream& out, const VarianceTrace& trace);

// ---------------------------------------------------------------------------
// EMA noise law: for m_t = beta m_{t-1} + (1 - beta) g_t with m_0 = 0 and
// i.i.d. g_t of variance sigma2, E||m_t - (1 - beta^t) mu||^2 equals
// (1 - beta) / (1 + beta) * (1 - beta^(2t)) * sigma2.

double ema_variance_law(double beta, double sigma2, std::int64_t t);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Simulates `replicas` scalar EMA streams of N(mu, sigma2) draws for t steps.
MonteCarloEstimate ema_variance_monte_carlo(double beta, double sigma2, std::int64_t t,
                                            std::size_t replicas, Rng& rng, double mu = 0.7);

// ---------------------------------------------------------------------------
// Convergence bound for layer-wise SGD-M with per-layer momentum beta_l.

struct TheoremParams {
  std::size_t layers = 1;       // L
  std::int64_t horizon = 1;     // T
  double gamma = 1.0;           // smoothness
  double initial_gap = 0.0;     // loss(theta_1) - loss*
  double delta = 0.1;           // beta_l <= 1 - delta
  std::vector<double> betas;    // per layer
  std::vector<double> sigmas;   // per layer, sqrt of the gradient-noise bound
};

void validate(const TheoremParams& p);

// Right-hand side of the averaged squared-gradient bound. Throws ConfigError
// when some layer has beta_l = 0 and sigma_l > 0.
double theorem_bound_rhs(const TheoremParams& p);

// Per-layer step sizes the bound is stated for, and the common lower bound
// eta they must all exceed.
std::vector<double> theorem_step_sizes(const TheoremParams& p);
double theorem_step_floor(const TheoremParams& p);
bool theorem_conditions_hold(const TheoremParams& p, std::span<const double> etas);

}  // namespace scale
