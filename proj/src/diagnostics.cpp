#include "scale/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "scale/errors.hpp"
#include "scale/training.hpp"

namespace scale {

void validate(const VarianceProtocol& p) {
  if (p.small_batch == 0) throw ConfigError("variance: small_batch must be >= 1");
  if (p.large_batch <= p.small_batch) {
    throw ConfigError("variance: large_batch must exceed small_batch");
  }
  if (p.window == 0) throw ConfigError("variance: window must be >= 1");
}

std::vector<double> estimate_layer_variance(const Problem& problem, const Params& params,
                                            const VarianceProtocol& protocol, Rng& rng,
                                            std::size_t draws) {
  validate(protocol);
  if (draws == 0) throw ConfigError("variance: draws must be >= 1");
  std::vector<double> acc(params.size(), 0.0);
  for (std::size_t d = 0; d < draws; ++d) {
    const auto nested =
        problem.nested_gradients(params, protocol.small_batch, protocol.large_batch, rng);
    for (std::size_t b = 0; b < acc.size(); ++b) {
      acc[b] += squared_frobenius_norm(nested.small[b] - nested.large[b]);
    }
  }
  for (double& v : acc) v /= static_cast<double>(draws);
  return acc;
}

std::vector<double> smooth_window(std::span<const double> series, std::size_t window) {
  if (window == 0) throw ConfigError("smooth_window: window must be >= 1");
  // Averages offsets from the window's first value, so a constant series
  // maps to itself exactly.
  std::vector<double> out(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) {
    const std::size_t lo = k + 1 >= window ? k + 1 - window : 0;
    const double base = series[lo];
    double s = 0.0;
    for (std::size_t i = lo; i <= k; ++i) s += series[i] - base;
    out[k] = base + s / static_cast<double>(k + 1 - lo);
  }
  return out;
}

VarianceTrace track_variance(const Problem& problem, const OptimizerConfig& config,
                             const LrSchedule& schedule, std::int64_t steps, std::uint64_t seed,
                             const VarianceProtocol& protocol, std::size_t draws,
                             std::int64_t every) {
  validate(protocol);
  if (every < 1) throw ConfigError("track_variance: every must be >= 1");
  VarianceTrace trace;
  Rng probe_rng = Rng(seed).split(3);
  auto observer = [&](const StepView& view) {
    if ((view.step - 1) % every != 0) return;
    trace.steps.push_back(view.step);
    trace.raw.push_back(estimate_layer_variance(problem, view.params, protocol, probe_rng, draws));
  };
  const TrainResult run = run_training(problem, config, schedule, steps, seed, observer);
  trace.block_names = run.trace.block_names;
  const std::size_t blocks = trace.block_names.size();
  trace.smoothed.assign(trace.raw.size(), std::vector<double>(blocks));
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<double> col(trace.raw.size());
    for (std::size_t r = 0; r < col.size(); ++r) col[r] = trace.raw[r][b];
    const auto sm = smooth_window(col, protocol.window);
    for (std::size_t r = 0; r < col.size(); ++r) trace.smoothed[r][b] = sm[r];
  }
  return trace;
}

void write_variance_csv(std::ostream& out, const VarianceTrace& trace) {
  char buf[32];
  out << "# schema: " << kVarianceSchema << "\nstep";
  for (const auto& n : trace.block_names) out << ',' << n << "_var";
  for (const auto& n : trace.block_names) out << ',' << n << "_var_smoothed";
  out << '\n';
  for (std::size_t r = 0; r < trace.steps.size(); ++r) {
    out << trace.steps[r];
    for (double v : trace.raw[r]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    for (double v : trace.smoothed[r]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

double ema_variance_law(double beta, double sigma2, std::int64_t t) {
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("ema_variance_law: beta must lie in [0, 1)");
  if (t < 0) throw ConfigError("ema_variance_law: t must be >= 0");
  return (1.0 - beta) / (1.0 + beta) * (1.0 - std::pow(beta, 2.0 * static_cast<double>(t))) *
         sigma2;
}

MonteCarloEstimate ema_variance_monte_carlo(double beta, double sigma2, std::int64_t t,
                                            std::size_t replicas, Rng& rng, double mu) {
  if (replicas < 2) throw ConfigError("ema_variance_monte_carlo: need >= 2 replicas");
  const double sd = std::sqrt(sigma2);
  const double target = (1.0 - std::pow(beta, static_cast<double>(t))) * mu;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t r = 0; r < replicas; ++r) {
    double m = 0.0;
    for (std::int64_t k = 0; k < t; ++k) m = beta * m + (1.0 - beta) * (mu + sd * rng.normal());
    const double dev = (m - target) * (m - target);
    sum += dev;
    sum_sq += dev * dev;
  }
  const double n = static_cast<double>(replicas);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

void validate(const TheoremParams& p) {
  if (p.layers == 0) throw ConfigError("theorem: layers must be >= 1");
  if (p.horizon < 1) throw ConfigError("theorem: horizon must be >= 1");
  if (!(p.gamma > 0.0)) throw ConfigError("theorem: gamma must be > 0");
  if (!(p.initial_gap >= 0.0)) throw ConfigError("theorem: initial_gap must be >= 0");
  if (!(p.delta > 0.0 && p.delta <= 1.0)) throw ConfigError("theorem: delta must lie in (0, 1]");
  if (p.betas.size() != p.layers || p.sigmas.size() != p.layers) {
    throw ConfigError("theorem: betas and sigmas need one entry per layer");
  }
  for (std::size_t l = 0; l < p.layers; ++l) {
    if (!(p.betas[l] >= 0.0 && p.betas[l] <= 1.0 - p.delta)) {
      throw ConfigError("theorem: beta_l must lie in [0, 1 - delta]");
    }
    if (!(p.sigmas[l] >= 0.0)) throw ConfigError("theorem: sigma_l must be >= 0");
  }
}

double theorem_bound_rhs(const TheoremParams& p) {
  validate(p);
  const double L = static_cast<double>(p.layers);
  const double T = static_cast<double>(p.horizon);
  const double sqrt_t = std::sqrt(T);
  const double d2 = p.delta * p.delta;
  double rhs = 2.0 * L * std::pow(p.gamma, 1.5) * p.initial_gap / (d2 * sqrt_t);
  for (std::size_t l = 0; l < p.layers; ++l) {
    const double beta = p.betas[l];
    const double s2 = p.sigmas[l] * p.sigmas[l];
    if (s2 == 0.0) continue;
    if (beta == 0.0) {
      throw ConfigError("theorem_bound_rhs: beta_l = 0 with sigma_l > 0 leaves the bound undefined");
    }
    const double damping = (1.0 - beta) / (1.0 + beta) * L * std::sqrt(p.gamma) / (4.0 * sqrt_t);
    const double drift = L * std::pow(p.gamma, 1.5) / (2.0 * sqrt_t);
    const double lag = (1.0 - beta) / (beta * beta * beta) * p.gamma * p.gamma / (4.0 * L * T);
    rhs += (damping + drift + lag) * s2 / d2;
  }
  return rhs;
}

std::vector<double> theorem_step_sizes(const TheoremParams& p) {
  validate(p);
  const double L = static_cast<double>(p.layers);
  const double g = p.gamma;
  std::vector<double> out;
  for (double beta : p.betas) {
    double eta = std::min(1.0 / (8.0 * g), 1.0 / std::sqrt(g * static_cast<double>(p.horizon)));
    if (beta > 0.0) {
      const double r = (1.0 - beta) / beta;
      eta = std::min(eta, r * r / (8.0 * g * L));
    }
    eta = std::min(eta, (1.0 - beta) / (4.0 * g));
    eta = std::min(eta, (1.0 - beta) / (4.0 * g) * std::cbrt((1.0 - beta) / (2.0 * L)));
    out.push_back(eta);
  }
  return out;
}

double theorem_step_floor(const TheoremParams& p) {
  validate(p);
  const double L = static_cast<double>(p.layers);
  const double g = p.gamma;
  const double d = p.delta;
  return std::min({1.0 / (8.0 * g), d * d / (8.0 * g * L), d / (4.0 * g),
                   d / (4.0 * g) * std::cbrt(d / (2.0 * L)),
                   1.0 / std::sqrt(g * static_cast<double>(p.horizon))});
}

bool theorem_conditions_hold(const TheoremParams& p, std::span<const double> etas) {
  if (etas.size() != p.layers) return false;
  const auto prescribed = theorem_step_sizes(p);
  const double floor = theorem_step_floor(p);
  constexpr double kSlack = 1e-12;
  for (std::size_t l = 0; l < p.layers; ++l) {
    if (etas[l] < floor * (1.0 - kSlack)) return false;
    if (etas[l] > prescribed[l] * (1.0 + kSlack)) return false;
  }
  return true;
}

}  // namespace scale
