#include "scale/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "scale/errors.hpp"

namespace scale {

TrainResult run_training(const Problem& problem, const OptimizerConfig& config,
                         const LrSchedule& schedule, std::int64_t steps, std::uint64_t seed,
                         const StepObserver& observer) {
  if (steps < 1) throw ConfigError("run_training: steps must be >= 1");
  if (steps > schedule.total_steps) {
    throw ConfigError("run_training: schedule covers fewer steps than requested");
  }
  validate(config);
  validate(schedule);

  const Rng root(seed);
  Rng init_rng = root.split(1);
  Rng batch_rng = root.split(2);

  TrainResult result;
  result.params = problem.initial_params(init_rng);
  validate_params(result.params);
  for (const auto& b : result.params) result.trace.block_names.push_back(b.name);

  for (std::int64_t t = 1; t <= steps; ++t) {
    const double lr = lr_at(schedule, t);
    LossGrad sample;
    bool finite = true;
    try {
      sample = problem.sample_gradient(result.params, batch_rng);
    } catch (const NumericalError&) {
      finite = false;
    }
    TraceRow row{t, finite ? sample.loss : std::nan(""), lr, {}};
    for (const auto& g : sample.grads) row.grad_norms.push_back(frobenius_norm(g));
    if (!finite) row.grad_norms.assign(result.params.size(), std::nan(""));
    result.trace.rows.push_back(std::move(row));
    if (!finite || !std::isfinite(sample.loss) || sample.loss > kDivergenceLoss) {
      result.trace.diverged = true;
      break;
    }
    if (observer) observer(StepView{t, result.params, sample.grads, sample.loss, lr});
    optimizer_step(result.state, result.params, sample.grads, config, lr);
  }
  result.trace.final_params_digest = params_digest(result.params);
  return result;
}

std::string params_digest(const Params& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& b : params) {
    for (char c : b.name) mix(static_cast<unsigned char>(c));
    mix(b.value.rows());
    mix(b.value.cols());
    for (double v : b.value.data()) mix(std::bit_cast<std::uint64_t>(v));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string trace_header(const TrainTrace& trace) {
  std::string h = "step,loss,lr";
  for (const auto& name : trace.block_names) h += "," + name + "_gradnorm";
  return h;
}

void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
  out << "# schema: " << kTraceSchema << "\n" << trace_header(trace) << "\n";
  for (const auto& r : trace.rows) {
    out << r.step << ',' << fmt_double(r.loss) << ',' << fmt_double(r.lr);
    for (double g : r.grad_norms) out << ',' << fmt_double(g);
    out << '\n';
  }
  out << "# diverged=" << (trace.diverged ? 1 : 0)
      << " final_params_digest=" << trace.final_params_digest << "\n";
}

GradCheckReport finite_diff_check(const Objective& objective, const Params& params,
                                  double tolerance, double h) {
  std::vector<Matrix> analytic;
  objective(params, &analytic);
  if (analytic.size() != params.size()) {
    throw ShapeError("finite_diff_check: objective returned the wrong number of gradients");
  }
  GradCheckReport report{{}, tolerance, true};
  Params probe = params;
  for (std::size_t b = 0; b < probe.size(); ++b) {
    auto values = probe[b].value.data();
    const auto a = analytic[b].data();
    double max_err = 0.0;
    double scale = 1e-12;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double plus = objective(probe, nullptr);
      values[i] = orig - h;
      const double minus = objective(probe, nullptr);
      values[i] = orig;
      const double numeric = (plus - minus) / (2.0 * h);
      max_err = std::max(max_err, std::abs(a[i] - numeric));
      scale = std::max({scale, std::abs(numeric), std::abs(a[i])});
    }
    const double rel = max_err / scale;
    report.blocks.push_back({probe[b].name, rel});
    if (!(rel <= tolerance)) report.passed = false;
  }
  return report;
}

GradCheckReport finite_diff_check(const Problem& problem, const Params& params, double tolerance,
                                  double h) {
  return finite_diff_check(problem.objective(), params, tolerance, h);
}

}  // namespace scale
