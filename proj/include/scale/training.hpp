#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scale/optim.hpp"
#include "scale/problems.hpp"
#include "scale/schedule.hpp"

namespace scale {

// Loss above this (or non-finite) flags the run as divergent.
inline constexpr double kDivergenceLoss = 1e8;

struct TraceRow {
  std::int64_t step = 0;  // 1-based
  double loss = 0.0;      // loss at the parameters the step started from
  double lr = 0.0;
  std::vector<double> grad_norms;  // Frobenius norm of each block's gradient
};

struct TrainTrace {
  std::vector<std::string> block_names;
  std::vector<TraceRow> rows;
  bool diverged = false;
  std::string final_params_digest;
};

struct TrainResult {
  TrainTrace trace;
  Params params;
  OptState state;
};

struct StepView {
  std::int64_t step;
  const Params& params;
  std::span<const Matrix> grads;
  double loss;
  double lr;
};

// Called once per step before the optimizer update.
using StepObserver = std::function<void(const StepView&)>;

// Runs `steps` optimizer updates from problem.initial_params. Step t (1-based)
// uses lr_at(schedule, t). Initialization and mini-batch sampling draw from
// independent streams split off `seed`.
TrainResult run_training(const Problem& problem, const OptimizerConfig& config,
                         const LrSchedule& schedule, std::int64_t steps, std::uint64_t seed,
                         const StepObserver& observer = {});

// FNV-1a over the names, shapes and IEEE bit patterns of every block.
std::string params_digest(const Params& params);

inline constexpr std::string_view kTraceSchema = "scale_opt.trace/1";

// "# schema: scale_opt.trace/1", then the header
// step,loss,lr,<block>_gradnorm..., one row per step, and a trailing
// "# diverged=<0|1> final_params_digest=<hex>" line. Doubles are written
// with 17 significant digits so equal traces give equal bytes.
void write_trace_csv(std::ostream& out, const TrainTrace& trace);
std::string trace_header(const TrainTrace& trace);

struct BlockGradCheck {
  std::string name;
  // max |analytic - numeric| / max(max|numeric|, max|analytic|, 1e-12)
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<BlockGradCheck> blocks;
  double tolerance = 0.0;
  bool passed = false;
};

// Central differences with step h on every entry of every block.
GradCheckReport finite_diff_check(const Objective& objective, const Params& params,
                                  double tolerance, double h = 1e-5);
GradCheckReport finite_diff_check(const Problem& problem, const Params& params, double tolerance,
                                  double h = 1e-5);

}  // namespace scale
