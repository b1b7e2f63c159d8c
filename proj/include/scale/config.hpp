#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scale/diagnostics.hpp"
#include "scale/optim.hpp"
#include "scale/problems.hpp"
#include "scale/schedule.hpp"

namespace scale {

inline constexpr std::int64_t kConfigSchemaVersion = 1;

struct VarianceSettings {
  VarianceProtocol protocol;
  std::size_t draws = 4;    // nested-batch draws per estimate
  std::int64_t every = 10;  // estimate on steps 1, 1 + every, ...

  friend bool operator==(const VarianceSettings&, const VarianceSettings&) = default;
};

// One experiment: a problem, an optimizer, a cosine schedule whose peak is
// optimizer.peak_lr and whose length is `steps`, and the seeds to run.
struct ExperimentConfig {
  std::variant<NoisyQuadratic, MlpSpec> problem;
  OptimizerConfig optimizer;
  double warmup_frac = 0.10;
  double floor_frac = 0.10;
  std::int64_t steps = 1;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "out";
  VarianceSettings variance;
};

// Field-wise equality; OptimizerConfig::last_beta_schedule is not compared.
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
bool same_settings(const OptimizerConfig& a, const OptimizerConfig& b);

void validate(const ExperimentConfig& config);

LrSchedule schedule_of(const ExperimentConfig& config);
std::unique_ptr<Problem> make_problem(const ExperimentConfig& config);

// Throws ConfigError; JSON syntax errors name the byte offset, unknown keys
// and type mismatches name the offending key.
ExperimentConfig parse_experiment_config(std::string_view json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Every field is written, so parse_experiment_config(to_json(c)) == c.
std::string to_json(const ExperimentConfig& config);

}  // namespace scale
