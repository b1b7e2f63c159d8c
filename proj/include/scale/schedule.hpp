#pragma once

#include <cstdint>

namespace scale {

// Linear warm-up from 0 to `peak` over round(warmup_frac * total_steps)
// steps, then a half-cosine from `peak` down to floor_frac * peak at
// t = total_steps.
struct LrSchedule {
  std::int64_t total_steps = 1;
  double warmup_frac = 0.10;
  double floor_frac = 0.10;
  double peak = 1e-3;

  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

void validate(const LrSchedule& s);
std::int64_t warmup_steps(const LrSchedule& s);

// Throws std::out_of_range when t < 0 or t > total_steps.
double lr_at(const LrSchedule& s, std::int64_t t);

// Constant learning rate for `total_steps` steps.
LrSchedule constant_schedule(std::int64_t total_steps, double lr);

}  // namespace scale
