#include "scale/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "scale/errors.hpp"

namespace scale {

void validate(const LrSchedule& s) {
  if (s.total_steps < 1) throw ConfigError("schedule: total_steps must be >= 1");
  if (!(s.warmup_frac >= 0.0 && s.warmup_frac < 1.0)) {
    throw ConfigError("schedule: warmup_frac must lie in [0, 1)");
  }
  if (!(s.floor_frac >= 0.0 && s.floor_frac <= 1.0)) {
    throw ConfigError("schedule: floor_frac must lie in [0, 1]");
  }
  if (!(s.peak > 0.0) || !std::isfinite(s.peak)) throw ConfigError("schedule: peak must be > 0");
}

std::int64_t warmup_steps(const LrSchedule& s) {
  return std::llround(s.warmup_frac * static_cast<double>(s.total_steps));
}

double lr_at(const LrSchedule& s, std::int64_t t) {
  if (t < 0 || t > s.total_steps) {
    throw std::out_of_range("lr_at: step " + std::to_string(t) + " outside [0, " +
                            std::to_string(s.total_steps) + "]");
  }
  const std::int64_t warm = warmup_steps(s);
  if (t < warm) return s.peak * static_cast<double>(t) / static_cast<double>(warm);
  const std::int64_t decay = s.total_steps - warm;
  const double progress =
      decay == 0 ? 1.0 : static_cast<double>(t - warm) / static_cast<double>(decay);
  const double floor = s.floor_frac * s.peak;
  return floor + (s.peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

LrSchedule constant_schedule(std::int64_t total_steps, double lr) {
  return LrSchedule{total_steps, 0.0, 1.0, lr};
}

}  // namespace scale
