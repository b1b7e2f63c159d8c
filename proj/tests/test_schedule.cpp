#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "scale/errors.hpp"
#include "scale/schedule.hpp"

using namespace scale;

TEST(Schedule, RampStartsAtZero) {
  const LrSchedule s{1000, 0.1, 0.1, 1e-3};
  EXPECT_EQ(lr_at(s, 0), 0.0);
}

TEST(Schedule, PeakAtWarmupEnd) {
  const LrSchedule s{1000, 0.1, 0.1, 1e-3};
  EXPECT_EQ(warmup_steps(s), 100);
  EXPECT_DOUBLE_EQ(lr_at(s, 100), 1e-3);
  EXPECT_DOUBLE_EQ(lr_at(s, 50), 0.5e-3);
}

TEST(Schedule, CosineEndpointIsFloor) {
  const LrSchedule s{1000, 0.1, 0.1, 1e-3};
  EXPECT_NEAR(lr_at(s, 1000), 1e-4, 1e-18);
}

TEST(Schedule, CosineMidpoint) {
  const LrSchedule s{1000, 0.1, 0.1, 1e-3};
  // Halfway through the decay the cosine factor is 1/2.
  EXPECT_NEAR(lr_at(s, 550), 1e-4 + 0.5 * (1e-3 - 1e-4), 1e-15);
  const double t = 700;
  const double progress = (t - 100) / 900;
  const double want = 1e-4 + 0.5 * (1e-3 - 1e-4) * (1 + std::cos(std::numbers::pi * progress));
  EXPECT_NEAR(lr_at(s, 700), want, 1e-15);
}

TEST(Schedule, MonotoneAfterWarmup) {
  const LrSchedule s{300, 0.1, 0.1, 0.5};
  for (std::int64_t t = 1; t <= 30; ++t) EXPECT_GT(lr_at(s, t), lr_at(s, t - 1));
  for (std::int64_t t = 31; t <= 300; ++t) EXPECT_LE(lr_at(s, t), lr_at(s, t - 1));
}

TEST(Schedule, OutOfRangeThrows) {
  const LrSchedule s{10, 0.1, 0.1, 1.0};
  EXPECT_THROW(lr_at(s, 11), std::out_of_range);
  EXPECT_THROW(lr_at(s, -1), std::out_of_range);
}

TEST(Schedule, ConstantSchedule) {
  const LrSchedule s = constant_schedule(50, 0.3);
  for (std::int64_t t = 0; t <= 50; ++t) EXPECT_EQ(lr_at(s, t), 0.3);
}

TEST(Schedule, Validation) {
  EXPECT_THROW(validate(LrSchedule{0, 0.1, 0.1, 1.0}), ConfigError);
  EXPECT_THROW(validate(LrSchedule{10, 1.0, 0.1, 1.0}), ConfigError);
  EXPECT_THROW(validate(LrSchedule{10, 0.1, 1.5, 1.0}), ConfigError);
  EXPECT_THROW(validate(LrSchedule{10, 0.1, 0.1, 0.0}), ConfigError);
  EXPECT_NO_THROW(validate(LrSchedule{10, 0.0, 1.0, 1.0}));
}
