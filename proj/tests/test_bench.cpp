#include <gtest/gtest.h>

#include <sstream>

#include "scale/bench.hpp"
#include "scale/errors.hpp"

using namespace scale;

TEST(Bench, Quantile) {
  EXPECT_EQ(quantile({5, 1, 3}, 0.5), 3.0);
  EXPECT_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_EQ(quantile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, 0.1), 2.0);
  EXPECT_EQ(quantile({7}, 0.9), 7.0);
  EXPECT_THROW(quantile({}, 0.5), ConfigError);
  EXPECT_THROW(quantile({1, 2}, 1.5), ConfigError);
}

TEST(Bench, ValidationBounds) {
  BenchOptions o;
  EXPECT_NO_THROW(validate(o));
  o.dims = {128};
  EXPECT_THROW(validate(o), ConfigError);
  o.dims = {8192};
  EXPECT_THROW(validate(o), ConfigError);
  o.dims = {256, 4096};
  EXPECT_NO_THROW(validate(o));
  o.repeats = 29;
  EXPECT_THROW(validate(o), ConfigError);
  o.repeats = 30;
  o.kinds.clear();
  EXPECT_THROW(validate(o), ConfigError);
}

TEST(Bench, SmallSizeReport) {
  BenchOptions o;
  o.dims = {16, 24};
  o.repeats = 5;
  o.warmup = 1;
  const BenchReport r = run_bench_unchecked(o);
  EXPECT_EQ(r.rows.size(), 10u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.samples, 5u);
    EXPECT_GT(row.median_ns, 0.0);
    EXPECT_LE(row.p10_ns, row.median_ns);
    EXPECT_LE(row.median_ns, row.p90_ns);
  }
  ASSERT_NE(r.find(NormKind::Sign, 24), nullptr);
  EXPECT_EQ(r.find(NormKind::Sign, 32), nullptr);
  std::ostringstream out;
  write_bench_csv(out, r);
  EXPECT_EQ(out.str().rfind("# schema: scale_opt.bench/1\nkind,dim,samples,median_ns,p10_ns,p90_ns\n", 0), 0u);
  EXPECT_THROW(run_bench(o), ConfigError);
}

TEST(Bench, MedianStableAcrossRepeatCounts) {
  // Median of 30 timed calls lands within 25% of the median of 300.
  const auto few = time_normalize(NormKind::ColumnWise, 256, 30, 5, 1);
  const auto many = time_normalize(NormKind::ColumnWise, 256, 300, 5, 1);
  const double a = quantile(few, 0.5);
  const double b = quantile(many, 0.5);
  EXPECT_NEAR(a, b, 0.25 * b);
}
