#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "scale/normalize.hpp"

namespace scale {

inline constexpr std::size_t kBenchMinDim = 256;
inline constexpr std::size_t kBenchMaxDim = 4096;
inline constexpr std::size_t kBenchMinRepeats = 30;

struct BenchOptions {
  std::vector<std::size_t> dims{1024, 2048};
  std::size_t repeats = kBenchMinRepeats;
  std::size_t warmup = 5;
  std::vector<NormKind> kinds{NormKind::Sign, NormKind::ColumnWise, NormKind::RowWise,
                              NormKind::SingularValueNS, NormKind::SingularValue};
  std::uint64_t seed = 1;
  NsConfig ns;
};

// Throws ConfigError when a dim lies outside [256, 4096] or repeats < 30.
void validate(const BenchOptions& options);

struct BenchRow {
  NormKind kind;
  std::size_t dim = 0;
  std::size_t samples = 0;
  double median_ns = 0.0;
  double p10_ns = 0.0;
  double p90_ns = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  const BenchRow* find(NormKind kind, std::size_t dim) const;
};

// Linear-interpolated quantile of unsorted samples, q in [0, 1].
double quantile(std::vector<double> samples, double q);

// Wall-clock samples (ns) of `repeats` calls of normalize(kind, G) on one
// d x d Gaussian matrix after `warmup` discarded calls.
std::vector<double> time_normalize(NormKind kind, std::size_t dim, std::size_t repeats,
                                   std::size_t warmup, std::uint64_t seed, const NsConfig& ns = {});

// Same, without the range checks of validate(); used for small-size tests.
BenchReport run_bench_unchecked(const BenchOptions& options);
BenchReport run_bench(const BenchOptions& options);

inline constexpr std::string_view kBenchSchema = "scale_opt.bench/1";
// "# schema: scale_opt.bench/1", header kind,dim,samples,median_ns,p10_ns,p90_ns.
void write_bench_csv(std::ostream& out, const BenchReport& report);

}  // namespace scale
