#include "scale/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "scale/errors.hpp"
#include "scale/platform.hpp"
#include "scale/rng.hpp"

namespace scale {

void validate(const BenchOptions& options) {
  if (options.dims.empty()) throw ConfigError("bench: dims must be non-empty");
  for (std::size_t d : options.dims) {
    if (d < kBenchMinDim || d > kBenchMaxDim) {
      throw ConfigError("bench: dim " + std::to_string(d) + " outside [256, 4096]");
    }
  }
  if (options.repeats < kBenchMinRepeats) throw ConfigError("bench: repeats must be >= 30");
  if (options.kinds.empty()) throw ConfigError("bench: kinds must be non-empty");
}

const BenchRow* BenchReport::find(NormKind kind, std::size_t dim) const {
  for (const auto& r : rows) {
    if (r.kind == kind && r.dim == dim) return &r;
  }
  return nullptr;
}

double quantile(std::vector<double> samples, double q) {
  if (samples.empty()) throw ConfigError("quantile: no samples");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile: q must lie in [0, 1]");
  std::sort(samples.begin(), samples.end());
  const double pos = q * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, samples.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return samples[lo] + frac * (samples[hi] - samples[lo]);
}

std::vector<double> time_normalize(NormKind kind, std::size_t dim, std::size_t repeats,
                                   std::size_t warmup, std::uint64_t seed, const NsConfig& ns) {
  // Time the kernels, not the allocator's page faults.
  retain_freed_memory();
  Rng rng(seed);
  const Matrix g = rng.normal_matrix(dim, dim);
  volatile double sink = 0.0;
  for (std::size_t i = 0; i < warmup; ++i) sink = sink + normalize(kind, g, ns)(0, 0);
  std::vector<double> samples;
  samples.reserve(repeats);
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const Matrix d = normalize(kind, g, ns);
    const auto stop = std::chrono::steady_clock::now();
    sink = sink + d(0, 0);
    samples.push_back(std::chrono::duration<double, std::nano>(stop - start).count());
  }
  return samples;
}

BenchReport run_bench_unchecked(const BenchOptions& options) {
  BenchReport report;
  for (std::size_t d : options.dims) {
    for (NormKind kind : options.kinds) {
      auto samples = time_normalize(kind, d, options.repeats, options.warmup, options.seed,
                                    options.ns);
      BenchRow row{kind, d, samples.size(), quantile(samples, 0.5), quantile(samples, 0.1),
                   quantile(samples, 0.9)};
      report.rows.push_back(row);
    }
  }
  return report;
}

BenchReport run_bench(const BenchOptions& options) {
  validate(options);
  return run_bench_unchecked(options);
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << "# schema: " << kBenchSchema << "\n";
  out << "kind,dim,samples,median_ns,p10_ns,p90_ns\n";
  char buf[96];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.0f,%.0f,%.0f", r.median_ns, r.p10_ns, r.p90_ns);
    out << to_string(r.kind) << ',' << r.dim << ',' << r.samples << ',' << buf << '\n';
  }
}

}  // namespace scale
