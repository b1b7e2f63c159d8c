#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "scale/normalize.hpp"

namespace scale {

struct VerifyOptions {
  NsConfig ns;
  std::uint64_t seed = 20250101;
  std::size_t lmo_matrices = 200;   // per kind, sizes 2x3 .. 8x8
  std::size_t lmo_trials = 1000;    // sampled feasible directions per matrix
  std::size_t ortho_matrices = 20;  // per size
  std::size_t grad_inits = 20;
  std::size_t ema_replicas = 100000;
  std::int64_t ema_steps = 200;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;

  bool passed() const;
};

// -normalize(kind, g) minimizes <g, D> over sampled feasible D for every
// exact kind.
SuiteResult verify_lmo_optimality(const VerifyOptions& options);
// <g, normalize(kind, g)> equals dual_norm(kind, g) within 1e-9.
SuiteResult verify_duality(const VerifyOptions& options);
// Exact UV^T is orthogonal to 1e-8; Newton-Schulz output has singular values
// in [0.3, 1.5] and stays within 0.35 sqrt(r) of UV^T.
SuiteResult verify_orthogonality(const VerifyOptions& options);
// MLP and quadratic gradients against central differences.
SuiteResult verify_gradients(const VerifyOptions& options);
// Simulated EMA deviation variance within 3 standard errors of the closed form.
SuiteResult verify_ema_law(const VerifyOptions& options);

VerifyReport run_verify(const VerifyOptions& options);
void print_verify_report(std::ostream& out, const VerifyReport& report);

}  // namespace scale
