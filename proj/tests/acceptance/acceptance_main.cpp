// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scale/bench.hpp"
#include "scale/cli.hpp"
#include "scale/diagnostics.hpp"
#include "scale/platform.hpp"
#include "scale/problems.hpp"
#include "scale/training.hpp"
#include "scale/verify.hpp"

using namespace scale;
namespace fs = std::filesystem;

namespace {

const std::string kSource = SCALE_OPT_SOURCE_DIR;

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_scale_opt(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "scale_opt");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text != nullptr) *out_text = out.str();
  if (code != 0) std::cerr << err.str();
  return code;
}

// ---------------------------------------------------------------------------

Outcome memory_table_reproduction() {
  const std::map<std::string, std::map<std::string, double>> published{
      {"llama-7b", {{"sgd", 13.476}, {"adam", 40.428}, {"muon", 26.952}, {"swan", 14.524}, {"scale", 13.738}}},
      {"llama-1b", {{"sgd", 2.678}, {"adam", 8.034}, {"muon", 5.356}, {"swan", 3.202}, {"scale", 2.809}}}};
  Outcome o{true, ""};
  for (const auto& [shape, figures] : published) {
    std::string csv;
    if (run_scale_opt({"memory", "--shape", kSource + "/data/shapes/" + shape + ".json"}, &csv) != 0) {
      return {false, "memory command failed for " + shape};
    }
    std::map<std::string, double> got;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("method,", 0) == 0) continue;
      const auto comma = line.find(',');
      got[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    for (const auto& [method, gb] : figures) {
      const auto it = got.find(method);
      const double err = it == got.end() ? 1e9 : std::abs(it->second - gb);
      if (err > 0.01) {
        o.passed = false;
        o.detail += shape + "/" + method + " off by " + fmt("%.4f", err) + "; ";
      }
    }
  }
  o.detail += "10 figures checked against the published totals";
  return o;
}

Outcome normalization_timing_order() {
  BenchOptions opts;  // d = 1024, 2048; 5 warmup calls; 30 timed calls
  const BenchReport r = run_bench(opts);
  Outcome o{true, ""};
  for (std::size_t d : opts.dims) {
    auto med = [&](NormKind k) { return r.find(k, d)->median_ns / 1e6; };
    const double sign = med(NormKind::Sign), col = med(NormKind::ColumnWise),
                 row = med(NormKind::RowWise), ns = med(NormKind::SingularValueNS),
                 svd = med(NormKind::SingularValue);
    const bool ok = sign < col && sign < row && std::max(col, row) < ns && ns < svd;
    if (!ok) o.passed = false;
    o.detail += "d=" + std::to_string(d) + " ms sign " + fmt("%.2f", sign) + " col " +
                fmt("%.2f", col) + " row " + fmt("%.2f", row) + " ns " + fmt("%.1f", ns) +
                " svd " + fmt("%.1f", svd) + (ok ? " ordered; " : " MISORDERED; ");
  }
  return o;
}

Outcome suite_outcome(const std::vector<SuiteResult>& suites) {
  Outcome o{true, ""};
  for (const auto& s : suites) {
    if (!s.passed) o.passed = false;
    o.detail += s.name + ": " + s.detail + "; ";
  }
  return o;
}

Outcome lmo_optimality() {
  const VerifyOptions opts;
  return suite_outcome({verify_lmo_optimality(opts), verify_duality(opts)});
}

Outcome orthogonalization() { return suite_outcome({verify_orthogonality(VerifyOptions{})}); }

Outcome gradient_correctness() {
  const MlpProblem p{MlpSpec{}};
  double worst = 0.0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = Rng(seed).split(1);
    const auto report = finite_diff_check(p, p.initial_params(rng), 1e-5);
    ok = ok && report.passed;
    for (const auto& b : report.blocks) worst = std::max(worst, b.max_rel_error);
  }
  return {ok, "20 inits of the 32-64-64-128 MLP, worst relative error " + fmt("%.2e", worst)};
}

Outcome ema_law() {
  VerifyOptions opts;
  opts.ema_replicas = 100000;
  return suite_outcome({verify_ema_law(opts)});
}

// Time-averaged sum of squared full-gradient norms of an SGD-M run.
double averaged_grad_sq(const QuadraticProblem& p, const std::vector<double>& betas, double eta,
                        std::int64_t steps, std::uint64_t seed) {
  OptimizerConfig c;
  c.method = Method::SgdM;
  c.peak_lr = eta;
  for (std::size_t l = 0; l < betas.size(); ++l) c.beta_per_layer[p.spec().layers[l].name] = betas[l];
  double total = 0.0;
  run_training(p, c, constant_schedule(steps, eta), steps, seed, [&](const StepView& v) {
    for (const auto& g : p.full_gradient(v.params)) total += squared_frobenius_norm(g);
  });
  return total / static_cast<double>(steps);
}

Outcome last_layer_momentum() {
  NoisyQuadratic q;
  q.layers = {{"l1", BlockRole::Embedding, 8, 8, 1.0, 0.1},
              {"l2", BlockRole::Hidden, 8, 8, 1.0, 0.1},
              {"l3", BlockRole::OutputHead, 8, 8, 1.0, 10.0}};
  const QuadraticProblem p(q);
  const double eta = 0.2;
  int wins = 0;
  double ratio_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double with = averaged_grad_sq(p, {0.0, 0.0, 0.9}, eta, 2000, seed);
    const double without = averaged_grad_sq(p, {0.0, 0.0, 0.0}, eta, 2000, seed);
    if (with < without) ++wins;
    ratio_sum += with / without;
  }
  return {wins >= 9, std::to_string(wins) + "/10 seeds favor (0,0,0.9) at eta 0.2, mean ratio " +
                         fmt("%.3f", ratio_sum / 10)};
}

double mean_final_loss(const MlpProblem& p, Method method, double lr, std::int64_t steps) {
  OptimizerConfig c;
  c.method = method;
  c.peak_lr = lr;
  const LrSchedule s{steps, 0.1, 0.1, lr};
  double sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TrainResult r = run_training(p, c, s, steps, seed);
    sum += r.trace.diverged ? INFINITY : p.full_loss(r.params);
  }
  return sum / 5.0;
}

Outcome scale_vs_sgd() {
  const MlpProblem p{MlpSpec{}};
  const std::vector<std::pair<Method, std::vector<double>>> grids{
      {Method::Scale, {0.01, 0.03, 0.1}}, {Method::Sgd, {0.3, 1.0, 3.0}}, {Method::Adam, {0.003, 0.01, 0.03}}};
  std::map<Method, double> best;
  std::string detail;
  for (const auto& [method, lrs] : grids) {
    best[method] = INFINITY;
    detail += std::string(to_string(method)) + " [";
    for (double lr : lrs) {
      const double loss = mean_final_loss(p, method, lr, 3000);
      best[method] = std::min(best[method], loss);
      detail += fmt("%g", lr) + ":" + fmt("%.4f", loss) + " ";
    }
    detail += "] ";
  }
  const double sc = best[Method::Scale], sgd = best[Method::Sgd], adam = best[Method::Adam];
  const bool ok = sc < sgd && sc <= 1.2 * adam;
  return {ok, detail + "best scale " + fmt("%.4f", sc) + " sgd " + fmt("%.4f", sgd) + " adam " +
                  fmt("%.4f", adam)};
}

std::vector<std::string> digests(const Problem& p, const OptimizerConfig& c, std::uint64_t seed) {
  std::vector<std::string> out;
  const TrainResult r = run_training(p, c, LrSchedule{100, 0.1, 0.1, c.peak_lr}, 100, seed,
                                     [&](const StepView& v) { out.push_back(params_digest(v.params)); });
  out.push_back(r.trace.final_params_digest);
  return out;
}

Outcome equivalence_chain() {
  NoisyQuadratic q;
  q.layers = {{"embed", BlockRole::Embedding, 6, 8, 1.0, 0.5},
              {"hidden", BlockRole::Hidden, 8, 8, 2.0, 0.5},
              {"head", BlockRole::OutputHead, 8, 10, 1.0, 5.0}};
  const QuadraticProblem quad(q);
  MlpSpec small;
  small.dataset_size = 4096;
  const MlpProblem mlp(small);

  OptimizerConfig scale0;
  scale0.method = Method::Scale;
  scale0.peak_lr = 0.02;
  scale0.last_beta = 0.0;
  OptimizerConfig colwise = scale0;
  colwise.method = Method::NormalizedSgd;
  colwise.norm = NormKind::ColumnWise;

  OptimizerConfig sgd;
  sgd.method = Method::Sgd;
  sgd.peak_lr = 0.1;
  OptimizerConfig sgdm0 = sgd;
  sgdm0.method = Method::SgdM;

  bool ok = true;
  std::string detail;
  for (const Problem* p : {static_cast<const Problem*>(&quad), static_cast<const Problem*>(&mlp)}) {
    Rng probe(0);
    for (const auto& b : p->initial_params(probe)) sgdm0.beta_per_layer[b.name] = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) {
      const bool a = digests(*p, scale0, seed) == digests(*p, colwise, seed);
      const bool b = digests(*p, sgdm0, seed) == digests(*p, sgd, seed);
      ok = ok && a && b;
    }
    sgdm0.beta_per_layer.clear();
  }
  detail = "Scale(beta=0) vs NormalizedSgd(ColumnWise) and SgdM(beta=0) vs Sgd, per-step parameter "
           "digests over 100 steps on quadratic and MLP, seeds 1-3: ";
  return {ok, detail + (ok ? "identical" : "DIFFER")};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "scale_opt_acceptance";
  fs::remove_all(root);
  bool ok = true;
  std::size_t files = 0;
  for (const char* name : {"quadratic_scale", "mlp_scale", "quadratic_last_layer_momentum"}) {
    const std::string cfg = kSource + "/configs/" + name + ".json";
    const fs::path a = root / name / "a";
    const fs::path b = root / name / "b";
    if (run_scale_opt({"train", "--config", cfg, "--out", a.string(), "--seeds", "1,2"}) != 0 ||
        run_scale_opt({"train", "--config", cfg, "--out", b.string(), "--seeds", "1,2"}) != 0) {
      return {false, std::string("train failed for ") + name};
    }
    for (const char* f : {"trace_seed1.csv", "trace_seed2.csv"}) {
      const std::string x = slurp(a / f);
      ok = ok && !x.empty() && x == slurp(b / f);
      ++files;
    }
  }
  fs::remove_all(root);
  return {ok, std::to_string(files) + " trace CSVs compared byte for byte across repeated runs"};
}

}  // namespace

// Optional arguments pick criteria by number, e.g. `acceptance 7 8`.
int main(int argc, char** argv) {
  select_blas_kernels(argv);
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double limit_seconds;
  };
  const std::vector<Criterion> criteria{
      {"memory table", memory_table_reproduction, 1},
      {"normalization timing order", normalization_timing_order, 300},
      {"LMO optimality and duality", lmo_optimality, 120},
      {"orthogonalization", orthogonalization, 60},
      {"MLP gradient correctness", gradient_correctness, 120},
      {"EMA variance law", ema_law, 180},
      {"last-layer momentum under dominant head noise", last_layer_momentum, 300},
      {"SCALE vs SGD vs Adam on the MLP", scale_vs_sgd, 900},
      {"equivalence chain", equivalence_chain, INFINITY},
      {"train determinism", determinism, INFINITY},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int a = 1; a < argc; ++a) {
    const int n = std::atoi(argv[a]);
    if (n >= 1 && n <= static_cast<int>(criteria.size())) selected[n - 1] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(start);
    if (secs >= criteria[i].limit_seconds) {
      o.passed = false;
      o.detail += " [over the " + fmt("%.0f", criteria[i].limit_seconds) + "s limit]";
    }
    if (!o.passed) ++failed;
    std::cout << (o.passed ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": "
              << criteria[i].name << " (" << fmt("%.1f", secs) << "s) " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "acceptance: all criteria passed"
                            : "acceptance: " + std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
