#include "scale/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "scale/bench.hpp"
#include "scale/config.hpp"
#include "scale/diagnostics.hpp"
#include "scale/errors.hpp"
#include "scale/memory.hpp"
#include "scale/training.hpp"
#include "scale/verify.hpp"

namespace fs = std::filesystem;

namespace scale {

unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SCALE_OPT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

namespace {

// Runs job(i) for i in [0, count) on up to worker_count(count) threads.
template <class Job>
void parallel_for(std::size_t count, Job job) {
  const unsigned workers = worker_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw ConfigError("failed writing '" + path.string() + "'");
}

struct CommonArgs {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
};

ExperimentConfig load_with_overrides(const CommonArgs& a) {
  ExperimentConfig cfg = load_experiment_config(a.config);
  if (!a.seeds.empty()) cfg.seeds = a.seeds;
  if (!a.out.empty()) cfg.output = a.out;
  validate(cfg);
  return cfg;
}

int cmd_train(const CommonArgs& a, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load_with_overrides(a);
  const auto problem = make_problem(cfg);
  const LrSchedule schedule = schedule_of(cfg);
  std::vector<std::string> csv(cfg.seeds.size());
  std::vector<char> diverged(cfg.seeds.size(), 0);
  parallel_for(cfg.seeds.size(), [&](std::size_t i) {
    const TrainResult r =
        run_training(*problem, cfg.optimizer, schedule, cfg.steps, cfg.seeds[i]);
    std::ostringstream s;
    write_trace_csv(s, r.trace);
    csv[i] = s.str();
    diverged[i] = r.trace.diverged ? 1 : 0;
  });
  bool any_diverged = false;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const fs::path path = fs::path(cfg.output) / ("trace_seed" + std::to_string(cfg.seeds[i]) + ".csv");
    write_file(path, csv[i]);
    out << "wrote " << path.string() << "\n";
    if (diverged[i]) {
      err << "seed " << cfg.seeds[i] << ": training diverged\n";
      any_diverged = true;
    }
  }
  return any_diverged ? kExitFailure : kExitOk;
}

int cmd_variance(const CommonArgs& a, std::ostream& out, std::ostream&) {
  const ExperimentConfig cfg = load_with_overrides(a);
  const auto problem = make_problem(cfg);
  const LrSchedule schedule = schedule_of(cfg);
  std::vector<std::string> csv(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), [&](std::size_t i) {
    const VarianceTrace t =
        track_variance(*problem, cfg.optimizer, schedule, cfg.steps, cfg.seeds[i],
                       cfg.variance.protocol, cfg.variance.draws, cfg.variance.every);
    std::ostringstream s;
    write_variance_csv(s, t);
    csv[i] = s.str();
  });
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const fs::path path =
        fs::path(cfg.output) / ("variance_seed" + std::to_string(cfg.seeds[i]) + ".csv");
    write_file(path, csv[i]);
    out << "wrote " << path.string() << "\n";
  }
  return kExitOk;
}

int emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
    out << "wrote " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_bench(const std::vector<std::size_t>& dims, std::size_t repeats,
              const std::string& out_path, std::ostream& out) {
  BenchOptions opts;
  if (!dims.empty()) opts.dims = dims;
  opts.repeats = repeats;
  validate(opts);
  std::ostringstream s;
  write_bench_csv(s, run_bench(opts));
  return emit(s.str(), out_path, out);
}

int cmd_memory(const std::string& shape_path, const std::string& out_path, std::ostream& out) {
  const ModelShape shape = load_model_shape(shape_path);
  std::ostringstream s;
  write_memory_csv(s, shape, memory_table(shape));
  return emit(s.str(), out_path, out);
}

int cmd_verify(const std::string& config_path, std::ostream& out) {
  VerifyOptions opts;
  if (!config_path.empty()) opts.ns = load_experiment_config(config_path).optimizer.ns;
  const VerifyReport report = run_verify(opts);
  print_verify_report(out, report);
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"scale_opt: column-normalized optimizers with last-layer momentum"};
  app.name("scale_opt");
  app.require_subcommand(1);

  CommonArgs train_args;
  auto* train = app.add_subcommand("train", "Train one run per seed and write trace CSVs");
  train->add_option("--config", train_args.config, "Experiment config (JSON)")->required();
  train->add_option("--out", train_args.out, "Output directory (overrides the config)");
  train->add_option("--seeds", train_args.seeds, "Comma-separated seeds")->delimiter(',');

  CommonArgs var_args;
  auto* variance = app.add_subcommand("variance", "Track per-block gradient variance");
  variance->add_option("--config", var_args.config, "Experiment config (JSON)")->required();
  variance->add_option("--out", var_args.out, "Output directory (overrides the config)");
  variance->add_option("--seeds", var_args.seeds, "Comma-separated seeds")->delimiter(',');

  std::vector<std::size_t> dims;
  std::size_t repeats = kBenchMinRepeats;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench-norms", "Time the five normalizations");
  bench->add_option("--dims", dims, "Comma-separated square sizes in [256, 4096]")
      ->delimiter(',');
  bench->add_option("--repeats", repeats, "Timed calls per kind and size (>= 30)");
  bench->add_option("--out", bench_out, "CSV path (default: standard output)");

  std::string shape_path;
  std::string memory_out;
  auto* memory = app.add_subcommand("memory", "Weights + optimizer-state memory table");
  memory->add_option("--config,--shape", shape_path, "Model shape (JSON)")->required();
  memory->add_option("--out", memory_out, "CSV path (default: standard output)");

  std::string verify_config;
  auto* verify = app.add_subcommand("verify", "Run the property suites");
  verify->add_option("--config", verify_config, "Experiment config whose ns block is used");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_args, out, err);
    if (*variance) return cmd_variance(var_args, out, err);
    if (*bench) return cmd_bench(dims, repeats, bench_out, out);
    if (*memory) return cmd_memory(shape_path, memory_out, out);
    if (*verify) return cmd_verify(verify_config, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace scale
