#include "scale/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scale/errors.hpp"

namespace scale {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Typed access to one JSON object; remembers its path for diagnostics.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_ + " must be an object");
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      bool ok = false;
      for (auto k : keys) ok = ok || it.key() == k;
      if (!ok) fail("unknown key '" + key_path(it.key()) + "'");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json& at(const char* key) const {
    if (!obj_.contains(key)) fail("missing key '" + key_path(key) + "'");
    return obj_.at(key);
  }

  void read(const char* key, double& out) const {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) fail("'" + key_path(key) + "' must be a number");
    out = v.get<double>();
  }

  void read(const char* key, bool& out) const {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) fail("'" + key_path(key) + "' must be a boolean");
    out = v.get<bool>();
  }

  void read(const char* key, std::string& out) const {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) fail("'" + key_path(key) + "' must be a string");
    out = v.get<std::string>();
  }

  void read(const char* key, std::size_t& out) const {
    if (!has(key)) return;
    out = static_cast<std::size_t>(unsigned_value(key));
  }

  void read(const char* key, std::int64_t& out) const {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) fail("'" + key_path(key) + "' must be an integer");
    out = v.get<std::int64_t>();
  }

  void read(const char* key, int& out) const {
    std::int64_t v = out;
    read(key, v);
    out = static_cast<int>(v);
  }

  std::uint64_t unsigned_value(const char* key) const {
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned()) fail("'" + key_path(key) + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string key_path(std::string_view key) const { return path_ + "." + std::string(key); }
  const std::string& path() const { return path_; }

  [[noreturn]] static void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

 private:
  const json& obj_;
  std::string path_;
};

template <class Enum, class Parse>
Enum read_enum(const Fields& f, const char* key, Enum fallback, Parse parse) {
  std::string name;
  f.read(key, name);
  if (name.empty()) return fallback;
  const auto v = parse(name);
  if (!v) Fields::fail("'" + f.key_path(key) + "' has unknown value '" + name + "'");
  return *v;
}

std::map<std::string, double> read_number_map(const Fields& f, const char* key) {
  std::map<std::string, double> out;
  if (!f.has(key)) return out;
  const json& m = f.at(key);
  if (!m.is_object()) Fields::fail("'" + f.key_path(key) + "' must be an object");
  for (auto it = m.begin(); it != m.end(); ++it) {
    if (!it.value().is_number()) {
      Fields::fail("'" + f.key_path(key) + "." + it.key() + "' must be a number");
    }
    out[it.key()] = it.value().get<double>();
  }
  return out;
}

NoisyQuadratic parse_quadratic(const Fields& f) {
  f.allow({"type", "layers", "init_scale", "reference_batch"});
  NoisyQuadratic q;
  f.read("init_scale", q.init_scale);
  f.read("reference_batch", q.reference_batch);
  const json& layers = f.at("layers");
  if (!layers.is_array()) Fields::fail("'" + f.key_path("layers") + "' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Fields lf(layers[i], f.key_path("layers") + "[" + std::to_string(i) + "]");
    lf.allow({"name", "role", "rows", "cols", "curvature", "noise_sigma"});
    QuadraticLayer layer;
    lf.read("name", layer.name);
    layer.role = read_enum(lf, "role", BlockRole::Hidden, parse_block_role);
    lf.read("rows", layer.rows);
    lf.read("cols", layer.cols);
    lf.read("curvature", layer.curvature);
    lf.read("noise_sigma", layer.noise_sigma);
    q.layers.push_back(std::move(layer));
  }
  return q;
}

MlpSpec parse_mlp(const Fields& f) {
  f.allow({"type", "input_dim", "hidden", "classes", "batch", "dataset_size", "cluster_noise",
           "biases", "data_seed"});
  MlpSpec s;
  f.read("input_dim", s.input_dim);
  if (f.has("hidden")) {
    const json& h = f.at("hidden");
    if (!h.is_array()) Fields::fail("'" + f.key_path("hidden") + "' must be an array");
    s.hidden.clear();
    for (const json& w : h) {
      if (!w.is_number_unsigned()) {
        Fields::fail("'" + f.key_path("hidden") + "' entries must be positive integers");
      }
      s.hidden.push_back(w.get<std::size_t>());
    }
  }
  f.read("classes", s.classes);
  f.read("batch", s.batch);
  f.read("dataset_size", s.dataset_size);
  f.read("cluster_noise", s.cluster_noise);
  f.read("biases", s.biases);
  if (f.has("data_seed")) s.data_seed = f.unsigned_value("data_seed");
  return s;
}

OptimizerConfig parse_optimizer(const Fields& f) {
  f.allow({"method", "norm", "peak_lr", "beta1", "beta2", "eps", "bias_correction",
           "beta_per_layer", "last_beta", "vector_rule", "lr_scaling", "lr_multipliers", "ns"});
  OptimizerConfig c;
  if (!f.has("method")) Fields::fail("missing key '" + f.key_path("method") + "'");
  c.method = read_enum(f, "method", c.method, parse_method);
  c.norm = read_enum(f, "norm", c.norm, parse_norm_kind);
  f.read("peak_lr", c.peak_lr);
  f.read("beta1", c.beta1);
  f.read("beta2", c.beta2);
  f.read("eps", c.eps);
  f.read("bias_correction", c.bias_correction);
  c.beta_per_layer = read_number_map(f, "beta_per_layer");
  f.read("last_beta", c.last_beta);
  c.vector_rule = read_enum(f, "vector_rule", c.vector_rule, parse_vector_rule);
  f.read("lr_scaling", c.lr_scaling);
  c.lr_multipliers = read_number_map(f, "lr_multipliers");
  if (f.has("ns")) {
    const Fields nf(f.at("ns"), f.key_path("ns"));
    nf.allow({"steps", "a", "b", "c"});
    nf.read("steps", c.ns.steps);
    nf.read("a", c.ns.a);
    nf.read("b", c.ns.b);
    nf.read("c", c.ns.c);
  }
  return c;
}

ordered_json problem_json(const NoisyQuadratic& q) {
  ordered_json j;
  j["type"] = "quadratic";
  j["init_scale"] = q.init_scale;
  j["reference_batch"] = q.reference_batch;
  j["layers"] = ordered_json::array();
  for (const auto& l : q.layers) {
    ordered_json lj;
    lj["name"] = l.name;
    lj["role"] = std::string(to_string(l.role));
    lj["rows"] = l.rows;
    lj["cols"] = l.cols;
    lj["curvature"] = l.curvature;
    lj["noise_sigma"] = l.noise_sigma;
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

ordered_json problem_json(const MlpSpec& s) {
  ordered_json j;
  j["type"] = "mlp";
  j["input_dim"] = s.input_dim;
  j["hidden"] = s.hidden;
  j["classes"] = s.classes;
  j["batch"] = s.batch;
  j["dataset_size"] = s.dataset_size;
  j["cluster_noise"] = s.cluster_noise;
  j["biases"] = s.biases;
  j["data_seed"] = s.data_seed;
  return j;
}

ordered_json optimizer_json(const OptimizerConfig& c) {
  ordered_json j;
  j["method"] = std::string(to_string(c.method));
  j["norm"] = std::string(to_string(c.norm));
  j["peak_lr"] = c.peak_lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["bias_correction"] = c.bias_correction;
  j["beta_per_layer"] = ordered_json::object();
  for (const auto& [k, v] : c.beta_per_layer) j["beta_per_layer"][k] = v;
  j["last_beta"] = c.last_beta;
  j["vector_rule"] = std::string(to_string(c.vector_rule));
  j["lr_scaling"] = c.lr_scaling;
  j["lr_multipliers"] = ordered_json::object();
  for (const auto& [k, v] : c.lr_multipliers) j["lr_multipliers"][k] = v;
  j["ns"] = {{"steps", c.ns.steps}, {"a", c.ns.a}, {"b", c.ns.b}, {"c", c.ns.c}};
  return j;
}

}  // namespace

bool same_settings(const OptimizerConfig& a, const OptimizerConfig& b) {
  return a.method == b.method && a.norm == b.norm && a.peak_lr == b.peak_lr &&
         a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.eps == b.eps &&
         a.bias_correction == b.bias_correction && a.beta_per_layer == b.beta_per_layer &&
         a.last_beta == b.last_beta && a.vector_rule == b.vector_rule &&
         a.lr_scaling == b.lr_scaling && a.lr_multipliers == b.lr_multipliers && a.ns == b.ns;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.problem == b.problem && same_settings(a.optimizer, b.optimizer) &&
         a.warmup_frac == b.warmup_frac && a.floor_frac == b.floor_frac && a.steps == b.steps &&
         a.seeds == b.seeds && a.output == b.output && a.variance == b.variance;
}

void validate(const ExperimentConfig& config) {
  std::visit([](const auto& p) { validate(p); }, config.problem);
  validate(config.optimizer);
  if (config.steps < 1) throw ConfigError("config: steps must be >= 1");
  if (config.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
  validate(schedule_of(config));
  validate(config.variance.protocol);
  if (config.variance.draws < 1) throw ConfigError("config: variance.draws must be >= 1");
  if (config.variance.every < 1) throw ConfigError("config: variance.every must be >= 1");
  if (config.optimizer.method == Method::SgdM) {
    std::vector<std::string> names;
    if (const auto* q = std::get_if<NoisyQuadratic>(&config.problem)) {
      for (const auto& l : q->layers) names.push_back(l.name);
    } else {
      names = block_names(std::get<MlpSpec>(config.problem));
    }
    for (const auto& n : names) {
      if (!config.optimizer.beta_per_layer.contains(n)) {
        throw ConfigError("config: optimizer.beta_per_layer has no entry for block '" + n + "'");
      }
    }
  }
}

LrSchedule schedule_of(const ExperimentConfig& config) {
  return LrSchedule{config.steps, config.warmup_frac, config.floor_frac, config.optimizer.peak_lr};
}

std::unique_ptr<Problem> make_problem(const ExperimentConfig& config) {
  if (const auto* q = std::get_if<NoisyQuadratic>(&config.problem)) {
    return std::make_unique<QuadraticProblem>(*q);
  }
  return std::make_unique<MlpProblem>(std::get<MlpSpec>(config.problem));
}

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("config: JSON parse error at byte " + std::to_string(e.byte) + ": " +
                      e.what());
  }
  const Fields root(doc, "$");
  root.allow({"schema_version", "problem", "optimizer", "schedule", "steps", "seeds", "output",
              "variance"});
  std::int64_t version = 0;
  if (!root.has("schema_version")) Fields::fail("missing key '$.schema_version'");
  root.read("schema_version", version);
  if (version != kConfigSchemaVersion) {
    Fields::fail("unsupported schema_version " + std::to_string(version));
  }

  ExperimentConfig c;
  const Fields pf(root.at("problem"), "$.problem");
  std::string type;
  pf.read("type", type);
  if (type == "quadratic") {
    c.problem = parse_quadratic(pf);
  } else if (type == "mlp") {
    c.problem = parse_mlp(pf);
  } else {
    Fields::fail("'$.problem.type' must be \"quadratic\" or \"mlp\"");
  }

  c.optimizer = parse_optimizer(Fields(root.at("optimizer"), "$.optimizer"));

  if (root.has("schedule")) {
    const Fields sf(root.at("schedule"), "$.schedule");
    sf.allow({"warmup_frac", "floor_frac"});
    sf.read("warmup_frac", c.warmup_frac);
    sf.read("floor_frac", c.floor_frac);
  }

  if (!root.has("steps")) Fields::fail("missing key '$.steps'");
  root.read("steps", c.steps);

  if (root.has("seeds")) {
    const json& s = root.at("seeds");
    if (!s.is_array()) Fields::fail("'$.seeds' must be an array");
    c.seeds.clear();
    for (const json& v : s) {
      if (!v.is_number_unsigned()) Fields::fail("'$.seeds' entries must be non-negative integers");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  root.read("output", c.output);

  if (root.has("variance")) {
    const Fields vf(root.at("variance"), "$.variance");
    vf.allow({"small_batch", "large_batch", "window", "draws", "every"});
    vf.read("small_batch", c.variance.protocol.small_batch);
    vf.read("large_batch", c.variance.protocol.large_batch);
    vf.read("window", c.variance.protocol.window);
    vf.read("draws", c.variance.draws);
    vf.read("every", c.variance.every);
  }

  validate(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["problem"] = std::visit([](const auto& p) { return problem_json(p); }, c.problem);
  j["optimizer"] = optimizer_json(c.optimizer);
  j["schedule"] = {{"warmup_frac", c.warmup_frac}, {"floor_frac", c.floor_frac}};
  j["steps"] = c.steps;
  j["seeds"] = c.seeds;
  j["output"] = c.output;
  j["variance"] = {{"small_batch", c.variance.protocol.small_batch},
                   {"large_batch", c.variance.protocol.large_batch},
                   {"window", c.variance.protocol.window},
                   {"draws", c.variance.draws},
                   {"every", c.variance.every}};
  return j.dump(2) + "\n";
}

}  // namespace scale
