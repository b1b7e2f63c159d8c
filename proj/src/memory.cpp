#include "scale/memory.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "scale/errors.hpp"

namespace scale {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<MemoryMethod, std::string_view>, 10> kNames{{
    {MemoryMethod::Sgd, "sgd"},
    {MemoryMethod::Adafactor, "adafactor"},
    {MemoryMethod::Adam, "adam"},
    {MemoryMethod::Muon, "muon"},
    {MemoryMethod::Swan, "swan"},
    {MemoryMethod::Scale, "scale"},
    {MemoryMethod::Apollo, "apollo"},
    {MemoryMethod::ApolloMini, "apollo_mini"},
    {MemoryMethod::GaLore, "galore"},
    {MemoryMethod::Fira, "fira"},
}};

struct ReferenceEntry {
  std::string_view shape;
  MemoryMethod method;
  double gb;
};

// Published totals (weights + optimizer state) for methods whose layouts
// depend on projection rank and are not modeled here.
constexpr std::array<ReferenceEntry, 6> kReference{{
    {"llama-7b", MemoryMethod::Apollo, 16.144},
    {"llama-7b", MemoryMethod::ApolloMini, 14.531},
    {"llama-1b", MemoryMethod::Apollo, 4.76},
    {"llama-1b", MemoryMethod::ApolloMini, 3.20},
    {"llama-1b", MemoryMethod::GaLore, 4.76},
    {"llama-1b", MemoryMethod::Fira, 4.76},
}};

constexpr std::uint64_t kBytesPerScalar = 2;

std::uint64_t get_count(const json& obj, const char* key, bool required) {
  if (!obj.contains(key)) {
    if (required) throw ConfigError(std::string("shape: missing key '") + key + "'");
    return 0;
  }
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    throw ConfigError(std::string("shape: '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    std::string_view where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) {
      throw ConfigError("shape: unknown key '" + it.key() + "' in " + std::string(where));
    }
  }
}

}  // namespace

void validate(const ModelShape& shape) {
  if (shape.name.empty()) throw ConfigError("shape: name must be non-empty");
  if (shape.pre_last_params == 0) throw ConfigError("shape: pre_last_params must be positive");
  if (shape.last_layer_params == 0) throw ConfigError("shape: last_layer_params must be positive");
  if (shape.first_layer_params > shape.pre_last_params) {
    throw ConfigError("shape: first_layer_params exceeds pre_last_params");
  }
  if (shape.matrices.empty()) return;
  std::uint64_t total = 0;
  for (const auto& m : shape.matrices) {
    if (m.rows == 0 || m.cols == 0 || m.count == 0) {
      throw ConfigError("shape: matrix '" + m.name + "' has a zero dimension or count");
    }
    total += m.rows * m.cols * m.count;
  }
  if (total != shape.total_params()) {
    throw ConfigError("shape: matrix table sums to " + std::to_string(total) +
                      " parameters, expected " + std::to_string(shape.total_params()));
  }
}

std::string_view to_string(MemoryMethod m) {
  for (const auto& [k, n] : kNames) {
    if (k == m) return n;
  }
  return "unknown";
}

std::optional<MemoryMethod> parse_memory_method(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool is_computed(MemoryMethod m) noexcept {
  switch (m) {
    case MemoryMethod::Sgd:
    case MemoryMethod::Adafactor:
    case MemoryMethod::Adam:
    case MemoryMethod::Muon:
    case MemoryMethod::Swan:
    case MemoryMethod::Scale:
      return true;
    default:
      return false;
  }
}

std::uint64_t memory_estimate(MemoryMethod method, const ModelShape& shape) {
  validate(shape);
  const std::uint64_t p = shape.total_params();
  std::uint64_t scalars = 0;
  switch (method) {
    case MemoryMethod::Sgd:
      scalars = p;
      break;
    case MemoryMethod::Adam:
      scalars = 3 * p;
      break;
    case MemoryMethod::Muon:
      scalars = 2 * p;
      break;
    case MemoryMethod::Scale:
      scalars = p + shape.last_layer_params;
      break;
    case MemoryMethod::Swan:
      scalars = p + 2 * (shape.first_layer_params + shape.last_layer_params);
      break;
    case MemoryMethod::Adafactor: {
      if (shape.matrices.empty()) {
        throw ConfigError("memory: adafactor needs the shape's matrix table");
      }
      scalars = p;
      for (const auto& m : shape.matrices) scalars += (m.rows + m.cols) * m.count;
      break;
    }
    default:
      throw ConfigError("memory: '" + std::string(to_string(method)) +
                        "' is reference-only; use reference_memory_gb");
  }
  return kBytesPerScalar * scalars;
}

double memory_estimate_gb(MemoryMethod method, const ModelShape& shape) {
  return static_cast<double>(memory_estimate(method, shape)) / kBytesPerGb;
}

std::optional<double> reference_memory_gb(MemoryMethod method, std::string_view shape_name) {
  for (const auto& e : kReference) {
    if (e.method == method && e.shape == shape_name) return e.gb;
  }
  return std::nullopt;
}

std::vector<MemoryRow> memory_table(const ModelShape& shape) {
  validate(shape);
  std::vector<MemoryRow> rows;
  for (const auto& [m, _] : kNames) {
    if (!is_computed(m)) continue;
    if (m == MemoryMethod::Adafactor && shape.matrices.empty()) continue;
    const auto bytes = memory_estimate(m, shape);
    rows.push_back({m, static_cast<double>(bytes) / kBytesPerGb, bytes, true});
  }
  for (const auto& [m, _] : kNames) {
    if (is_computed(m)) continue;
    if (auto gb = reference_memory_gb(m, shape.name)) rows.push_back({m, *gb, std::nullopt, false});
  }
  return rows;
}

void write_memory_csv(std::ostream& out, const ModelShape& shape,
                      const std::vector<MemoryRow>& rows) {
  out << "# schema: " << kMemorySchema << "\n# shape: " << shape.name << "\n";
  out << "method,gb,bytes,source\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f", r.gb);
    out << to_string(r.method) << ',' << buf << ',';
    if (r.bytes) out << *r.bytes;
    out << ',' << (r.computed ? "computed" : "reference") << '\n';
  }
}

ModelShape parse_model_shape(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("shape: JSON parse error at byte " + std::to_string(e.byte) + ": " +
                      e.what());
  }
  if (!doc.is_object()) throw ConfigError("shape: document must be a JSON object");
  reject_unknown(doc,
                 {"schema_version", "name", "pre_last_params", "last_layer_params",
                  "first_layer_params", "matrices"},
                 "shape");
  if (get_count(doc, "schema_version", true) != 1) {
    throw ConfigError("shape: unsupported schema_version");
  }
  ModelShape shape;
  if (!doc.contains("name") || !doc["name"].is_string()) {
    throw ConfigError("shape: 'name' must be a string");
  }
  shape.name = doc["name"].get<std::string>();
  shape.pre_last_params = get_count(doc, "pre_last_params", true);
  shape.last_layer_params = get_count(doc, "last_layer_params", true);
  shape.first_layer_params = get_count(doc, "first_layer_params", false);
  if (doc.contains("matrices")) {
    const json& list = doc["matrices"];
    if (!list.is_array()) throw ConfigError("shape: 'matrices' must be an array");
    for (const json& item : list) {
      if (!item.is_object()) throw ConfigError("shape: matrix entries must be objects");
      reject_unknown(item, {"name", "rows", "cols", "count"}, "matrix entry");
      MatrixEntry m;
      if (item.contains("name")) {
        if (!item["name"].is_string()) throw ConfigError("shape: matrix 'name' must be a string");
        m.name = item["name"].get<std::string>();
      }
      m.rows = get_count(item, "rows", true);
      m.cols = get_count(item, "cols", true);
      m.count = item.contains("count") ? get_count(item, "count", true) : 1;
      shape.matrices.push_back(std::move(m));
    }
  }
  validate(shape);
  return shape;
}

ModelShape load_model_shape(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("shape: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ConfigError("shape: '" + path + "' is empty");
  }
  return parse_model_shape(text);
}

}  // namespace scale
