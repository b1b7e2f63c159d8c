#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scale {

// One weight-matrix family of a model, e.g. 32 copies of a 4096 x 11008 MLP
// projection.
struct MatrixEntry {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint64_t count = 1;

  friend bool operator==(const MatrixEntry&, const MatrixEntry&) = default;
};

// Parameter counts of a model; `matrices` is optional and, when present, must
// add up to pre_last_params + last_layer_params.
struct ModelShape {
  std::string name;
  std::uint64_t pre_last_params = 0;
  std::uint64_t last_layer_params = 0;
  std::uint64_t first_layer_params = 0;
  std::vector<MatrixEntry> matrices;

  std::uint64_t total_params() const noexcept { return pre_last_params + last_layer_params; }
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

void validate(const ModelShape& shape);

// Computed methods derive weights + optimizer state from a ModelShape at
// 2 bytes per scalar. Apollo, ApolloMini, GaLore and Fira are reference-only:
// their published totals are carried verbatim and never recomputed.
enum class MemoryMethod { Sgd, Adafactor, Adam, Muon, Swan, Scale, Apollo, ApolloMini, GaLore, Fira };

std::string_view to_string(MemoryMethod m);
std::optional<MemoryMethod> parse_memory_method(std::string_view name);
bool is_computed(MemoryMethod m) noexcept;

inline constexpr double kBytesPerGb = 1e9;

// Bytes of weights plus optimizer state:
//   Sgd = 2P, Adam = 6P, Muon = 4P, Scale = 2P + 2 last,
//   Swan = 2P + 4 (first + last), Adafactor = 2P + 2 sum(rows + cols).
// Throws ConfigError for reference-only methods and for Adafactor without a
// matrix table.
std::uint64_t memory_estimate(MemoryMethod method, const ModelShape& shape);
double memory_estimate_gb(MemoryMethod method, const ModelShape& shape);

// Published total in GB for a reference-only method on a named model shape.
std::optional<double> reference_memory_gb(MemoryMethod method, std::string_view shape_name);

struct MemoryRow {
  MemoryMethod method;
  double gb = 0.0;
  std::optional<std::uint64_t> bytes;  // set for computed rows
  bool computed = true;
};

// Every computed method the shape supports, then every reference constant
// known for shape.name.
std::vector<MemoryRow> memory_table(const ModelShape& shape);

inline constexpr std::string_view kMemorySchema = "scale_opt.memory/1";
// "# schema: scale_opt.memory/1", header method,gb,bytes,source.
void write_memory_csv(std::ostream& out, const ModelShape& shape, const std::vector<MemoryRow>& rows);

// Shape files are JSON; see docs/formats.md. Throws ConfigError on any
// malformed or inconsistent document.
ModelShape parse_model_shape(std::string_view json_text);
ModelShape load_model_shape(const std::string& path);

}  // namespace scale
