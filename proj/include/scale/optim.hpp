#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scale/matrix.hpp"
#include "scale/normalize.hpp"

namespace scale {

enum class BlockRole { Embedding, Hidden, OutputHead, Vector };

std::string_view to_string(BlockRole role);
std::optional<BlockRole> parse_block_role(std::string_view name);

// A named trainable tensor. Vector-role blocks are stored as 1 x k.
struct ParamBlock {
  std::string name;
  BlockRole role = BlockRole::Hidden;
  Matrix value;
};

using Params = std::vector<ParamBlock>;

// Names unique, exactly one OutputHead, Vector blocks have one row.
void validate_params(std::span<const ParamBlock> blocks);

enum class Method { Sgd, Adam, SignSgd, SgdM, NormalizedSgd, SvdLastMomentum, Scale };
enum class VectorRule { AdamForVectors, SameAsMatrices };

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view name);
std::string_view to_string(VectorRule r);
std::optional<VectorRule> parse_vector_rule(std::string_view name);

struct OptimizerConfig {
  Method method = Method::Scale;
  // Normalization used by Method::NormalizedSgd.
  NormKind norm = NormKind::ColumnWise;
  double peak_lr = 1e-3;

  // Adam moments. With bias_correction off the update is the plain
  // m / (sqrt(v) + eps) form with no 1 - beta^t factors.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool bias_correction = true;

  // SgdM: momentum per block name; every block needs an entry.
  std::map<std::string, double> beta_per_layer;

  // Scale / SvdLastMomentum: momentum of the OutputHead block.
  double last_beta = 0.9;

  // Normalized methods (NormalizedSgd, Scale, SvdLastMomentum) only.
  VectorRule vector_rule = VectorRule::AdamForVectors;

  // Multiply a matrix block's step size by sqrt(max(1, rows / cols)).
  bool lr_scaling = false;
  // Extra per-block step-size multipliers (default 1).
  std::map<std::string, double> lr_multipliers;

  NsConfig ns;

  // Optional per-step override of last_beta (t is 1-based). Not serialized.
  std::function<double(std::int64_t)> last_beta_schedule;
};

void validate(const OptimizerConfig& config);

struct FirstMoment {
  Matrix m;
};
struct AdamMoments {
  Matrix m;
  Matrix v;
};
using BlockState = std::variant<std::monostate, FirstMoment, AdamMoments>;

// Per-block optimizer memory; `step` counts completed updates.
struct OptState {
  std::vector<BlockState> blocks;
  std::int64_t step = 0;
};

bool has_moments(const BlockState& s) noexcept;

// Each *_step applies one update with base step size `lr` (normally
// lr_at(schedule, t)) and advances state.step. Gradients must match the
// blocks one-to-one in shape; ShapeError otherwise.
void sgd_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
              const OptimizerConfig& config, double lr);
void adam_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
               const OptimizerConfig& config, double lr);
void sign_sgd_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
                   const OptimizerConfig& config, double lr);
void sgdm_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
               const OptimizerConfig& config, double lr);
void normalized_sgd_step(OptState& state, std::span<ParamBlock> blocks,
                         std::span<const Matrix> grads, const OptimizerConfig& config, double lr);
void scale_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
                const OptimizerConfig& config, double lr);
void svd_last_momentum_step(OptState& state, std::span<ParamBlock> blocks,
                            std::span<const Matrix> grads, const OptimizerConfig& config,
                            double lr);

// Dispatches on config.method.
void optimizer_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
                    const OptimizerConfig& config, double lr);

// Effective step size of one block: lr * multiplier * optional shape scaling.
double block_lr(const OptimizerConfig& config, const ParamBlock& block, double lr);

struct BlockShape {
  std::string name;
  BlockRole role = BlockRole::Hidden;
  std::uint64_t rows = 1;
  std::uint64_t cols = 1;

  std::uint64_t count() const noexcept { return rows * cols; }
};

std::vector<BlockShape> shapes_of(std::span<const ParamBlock> blocks);

// Bytes of weights plus optimizer state at 2 bytes per stored scalar.
std::uint64_t state_bytes(const OptimizerConfig& config, std::span<const BlockShape> blocks);
std::uint64_t state_bytes(const OptimizerConfig& config, std::span<const ParamBlock> blocks);

}  // namespace scale
