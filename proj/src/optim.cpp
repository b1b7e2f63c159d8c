#include "scale/optim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "scale/errors.hpp"

namespace scale {

std::string_view to_string(BlockRole role) {
  switch (role) {
    case BlockRole::Embedding: return "embedding";
    case BlockRole::Hidden: return "hidden";
    case BlockRole::OutputHead: return "output_head";
    case BlockRole::Vector: return "vector";
  }
  return "unknown";
}

std::optional<BlockRole> parse_block_role(std::string_view name) {
  for (BlockRole r :
       {BlockRole::Embedding, BlockRole::Hidden, BlockRole::OutputHead, BlockRole::Vector}) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Sgd: return "sgd";
    case Method::Adam: return "adam";
    case Method::SignSgd: return "sign_sgd";
    case Method::SgdM: return "sgdm";
    case Method::NormalizedSgd: return "normalized_sgd";
    case Method::SvdLastMomentum: return "svd_last_momentum";
    case Method::Scale: return "scale";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::Sgd, Method::Adam, Method::SignSgd, Method::SgdM,
                   Method::NormalizedSgd, Method::SvdLastMomentum, Method::Scale}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::string_view to_string(VectorRule r) {
  return r == VectorRule::AdamForVectors ? "adam_for_vectors" : "same_as_matrices";
}

std::optional<VectorRule> parse_vector_rule(std::string_view name) {
  if (name == "adam_for_vectors") return VectorRule::AdamForVectors;
  if (name == "same_as_matrices") return VectorRule::SameAsMatrices;
  return std::nullopt;
}

void validate_params(std::span<const ParamBlock> blocks) {
  std::set<std::string> names;
  int heads = 0;
  for (const auto& b : blocks) {
    if (!names.insert(b.name).second) throw ConfigError("duplicate block name '" + b.name + "'");
    if (b.value.empty()) throw ConfigError("block '" + b.name + "' is empty");
    if (b.role == BlockRole::OutputHead) ++heads;
    if (b.role == BlockRole::Vector && b.value.rows() != 1) {
      throw ConfigError("vector block '" + b.name + "' must have exactly one row");
    }
  }
  if (heads != 1) {
    throw ConfigError("expected exactly one output_head block, found " + std::to_string(heads));
  }
}

void validate(const OptimizerConfig& c) {
  auto in_unit = [](double b) { return b >= 0.0 && b < 1.0; };
  if (!(c.peak_lr > 0.0) || !std::isfinite(c.peak_lr)) throw ConfigError("peak_lr must be > 0");
  if (!in_unit(c.beta1) || !in_unit(c.beta2)) throw ConfigError("beta1/beta2 must lie in [0, 1)");
  if (!(c.eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!in_unit(c.last_beta)) throw ConfigError("last_beta must lie in [0, 1)");
  for (const auto& [name, beta] : c.beta_per_layer) {
    if (!in_unit(beta)) throw ConfigError("beta for block '" + name + "' must lie in [0, 1)");
  }
  for (const auto& [name, mult] : c.lr_multipliers) {
    if (!(mult > 0.0) || !std::isfinite(mult)) {
      throw ConfigError("lr multiplier for block '" + name + "' must be > 0");
    }
  }
  validate(c.ns);
}

bool has_moments(const BlockState& s) noexcept { return !std::holds_alternative<std::monostate>(s); }

double block_lr(const OptimizerConfig& config, const ParamBlock& block, double lr) {
  double out = lr;
  if (auto it = config.lr_multipliers.find(block.name); it != config.lr_multipliers.end()) {
    out *= it->second;
  }
  if (config.lr_scaling && block.role != BlockRole::Vector) {
    const double ratio =
        static_cast<double>(block.value.rows()) / static_cast<double>(block.value.cols());
    out *= std::sqrt(std::max(1.0, ratio));
  }
  return out;
}

namespace {

// Checks shapes, sizes the state vector and advances the step counter.
void begin_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads) {
  if (blocks.size() != grads.size()) {
    throw ShapeError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(blocks.size()) + " blocks");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i].value.same_shape(grads[i])) {
      throw ShapeError("optimizer: gradient shape mismatch for block '" + blocks[i].name + "'");
    }
  }
  if (state.blocks.size() != blocks.size()) {
    if (!state.blocks.empty()) throw ShapeError("optimizer: state was built for other blocks");
    state.blocks.resize(blocks.size());
  }
  ++state.step;
}

void adam_update(BlockState& slot, ParamBlock& block, const Matrix& g,
                 const OptimizerConfig& c, double lr, std::int64_t t) {
  if (!std::holds_alternative<AdamMoments>(slot)) {
    slot = AdamMoments{Matrix(g.rows(), g.cols()), Matrix(g.rows(), g.cols())};
  }
  auto& st = std::get<AdamMoments>(slot);
  const double m_scale =
      c.bias_correction ? 1.0 / (1.0 - std::pow(c.beta1, static_cast<double>(t))) : 1.0;
  const double v_scale =
      c.bias_correction ? 1.0 / (1.0 - std::pow(c.beta2, static_cast<double>(t))) : 1.0;
  auto m = st.m.data();
  auto v = st.v.data();
  auto gs = g.data();
  auto theta = block.value.data();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gs[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gs[i] * gs[i];
    theta[i] -= lr * (m[i] * m_scale) / (std::sqrt(v[i] * v_scale) + c.eps);
  }
}

bool adam_ruled_vector(const OptimizerConfig& c, const ParamBlock& b) {
  return b.role == BlockRole::Vector && c.vector_rule == VectorRule::AdamForVectors;
}

void last_layer_momentum_step(OptState& state, std::span<ParamBlock> blocks,
                              std::span<const Matrix> grads, const OptimizerConfig& c, double lr,
                              NormKind kind) {
  const auto heads = std::count_if(blocks.begin(), blocks.end(), [](const ParamBlock& b) {
    return b.role == BlockRole::OutputHead;
  });
  if (heads != 1) {
    throw ConfigError("last-layer momentum needs exactly one output_head block, found " +
                      std::to_string(heads));
  }
  begin_step(state, blocks, grads);
  const std::int64_t t = state.step;
  const double beta = c.last_beta_schedule ? c.last_beta_schedule(t) : c.last_beta;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    ParamBlock& block = blocks[i];
    const double step = block_lr(c, block, lr);
    if (adam_ruled_vector(c, block)) {
      adam_update(state.blocks[i], block, grads[i], c, step, t);
      continue;
    }
    if (block.role == BlockRole::OutputHead) {
      if (!std::holds_alternative<FirstMoment>(state.blocks[i])) {
        state.blocks[i] = FirstMoment{Matrix(grads[i].rows(), grads[i].cols())};
      }
      Matrix& m = std::get<FirstMoment>(state.blocks[i]).m;
      m *= beta;
      axpy(1.0 - beta, grads[i], m);
      axpy(-step, normalize(kind, m, c.ns), block.value);
    } else {
      axpy(-step, normalize(kind, grads[i], c.ns), block.value);
    }
  }
}

}  // namespace

void sgd_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
              const OptimizerConfig& config, double lr) {
  begin_step(state, blocks, grads);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    axpy(-block_lr(config, blocks[i], lr), grads[i], blocks[i].value);
  }
}

void adam_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
               const OptimizerConfig& config, double lr) {
  begin_step(state, blocks, grads);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    adam_update(state.blocks[i], blocks[i], grads[i], config, block_lr(config, blocks[i], lr),
                state.step);
  }
}

void sign_sgd_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
                   const OptimizerConfig& config, double lr) {
  begin_step(state, blocks, grads);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    axpy(-block_lr(config, blocks[i], lr), sign_normalize(grads[i]), blocks[i].value);
  }
}

void sgdm_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
               const OptimizerConfig& config, double lr) {
  for (const auto& b : blocks) {
    if (!config.beta_per_layer.contains(b.name)) {
      throw ConfigError("sgdm: no beta for block '" + b.name + "'");
    }
  }
  begin_step(state, blocks, grads);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const double beta = config.beta_per_layer.at(blocks[i].name);
    const double step = block_lr(config, blocks[i], lr);
    if (beta == 0.0) {
      axpy(-step, grads[i], blocks[i].value);
      continue;
    }
    if (!std::holds_alternative<FirstMoment>(state.blocks[i])) {
      state.blocks[i] = FirstMoment{Matrix(grads[i].rows(), grads[i].cols())};
    }
    Matrix& m = std::get<FirstMoment>(state.blocks[i]).m;
    m *= beta;
    axpy(1.0 - beta, grads[i], m);
    axpy(-step, m, blocks[i].value);
  }
}

void normalized_sgd_step(OptState& state, std::span<ParamBlock> blocks,
                         std::span<const Matrix> grads, const OptimizerConfig& config, double lr) {
  begin_step(state, blocks, grads);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const double step = block_lr(config, blocks[i], lr);
    if (adam_ruled_vector(config, blocks[i])) {
      adam_update(state.blocks[i], blocks[i], grads[i], config, step, state.step);
    } else {
      axpy(-step, normalize(config.norm, grads[i], config.ns), blocks[i].value);
    }
  }
}

void scale_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
                const OptimizerConfig& config, double lr) {
  last_layer_momentum_step(state, blocks, grads, config, lr, NormKind::ColumnWise);
}

void svd_last_momentum_step(OptState& state, std::span<ParamBlock> blocks,
                            std::span<const Matrix> grads, const OptimizerConfig& config,
                            double lr) {
  last_layer_momentum_step(state, blocks, grads, config, lr, NormKind::SingularValueNS);
}

void optimizer_step(OptState& state, std::span<ParamBlock> blocks, std::span<const Matrix> grads,
                    const OptimizerConfig& config, double lr) {
  switch (config.method) {
    case Method::Sgd: return sgd_step(state, blocks, grads, config, lr);
    case Method::Adam: return adam_step(state, blocks, grads, config, lr);
    case Method::SignSgd: return sign_sgd_step(state, blocks, grads, config, lr);
    case Method::SgdM: return sgdm_step(state, blocks, grads, config, lr);
    case Method::NormalizedSgd: return normalized_sgd_step(state, blocks, grads, config, lr);
    case Method::SvdLastMomentum: return svd_last_momentum_step(state, blocks, grads, config, lr);
    case Method::Scale: return scale_step(state, blocks, grads, config, lr);
  }
  throw ConfigError("optimizer_step: unknown method");
}

std::vector<BlockShape> shapes_of(std::span<const ParamBlock> blocks) {
  std::vector<BlockShape> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    out.push_back({b.name, b.role, b.value.rows(), b.value.cols()});
  }
  return out;
}

std::uint64_t state_bytes(const OptimizerConfig& config, std::span<const BlockShape> blocks) {
  constexpr std::uint64_t kBytesPerScalar = 2;
  std::uint64_t params = 0;
  std::uint64_t head = 0;
  std::uint64_t vectors = 0;
  std::uint64_t momentum_blocks = 0;
  for (const auto& b : blocks) {
    params += b.count();
    if (b.role == BlockRole::OutputHead) head += b.count();
    if (b.role == BlockRole::Vector) vectors += b.count();
    if (auto it = config.beta_per_layer.find(b.name);
        it != config.beta_per_layer.end() && it->second > 0.0) {
      momentum_blocks += b.count();
    }
  }
  const std::uint64_t adam_vectors =
      config.vector_rule == VectorRule::AdamForVectors ? 2 * vectors : 0;
  std::uint64_t scalars = params;
  switch (config.method) {
    case Method::Sgd:
    case Method::SignSgd: break;
    case Method::Adam: scalars += 2 * params; break;
    case Method::SgdM: scalars += momentum_blocks; break;
    case Method::NormalizedSgd: scalars += adam_vectors; break;
    case Method::Scale:
    case Method::SvdLastMomentum: scalars += head + adam_vectors; break;
  }
  return kBytesPerScalar * scalars;
}

std::uint64_t state_bytes(const OptimizerConfig& config, std::span<const ParamBlock> blocks) {
  const auto shapes = shapes_of(blocks);
  return state_bytes(config, std::span<const BlockShape>(shapes));
}

}  // namespace scale
