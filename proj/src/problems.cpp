#include "scale/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>
#include <string>

#include "scale/errors.hpp"

namespace scale {

// ---------------------------------------------------------------------------
// Noisy quadratic

void validate(const NoisyQuadratic& q) {
  if (q.layers.empty()) throw ConfigError("quadratic: at least one layer required");
  if (q.reference_batch == 0) throw ConfigError("quadratic: reference_batch must be >= 1");
  if (!(q.init_scale >= 0.0)) throw ConfigError("quadratic: init_scale must be >= 0");
  int heads = 0;
  for (const auto& l : q.layers) {
    if (l.rows == 0 || l.cols == 0) throw ConfigError("quadratic: layer '" + l.name + "' is empty");
    if (!(l.curvature > 0.0)) throw ConfigError("quadratic: curvature must be > 0");
    if (!(l.noise_sigma >= 0.0)) throw ConfigError("quadratic: noise_sigma must be >= 0");
    if (l.role == BlockRole::OutputHead) ++heads;
  }
  if (heads != 1) throw ConfigError("quadratic: exactly one output_head layer required");
}

double smoothness(const NoisyQuadratic& q) {
  double g = 0.0;
  for (const auto& l : q.layers) g = std::max(g, l.curvature);
  return g;
}

double quadratic_loss(const NoisyQuadratic& q, const Params& theta) {
  double loss = 0.0;
  for (std::size_t l = 0; l < q.layers.size(); ++l) {
    loss += 0.5 * q.layers[l].curvature * squared_frobenius_norm(theta[l].value);
  }
  return loss;
}

std::vector<Matrix> quadratic_grad(const NoisyQuadratic& q, const Params& theta, Rng& rng,
                                   double batch_variance_scale) {
  if (theta.size() != q.layers.size()) throw ShapeError("quadratic_grad: block count mismatch");
  std::vector<Matrix> grads;
  grads.reserve(theta.size());
  for (std::size_t l = 0; l < q.layers.size(); ++l) {
    const auto& layer = q.layers[l];
    const Matrix& value = theta[l].value;
    if (value.rows() != layer.rows || value.cols() != layer.cols) {
      throw ShapeError("quadratic_grad: shape mismatch for '" + layer.name + "'");
    }
    Matrix g = value;
    g *= layer.curvature;
    if (layer.noise_sigma > 0.0) {
      const double sd = layer.noise_sigma *
                        std::sqrt(batch_variance_scale / static_cast<double>(value.size()));
      for (double& v : g.data()) v += sd * rng.normal();
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

QuadraticProblem::QuadraticProblem(NoisyQuadratic spec) : spec_(std::move(spec)) {
  validate(spec_);
}

Params QuadraticProblem::initial_params(Rng& rng) const {
  Params out;
  for (const auto& l : spec_.layers) {
    out.push_back({l.name, l.role, rng.normal_matrix(l.rows, l.cols, spec_.init_scale)});
  }
  return out;
}

LossGrad QuadraticProblem::sample_gradient(const Params& params, Rng& rng) const {
  return {quadratic_loss(spec_, params), quadratic_grad(spec_, params, rng, 1.0)};
}

double QuadraticProblem::full_loss(const Params& params) const {
  return quadratic_loss(spec_, params);
}

std::vector<Matrix> QuadraticProblem::full_gradient(const Params& params) const {
  std::vector<Matrix> out;
  for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
    out.push_back(spec_.layers[l].curvature * params[l].value);
  }
  return out;
}

// The large batch is the small batch plus (large - small) further samples:
// g_large = (small * g_small + (large - small) * g_rest) / large.
NestedGradients QuadraticProblem::nested_gradients(const Params& params, std::size_t small_batch,
                                                   std::size_t large_batch, Rng& rng) const {
  if (small_batch == 0 || large_batch <= small_batch) {
    throw ConfigError("nested_gradients: need 0 < small_batch < large_batch");
  }
  const double ref = static_cast<double>(spec_.reference_batch);
  const double bs = static_cast<double>(small_batch);
  const double bl = static_cast<double>(large_batch);
  NestedGradients out;
  out.small = quadratic_grad(spec_, params, rng, ref / bs);
  const auto rest = quadratic_grad(spec_, params, rng, ref / (bl - bs));
  for (std::size_t l = 0; l < rest.size(); ++l) {
    Matrix g = out.small[l];
    g *= bs / bl;
    axpy((bl - bs) / bl, rest[l], g);
    out.large.push_back(std::move(g));
  }
  return out;
}

Objective QuadraticProblem::objective() const {
  return [spec = spec_](const Params& params, std::vector<Matrix>* grads) {
    if (grads != nullptr) {
      grads->clear();
      for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        grads->push_back(spec.layers[l].curvature * params[l].value);
      }
    }
    return quadratic_loss(spec, params);
  };
}

// ---------------------------------------------------------------------------
// MLP

void validate(const MlpSpec& s) {
  if (s.input_dim == 0 || s.classes < 2) throw ConfigError("mlp: input_dim >= 1, classes >= 2");
  if (s.hidden.size() < 2) {
    throw ConfigError("mlp: need at least two hidden widths (embedding + one hidden block)");
  }
  if (std::any_of(s.hidden.begin(), s.hidden.end(), [](std::size_t w) { return w == 0; })) {
    throw ConfigError("mlp: hidden widths must be >= 1");
  }
  if (s.batch == 0) throw ConfigError("mlp: batch must be >= 1");
  if (s.dataset_size < s.batch) throw ConfigError("mlp: dataset_size must be >= batch");
  if (!(s.cluster_noise >= 0.0)) throw ConfigError("mlp: cluster_noise must be >= 0");
}

namespace {

std::size_t layer_count(const MlpSpec& s) { return s.hidden.size() + 1; }

std::size_t weight_index(const MlpSpec& s, std::size_t layer) {
  return layer * (s.biases ? 2 : 1);
}

std::size_t layer_in(const MlpSpec& s, std::size_t layer) {
  return layer == 0 ? s.input_dim : s.hidden[layer - 1];
}

std::size_t layer_out(const MlpSpec& s, std::size_t layer) {
  return layer < s.hidden.size() ? s.hidden[layer] : s.classes;
}

std::string layer_name(const MlpSpec& s, std::size_t layer) {
  if (layer == 0) return "embed";
  if (layer + 1 == layer_count(s)) return "head";
  return "hidden" + std::to_string(layer);
}

// out = x * w + 1 * b^T
Matrix affine(const Matrix& x, const Matrix& w, const Matrix* b) {
  Matrix z = matmul(x, w);
  if (b != nullptr) {
    const auto bias = b->data();
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto r = z.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
    }
  }
  return z;
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  auto o = out.data();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) o[j] += r[j];
  }
  return out;
}

void check_params(const MlpSpec& s, const Params& params) {
  const std::size_t expected = layer_count(s) * (s.biases ? 2 : 1);
  if (params.size() != expected) {
    throw ShapeError("mlp: expected " + std::to_string(expected) + " blocks, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < layer_count(s); ++k) {
    const Matrix& w = params[weight_index(s, k)].value;
    if (w.rows() != layer_in(s, k) || w.cols() != layer_out(s, k)) {
      throw ShapeError("mlp: weight shape mismatch in layer " + layer_name(s, k));
    }
    if (s.biases) {
      const Matrix& b = params[weight_index(s, k) + 1].value;
      if (b.rows() != 1 || b.cols() != layer_out(s, k)) {
        throw ShapeError("mlp: bias shape mismatch in layer " + layer_name(s, k));
      }
    }
  }
}

}  // namespace

namespace {

// Layer inputs from the previous call on the same batch. Layers whose
// parameters (and those of every layer below) are bitwise unchanged are
// not recomputed.
struct ForwardCache {
  Params params;
  std::vector<Matrix> activations;
};

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

bool same_layer(const MlpSpec& spec, const Params& a, const Params& b, std::size_t layer) {
  const std::size_t wi = weight_index(spec, layer);
  if (!same_bits(a[wi].value, b[wi].value)) return false;
  return !spec.biases || same_bits(a[wi + 1].value, b[wi + 1].value);
}

LossGrad mlp_eval(const MlpSpec& spec, const Params& params, const Batch& batch, bool want_grads,
                  ForwardCache* cache = nullptr) {
  check_params(spec, params);
  const std::size_t n = batch.labels.size();
  if (n == 0 || batch.x.rows() != n) throw ShapeError("mlp_loss_grad: empty or ragged batch");
  if (batch.x.cols() != spec.input_dim) throw ShapeError("mlp_loss_grad: input width mismatch");

  const std::size_t layers = layer_count(spec);
  // activations[k] is the input of layer k; activations[0] is the batch.
  std::vector<Matrix> local;
  std::vector<Matrix>& activations = cache != nullptr ? cache->activations : local;
  std::size_t first = 0;
  if (cache != nullptr && !cache->params.empty()) {
    while (first + 1 < layers && same_layer(spec, cache->params, params, first)) ++first;
  } else {
    activations.assign(layers, Matrix());
    activations[0] = batch.x;
  }
  Matrix logits;
  for (std::size_t k = first; k < layers; ++k) {
    const std::size_t wi = weight_index(spec, k);
    const Matrix* bias = spec.biases ? &params[wi + 1].value : nullptr;
    Matrix z = affine(activations[k], params[wi].value, bias);
    if (k + 1 == layers) {
      logits = std::move(z);
    } else {
      for (double& v : z.data()) v = std::tanh(v);
      activations[k + 1] = std::move(z);
    }
  }
  if (cache != nullptr) {
    if (cache->params.empty()) {
      cache->params = params;
    } else {
      for (std::size_t b = weight_index(spec, first); b < params.size(); ++b) {
        cache->params[b].value = params[b].value;
      }
    }
  }
  if (!all_finite(logits)) throw NumericalError("mlp_loss_grad: non-finite logits");

  // Softmax cross-entropy; dlogits = (softmax - onehot) / n.
  Matrix dlogits;
  if (want_grads) dlogits = Matrix(n, spec.classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = batch.labels[i];
    if (y >= spec.classes) throw ShapeError("mlp_loss_grad: label out of range");
    auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double denom = 0.0;
    for (double v : r) denom += std::exp(v - mx);
    const double log_denom = std::log(denom);
    loss += log_denom - (r[y] - mx);
    if (!want_grads) continue;
    auto d = dlogits.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      d[j] = std::exp(r[j] - mx - log_denom) / static_cast<double>(n);
    }
    d[y] -= 1.0 / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw NumericalError("mlp_loss_grad: non-finite loss");
  if (!want_grads) return {loss, {}};

  LossGrad out{loss, std::vector<Matrix>(params.size())};
  Matrix delta = std::move(dlogits);
  for (std::size_t k = layers; k-- > 0;) {
    const std::size_t wi = weight_index(spec, k);
    out.grads[wi] = matmul(transpose(activations[k]), delta);
    if (spec.biases) out.grads[wi + 1] = column_sums(delta);
    if (k == 0) break;
    Matrix upstream = matmul(delta, transpose(params[wi].value));
    const Matrix& h = activations[k];
    auto u = upstream.data();
    auto hv = h.data();
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= 1.0 - hv[i] * hv[i];
    delta = std::move(upstream);
  }
  return out;
}

}  // namespace

LossGrad mlp_loss_grad(const MlpSpec& spec, const Params& params, const Batch& batch) {
  return mlp_eval(spec, params, batch, true);
}

double mlp_loss(const MlpSpec& spec, const Params& params, const Batch& batch) {
  return mlp_eval(spec, params, batch, false).loss;
}

std::vector<std::string> block_names(const MlpSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < layer_count(spec); ++k) {
    out.push_back(layer_name(spec, k) + ".w");
    if (spec.biases) out.push_back(layer_name(spec, k) + ".b");
  }
  return out;
}

MlpProblem::MlpProblem(MlpSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  Rng rng(spec_.data_seed);
  const Matrix centers = rng.normal_matrix(spec_.classes, spec_.input_dim);
  inputs_ = Matrix(spec_.dataset_size, spec_.input_dim);
  labels_.resize(spec_.dataset_size);
  for (std::size_t i = 0; i < spec_.dataset_size; ++i) {
    const std::size_t y = rng.below(spec_.classes);
    labels_[i] = y;
    auto row = inputs_.row(i);
    auto c = centers.row(y);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = c[j] + spec_.cluster_noise * rng.normal();
  }
}

Batch MlpProblem::gather(std::span<const std::size_t> indices) const {
  Batch b{Matrix(indices.size(), spec_.input_dim), {}};
  b.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto src = inputs_.row(indices[k]);
    std::copy(src.begin(), src.end(), b.x.row(k).begin());
    b.labels.push_back(labels_[indices[k]]);
  }
  return b;
}

Params MlpProblem::initial_params(Rng& rng) const {
  Params out;
  for (std::size_t k = 0; k < layer_count(spec_); ++k) {
    const std::size_t in = layer_in(spec_, k);
    const std::size_t width = layer_out(spec_, k);
    const BlockRole role = k == 0                             ? BlockRole::Embedding
                           : k + 1 == layer_count(spec_)      ? BlockRole::OutputHead
                                                              : BlockRole::Hidden;
    const std::string name = layer_name(spec_, k);
    // Readout at 1/fan_in, the rest at 1/sqrt(fan_in).
    const double fan_in = static_cast<double>(in);
    const double stddev = role == BlockRole::OutputHead ? 1.0 / fan_in : 1.0 / std::sqrt(fan_in);
    out.push_back({name + ".w", role, rng.normal_matrix(in, width, stddev)});
    if (spec_.biases) out.push_back({name + ".b", BlockRole::Vector, Matrix(1, width)});
  }
  return out;
}

LossGrad MlpProblem::sample_gradient(const Params& params, Rng& rng) const {
  std::vector<std::size_t> idx(spec_.batch);
  for (auto& i : idx) i = rng.below(spec_.dataset_size);
  return mlp_loss_grad(spec_, params, gather(idx));
}

LossGrad MlpProblem::full_loss_grad(const Params& params, bool want_grads) const {
  constexpr std::size_t kChunk = 4096;
  LossGrad total;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < spec_.dataset_size; start += kChunk) {
    const std::size_t end = std::min(start + kChunk, spec_.dataset_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const LossGrad part = mlp_eval(spec_, params, gather(idx), want_grads);
    const double w = static_cast<double>(end - start) / static_cast<double>(spec_.dataset_size);
    total.loss += w * part.loss;
    if (!want_grads) continue;
    if (total.grads.empty()) {
      for (const auto& g : part.grads) total.grads.emplace_back(g.rows(), g.cols());
    }
    for (std::size_t b = 0; b < part.grads.size(); ++b) axpy(w, part.grads[b], total.grads[b]);
  }
  return total;
}

double MlpProblem::full_loss(const Params& params) const {
  return full_loss_grad(params, false).loss;
}

std::vector<Matrix> MlpProblem::full_gradient(const Params& params) const {
  return full_loss_grad(params, true).grads;
}

NestedGradients MlpProblem::nested_gradients(const Params& params, std::size_t small_batch,
                                             std::size_t large_batch, Rng& rng) const {
  if (small_batch == 0 || large_batch <= small_batch) {
    throw ConfigError("nested_gradients: need 0 < small_batch < large_batch");
  }
  std::vector<std::size_t> idx(large_batch);
  for (auto& i : idx) i = rng.below(spec_.dataset_size);
  NestedGradients out;
  out.small = mlp_loss_grad(spec_, params, gather(std::span(idx).first(small_batch))).grads;
  out.large = mlp_loss_grad(spec_, params, gather(idx)).grads;
  return out;
}

Objective MlpProblem::objective() const { return objective(spec_.batch); }

Objective MlpProblem::objective(std::size_t batch) const {
  if (batch == 0 || batch > spec_.dataset_size) throw ConfigError("mlp objective: bad batch size");
  std::vector<std::size_t> idx(batch);
  std::iota(idx.begin(), idx.end(), 0);
  auto cache = std::make_shared<ForwardCache>();
  return [spec = spec_, fixed = gather(idx), cache](const Params& params,
                                                     std::vector<Matrix>* grads) {
    if (grads == nullptr) return mlp_eval(spec, params, fixed, false, cache.get()).loss;
    LossGrad r = mlp_loss_grad(spec, params, fixed);
    *grads = std::move(r.grads);
    return r.loss;
  };
}

}  // namespace scale
