#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scale/matrix.hpp"
#include "scale/optim.hpp"
#include "scale/rng.hpp"

namespace scale {

// Loss and per-block gradients at one parameter point.
struct LossGrad {
  double loss = 0.0;
  std::vector<Matrix> grads;
};

// Gradients over a small batch and over a larger batch that contains it.
struct NestedGradients {
  std::vector<Matrix> small;
  std::vector<Matrix> large;
};

// Deterministic objective: returns the loss and, when `grads` is non-null,
// writes one gradient per block.
using Objective = std::function<double(const Params&, std::vector<Matrix>* grads)>;

// A training problem with exact manual gradients.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual Params initial_params(Rng& rng) const = 0;
  // Stochastic mini-batch gradient at the problem's training batch size.
  virtual LossGrad sample_gradient(const Params& params, Rng& rng) const = 0;
  virtual double full_loss(const Params& params) const = 0;
  virtual std::vector<Matrix> full_gradient(const Params& params) const = 0;
  virtual NestedGradients nested_gradients(const Params& params, std::size_t small_batch,
                                           std::size_t large_batch, Rng& rng) const = 0;
  virtual Objective objective() const = 0;
};

// ---------------------------------------------------------------------------
// Layered noisy quadratic: loss = sum_l (gamma_l / 2) ||theta_l||_F^2, with
// the stochastic gradient gamma_l theta_l + Gaussian noise whose expected
// squared norm is sigma_l^2 at the reference batch size.

struct QuadraticLayer {
  std::string name;
  BlockRole role = BlockRole::Hidden;
  std::size_t rows = 1;
  std::size_t cols = 1;
  double curvature = 1.0;
  double noise_sigma = 0.0;

  friend bool operator==(const QuadraticLayer&, const QuadraticLayer&) = default;
};

struct NoisyQuadratic {
  std::vector<QuadraticLayer> layers;
  // Initial entries are N(0, init_scale^2).
  double init_scale = 1.0;
  // Batch size at which the per-block noise has E||noise||^2 = sigma^2.
  std::size_t reference_batch = 32;

  friend bool operator==(const NoisyQuadratic&, const NoisyQuadratic&) = default;
};

void validate(const NoisyQuadratic& q);
double smoothness(const NoisyQuadratic& q);
double quadratic_loss(const NoisyQuadratic& q, const Params& theta);

// gamma_l theta_l + noise_l with per-entry variance
// sigma_l^2 * batch_variance_scale / entries(l).
std::vector<Matrix> quadratic_grad(const NoisyQuadratic& q, const Params& theta, Rng& rng,
                                   double batch_variance_scale = 1.0);

class QuadraticProblem final : public Problem {
 public:
  explicit QuadraticProblem(NoisyQuadratic spec);

  const NoisyQuadratic& spec() const noexcept { return spec_; }

  Params initial_params(Rng& rng) const override;
  LossGrad sample_gradient(const Params& params, Rng& rng) const override;
  double full_loss(const Params& params) const override;
  std::vector<Matrix> full_gradient(const Params& params) const override;
  NestedGradients nested_gradients(const Params& params, std::size_t small_batch,
                                   std::size_t large_batch, Rng& rng) const override;
  Objective objective() const override;

 private:
  NoisyQuadratic spec_;
};

// ---------------------------------------------------------------------------
// Tanh MLP classifier on synthetic Gaussian-cluster data.
//
// Blocks, in order: embed.w (input x h1, Embedding), hidden{k}.w
// (Hidden), head.w (h_last x classes, OutputHead), each followed by its
// 1 x width bias (Vector) when biases are enabled.
// Weights start at N(0, 1/fan_in), the head at N(0, 1/fan_in^2); biases at 0.

struct MlpSpec {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t classes = 128;
  std::size_t batch = 32;
  std::size_t dataset_size = 65536;
  // x = center[y] + cluster_noise * N(0, I), centers ~ N(0, I).
  double cluster_noise = 1.0;
  bool biases = true;
  std::uint64_t data_seed = 0x5CA1E;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

void validate(const MlpSpec& spec);

struct Batch {
  Matrix x;                      // batch x input_dim
  std::vector<std::size_t> labels;
};

// Mean softmax cross-entropy over the batch and its exact gradient.
// Throws NumericalError when activations or logits are non-finite.
LossGrad mlp_loss_grad(const MlpSpec& spec, const Params& params, const Batch& batch);
double mlp_loss(const MlpSpec& spec, const Params& params, const Batch& batch);

// Block names in parameter order: embed.w, embed.b, hidden1.w, ..., head.b.
std::vector<std::string> block_names(const MlpSpec& spec);

class MlpProblem final : public Problem {
 public:
  explicit MlpProblem(MlpSpec spec);

  const MlpSpec& spec() const noexcept { return spec_; }
  const Matrix& inputs() const noexcept { return inputs_; }
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }

  Batch gather(std::span<const std::size_t> indices) const;

  Params initial_params(Rng& rng) const override;
  LossGrad sample_gradient(const Params& params, Rng& rng) const override;
  double full_loss(const Params& params) const override;
  std::vector<Matrix> full_gradient(const Params& params) const override;
  NestedGradients nested_gradients(const Params& params, std::size_t small_batch,
                                   std::size_t large_batch, Rng& rng) const override;
  // Loss on the first spec().batch samples.
  Objective objective() const override;
  // Loss on the first `batch` samples.
  // Loss on the first `batch` samples. The returned objective caches layer
  // inputs between calls; do not share one instance across threads.
  Objective objective(std::size_t batch) const;

 private:
  LossGrad full_loss_grad(const Params& params, bool want_grads) const;

  MlpSpec spec_;
  Matrix inputs_;
  std::vector<std::size_t> labels_;
};

}  // namespace scale
