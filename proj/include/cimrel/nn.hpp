#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "cimrel/tensor.hpp"

namespace cimrel {

enum class Activation { relu, identity };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

struct DenseLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  Activation activation = Activation::identity;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feedforward stack of dense layers. The last layer's output are logits
/// consumed by softmax cross-entropy.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Glorot-uniform weights, zero biases. `dims` = {in, hidden..., classes};
  /// hidden layers use `hidden`, the output layer is identity.
  static Mlp initialize(std::span<const std::size_t> dims, std::uint64_t seed,
                        Activation hidden = Activation::relu);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const noexcept { return parameter_count_; }
  std::vector<std::size_t> dims() const;

  ParamVector flatten() const;
  void assign(std::span<const double> params);
  Mlp with_parameters(std::span<const double> params) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer> layers_;
  std::size_t parameter_count_ = 0;
};

/// Labelled samples. Targets are class indices in [0, num_classes).
struct Dataset {
  Tensor inputs;  // [n x d]
  std::vector<int> targets;
  std::size_t num_classes = 0;

  static Dataset make(Tensor inputs, std::vector<int> targets, std::size_t num_classes);

  std::size_t size() const noexcept { return targets.size(); }
  std::size_t dim() const { return inputs.cols(); }
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Logits [n x C]. Throws ShapeError naming the layer on width mismatch.
Tensor forward(const Mlp& model, const Tensor& inputs);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values) noexcept;

/// Per-sample activations kept for backpropagation.
struct ForwardCache {
  std::vector<std::vector<double>> post;  // post[0] = input, post[l+1] = output of layer l
  std::vector<std::vector<double>> pre;   // pre[l] = affine output of layer l

  std::span<const double> logits() const { return post.back(); }
};

ForwardCache forward_sample(const Mlp& model, std::span<const double> input);

/// Accumulates scale * d(cotangent . logits)/d(params) into `grad`.
void backward_sample(const Mlp& model, const ForwardCache& cache, std::span<const double> cotangent,
                     std::span<double> grad, double scale);

struct LossGrad {
  double loss = 0.0;  // mean softmax cross-entropy
  ParamVector grads;
  std::size_t correct = 0;
};

LossGrad loss_and_grads(const Mlp& model, const Dataset& batch);
LossGrad loss_and_grads(const Mlp& model, const Dataset& data, std::span<const std::size_t> indices);

/// Mean softmax cross-entropy without gradients.
double mean_loss(const Mlp& model, const Dataset& data);

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean loss and accuracy from one forward pass.
LossAccuracy evaluate(const Mlp& model, const Dataset& data);

double accuracy(const Mlp& model, const Dataset& data);

struct SgdState {
  ParamVector velocity;
};

/// v <- momentum * v + g;  p <- p - lr * v
void sgd_update(std::span<double> params, std::span<const double> grads, double lr, double momentum,
                SgdState& state);
void sgd_step(Mlp& model, std::span<const double> grads, double lr, double momentum, SgdState& state);

struct TrainConfig {
  std::size_t epochs = 50;
  double lr = 0.1;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Mlp model;
  std::vector<double> loss_history;  // per-epoch mean training loss
};

/// Called once per minibatch with a copy of the clean parameters; whatever
/// it writes is where the gradient gets evaluated. The update is applied to
/// the clean parameters.
using GradientPointHook = std::function<void(std::span<double> params, std::size_t step)>;

TrainResult train(const Mlp& initial, const Dataset& data, const TrainConfig& cfg,
                  const GradientPointHook& hook = {});

}  // namespace cimrel
