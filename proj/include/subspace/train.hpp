#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "subspace/matrix.hpp"
#include "subspace/model.hpp"
#include "subspace/mpc.hpp"
#include "subspace/tuner.hpp"

namespace subspace {

enum class LossKind { MeanSquared, SoftmaxCrossEntropy };

struct LossValue {
  double value = 0.0;
  Matrix grad;  // dL/d(output)
};

/// Mean over every entry of (output − target)².
LossValue mse_loss(const Matrix& output, const Matrix& target);
/// Mean over rows of −log softmax(logits)[label].
LossValue cross_entropy_loss(const Matrix& logits, std::span<const int> labels);
/// Fraction of rows whose arg-max logit equals the label.
double accuracy(const Matrix& logits, std::span<const int> labels);

struct Dataset {
  Matrix inputs;
  Matrix targets;           // MeanSquared
  std::vector<int> labels;  // SoftmaxCrossEntropy
  LossKind loss = LossKind::MeanSquared;

  std::size_t size() const noexcept { return inputs.rows(); }
  Dataset subset(std::span<const std::size_t> rows) const;
};

LossValue evaluate_loss(const Model& model, const Dataset& data, ForwardCache* cache = nullptr);

/// Sum of λ·penalty over every layer with a low-rank factor pair. Zero for
/// None and Nonlinear. Throws UnsupportedKind if a penalty is requested for a
/// tuner without an (A, B) pair.
double regularizer_value(const Model& model, const RegularizerSpec& reg);
void add_regularizer_grad(const Model& model, const RegularizerSpec& reg, ModelGradients& grads);

/// Data loss plus regularizer; the quantity that train() minimizes.
double objective(const Model& model, const Dataset& data, const RegularizerSpec& reg);

enum class OptimizerKind { Sgd, Adam };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Plain SGD or Adam over a fixed list of tensors.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, AdamParams adam = {});
  void step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads);

 private:
  OptimizerKind kind_;
  double lr_;
  AdamParams adam_;
  long t_ = 0;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
};

struct TrainConfig {
  int steps = 2000;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::Adam;
  /// 0 or >= dataset size means full batch.
  std::size_t batch_size = 0;
  RegularizerSpec regularizer;
  /// Activation inserted by MPC_n.
  Activation nonlinear_activation = Activation::Relu;
  /// Overrides the scale s of every attached extension/DoRA tuner when set.
  std::optional<double> scale;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  Vector loss_per_step;  // data loss before each update
  double final_loss = 0.0;
  std::vector<std::optional<TunerState>> final_params;
  std::int64_t wall_clock_ms = 0;
};

/// Updates the tuners of `model` only. Throws DivergenceError if the loss
/// becomes non-finite.
TrainTrace train(Model& model, const Dataset& data, const TrainConfig& config);

/// Gradient-descent helpers spanning every tuner tensor of a model.
std::vector<ParamView> model_trainables(Model& model);
std::vector<ParamView> gradient_views(ModelGradients& grads);

/// Central differences (f(θ+ε) − f(θ−ε)) / 2ε per coordinate of `params`,
/// which are perturbed in place and restored.
Vector finite_diff_grad(const std::function<double()>& loss, std::span<double> params,
                        double epsilon);

}  // namespace subspace
