#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "subspace/activation.hpp"
#include "subspace/matrix.hpp"
#include "subspace/random.hpp"
#include "subspace/tuner.hpp"

namespace subspace {

/// Frozen part of one dense layer: out = activation(x·W + bias).
struct FrozenLayer {
  Matrix weight;
  Vector bias;
  Activation activation = Activation::Identity;
};

/// Multi-layer perceptron with frozen weights and optional per-layer tuners.
///
/// Frozen weights are fixed at construction; only tuners change afterwards.
class Model {
 public:
  Model() = default;
  explicit Model(std::vector<FrozenLayer> layers, std::uint64_t seed = 0);

  /// widths = {in, h1, ..., out}; He-initialized weights, zero bias.
  static Model mlp(std::span<const std::size_t> widths, Activation hidden, Activation output,
                   Rng& rng);

  std::size_t depth() const noexcept { return layers_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  const FrozenLayer& layer(std::size_t i) const { return layers_.at(i); }

  std::optional<TunerState>& tuner(std::size_t i) { return tuners_.at(i); }
  const std::optional<TunerState>& tuner(std::size_t i) const { return tuners_.at(i); }
  void attach(std::size_t i, TunerState state);
  void detach(std::size_t i) { tuners_.at(i).reset(); }

  std::size_t input_dim() const;
  std::size_t output_dim() const;

  /// Frozen parameter count (weights and biases).
  std::size_t backbone_count() const;
  /// Trainable parameter count over all attached tuners.
  std::size_t trainable_count() const;
  /// FNV-1a over the bytes of every frozen weight and bias.
  std::uint64_t frozen_hash() const;

  /// Copy whose frozen weights and biases are the current effective ones; no tuners.
  Model merged() const;

 private:
  std::vector<FrozenLayer> layers_;
  std::vector<std::optional<TunerState>> tuners_;
  std::uint64_t seed_ = 0;
};

/// Intermediates saved by forward() for backward().
struct LayerCache {
  Matrix input;
  Matrix weight;  // φ(W), or the frozen W for adapter kinds
  Matrix pre_activation;
  Matrix adapter_base;  // serial adapter: x·W
  Matrix adapter_pre;   // adapter: input of h
  Matrix adapter_act;   // adapter: h(adapter_pre)
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix output;
};

ForwardCache forward(const Model& model, const Matrix& x);
inline Matrix predict(const Model& model, const Matrix& x) { return forward(model, x).output; }

/// Per-layer gradients shaped like the attached tuners (nullopt where none).
using ModelGradients = std::vector<std::optional<TunerState>>;

/// Chain rule from dL/d(output) back to every trainable tuner tensor.
/// Throws DomainError when the cache does not belong to this model.
ModelGradients backward(const Model& model, const ForwardCache& cache, const Matrix& output_grad);

/// Vector-Jacobian product of φ(W) for weight-transform tuners: given
/// G = dL/dφ(W), writes dL/dθ into `grad` (shaped like `state`).
void weight_transform_vjp(const TunerState& state, const Matrix& w, const Matrix& weight_grad,
                          TunerState& grad);

/// Pre-activations within `margin` of a kink (ReLU inputs, SVDiff clamps).
bool near_kink(const Model& model, const ForwardCache& cache, double margin);

}  // namespace subspace
