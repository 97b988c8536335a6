#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "subspace/activation.hpp"
#include "subspace/combination.hpp"
#include "subspace/extension.hpp"
#include "subspace/matrix.hpp"
#include "subspace/mpc.hpp"
#include "subspace/random.hpp"
#include "subspace/reconstruction.hpp"

namespace subspace {

/// Full fine-tuning baseline: a dense update of the weight and bias.
struct FullState {
  Matrix delta_weight;
  Vector delta_bias;
};

/// Any tuner attachable to a layer.
using TunerState = std::variant<ExtensionState, ReconstructionState, CombinationState, FullState>;

/// Method names accepted by the experiment config.
enum class Method {
  SamParser,
  IA3,
  SSL,
  SSB,
  BitFit,
  LoRA,
  AdaLoRA,
  TriLoRA,
  FLoRA,
  SerialAdapter,
  ParallelAdapter,
  DoRA,
  SVDiff,
  Spectral,
  Full,
};

std::string_view method_name(Method method);
Method parse_method(std::string_view name);
/// The fourteen PEFT methods (everything except Full).
const std::array<Method, 14>& peft_methods();

/// A regularizer that is part of the method itself (AdaLoRA carries MPC_o).
RegularizerKind implicit_regularizer(Method method);

struct TunerOptions {
  std::size_t rank = 4;
  double scale = 1.0;
  Activation activation = Activation::Relu;
  double init_stddev = 0.02;
};

/// Fresh tuner for a layer with frozen weight `w` (n×m) and bias (m).
TunerState make_tuner(Method method, const Matrix& w, const Vector& bias, const TunerOptions& opts,
                      Rng& rng);

/// A named view onto one trainable tensor of a tuner.
struct ParamView {
  std::string_view name;
  std::span<double> values;
};

/// Trainable tensors in a fixed order; frozen SVD caches are excluded.
std::vector<ParamView> trainables(TunerState& state);
std::size_t trainable_count(const TunerState& state);

/// Same structure as `state` with every trainable entry set to zero.
TunerState zeros_like(const TunerState& state);

/// True when the layer output is x·φ(W) + bias for some effective weight.
/// Adapter kinds are input-dependent and return false.
bool is_weight_transform(const TunerState& state);

/// φ(W). Adapter kinds give the identity-input reformulation W + s·ΔW.
Matrix effective_weight(const TunerState& state, const Matrix& w);
/// Bias used in the forward pass (BitFit and Full change it).
Vector effective_bias(const TunerState& state, const Vector& frozen_bias);

/// The (A: n×r, B: r×m) pair a penalty regularizer acts on, if the tuner has one.
struct LowRankPair {
  Matrix* a = nullptr;
  Matrix* b = nullptr;
};
LowRankPair low_rank_pair(TunerState& state);
bool has_low_rank_pair(const TunerState& state);

}  // namespace subspace
