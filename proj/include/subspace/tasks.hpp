#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "subspace/matrix.hpp"
#include "subspace/model.hpp"
#include "subspace/train.hpp"

namespace subspace {

/// Planted-rank recovery: a hidden optimum W* = W + X·Yᵀ + noise, observed
/// through probe inputs. Tuners fit probes·φ(W) to probes·W*.
struct RecoveryTask {
  Matrix w;
  Matrix w_star;
  Matrix probe_inputs;  // probes×n
  Matrix targets;       // probes×m
  std::size_t planted_rank = 0;
  double noise_std = 0.0;

  /// Probes and targets as a mean-squared-error dataset.
  Dataset dataset() const;
  /// One frozen linear layer holding W, zero bias.
  Model model() const;
};

inline constexpr std::size_t kDefaultProbes = 64;

RecoveryTask gen_recovery_task(std::uint64_t seed, std::size_t n, std::size_t m,
                               std::size_t planted_rank, double noise_std,
                               std::size_t probes = kDefaultProbes);

/// Two-class 2-D Gaussian mixtures. Task B is task A rotated and shifted.
struct ToyClassification {
  Dataset a_train;
  Dataset a_test;
  Dataset b_train;
  Dataset b_test;
};

struct ToyClassificationOptions {
  std::size_t train_size = 2000;
  std::size_t test_size = 500;
  double rotation_degrees = 45.0;
  double shift_x = 0.75;
  double shift_y = -0.5;
};

ToyClassification gen_toy_classification(std::uint64_t seed,
                                         const ToyClassificationOptions& opts = {});

/// Least-squares linear probe on one-hot targets; returns its accuracy on `test`.
double linear_probe_accuracy(const Dataset& train, const Dataset& test);

struct PretrainOptions {
  std::vector<std::size_t> widths{2, 256, 256, 2};
  int steps = 600;
  double learning_rate = 3e-3;
  std::size_t batch_size = 64;
};

/// Trains every weight of a fresh ReLU MLP on `data` and returns it with the
/// learned weights frozen and no tuners attached.
Model pretrain_backbone(const Dataset& data, std::uint64_t seed, const PretrainOptions& opts = {});

}  // namespace subspace
