#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "subspace/tuner.hpp"

namespace subspace {

struct GradCheckOptions {
  int instances = 10;
  double epsilon = 1e-5;
  double tolerance = 1e-5;
  /// Instances with a pre-activation closer than this to a kink are redrawn.
  double kink_margin = 1e-4;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  std::string method;
  std::string tensor;  // "L<layer>.<name>"
  int instance = 0;
  double rel_error = 0.0;
  bool pass = false;
};

/// ‖a − b‖₂ / max(‖a‖₂, ‖b‖₂); zero when both vectors are below 1e-12.
double gradient_relative_error(std::span<const double> a, std::span<const double> b);

/// Compares backward() against finite_diff_grad() for every trainable tensor
/// of each method, on small two-layer models with the method attached to both
/// layers. Each method's built-in regularizer is part of the checked objective.
std::vector<GradCheckResult> run_gradcheck(std::span<const Method> methods,
                                           const GradCheckOptions& opts = {});

/// Same comparison for the soft-prompt gradient, which lives outside the MLP.
std::vector<GradCheckResult> run_soft_prompt_gradcheck(const GradCheckOptions& opts = {});

}  // namespace subspace
