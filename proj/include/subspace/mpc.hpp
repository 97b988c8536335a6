#pragma once

#include <string_view>

#include "subspace/activation.hpp"
#include "subspace/extension.hpp"
#include "subspace/matrix.hpp"

namespace subspace {

/// Matrix Pattern Constraints on a factor pair (A: n×r, B: r×m).
///
/// Orthogonal and Diagonal are penalties added to the training loss with
/// weight lambda. Nonlinear is structural: it rewrites a LoRA tuner into a
/// parallel adapter at attach time and has no scalar value.
enum class RegularizerKind { None, Orthogonal, Diagonal, Nonlinear };

std::string_view to_string(RegularizerKind kind);
/// Accepts none|o|d|n (and mpc_o / mpc_d / mpc_n).
RegularizerKind parse_regularizer(std::string_view name);

struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::None;
  double lambda = 1e-3;

  bool is_penalty() const noexcept {
    return kind == RegularizerKind::Orthogonal || kind == RegularizerKind::Diagonal;
  }
};

/// Orthogonal: ‖AᵀA − I‖²_F + ‖BBᵀ − I‖²_F.
/// Diagonal:   ‖AᵀA − I‖²_F + ‖BBᵀ − diag(BBᵀ)‖²_F.
double mpc_value(RegularizerKind kind, const Matrix& a, const Matrix& b);

struct MpcGradient {
  Matrix grad_a;
  Matrix grad_b;
};

/// Analytic gradient of mpc_value: 4A(AᵀA − I) and 4(BBᵀ − T)B with T = I or diag(BBᵀ).
MpcGradient mpc_grad(RegularizerKind kind, const Matrix& a, const Matrix& b);

/// LoRA → parallel adapter sharing A and B, with h between the two products.
ExtensionState mpc_n_wrap(const ExtensionState& state, Activation h);

}  // namespace subspace
