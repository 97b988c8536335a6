#pragma once

#include <cstddef>
#include <optional>

#include "subspace/matrix.hpp"
#include "subspace/svd.hpp"

namespace subspace {

/// Reconstruction tuners: φ(W) = f(W) rearranges the existing subspace of W.
enum class ReconstructionKind {
  SingularValues,  // W* = U·diag(σ')·Vᵀ (SAM-PARSER)
  IA3,             // W·diag(d2)
  SSL,             // diag(d1)·W
  SSB,             // diag(d1)·W·diag(d2)
  BitFit,          // trainable bias row of the augmented [W; bᵀ]
  SoftPrompt,      // trainable leading rows of the augmented [P; W]
};

const char* to_string(ReconstructionKind kind);

struct ReconstructionState {
  ReconstructionKind kind = ReconstructionKind::SSB;
  Vector sigma_prime;  // min(n, m) entries
  Vector d1;           // n row scales
  Vector d2;           // m column scales
  Vector bias;         // m entries
  Matrix prompt;       // l_p × m
  std::optional<SvdFactors> frozen;
};

/// Fresh state leaving φ(W) = W. SingularValues caches svd(w) here, once.
ReconstructionState init_reconstruction(ReconstructionKind kind, const Matrix& w,
                                        const Vector& frozen_bias = {},
                                        std::size_t prompt_rows = 1);

Matrix mode1_apply(const ReconstructionState& state, const Matrix& w);
Matrix ia3_apply(const ReconstructionState& state, const Matrix& w);
Matrix ssl_apply(const ReconstructionState& state, const Matrix& w);
Matrix ssb_apply(const ReconstructionState& state, const Matrix& w);

/// Effective weight for `state`. BitFit and SoftPrompt leave W unchanged
/// (they act on the bias path and on extra output rows respectively).
Matrix apply(const ReconstructionState& state, const Matrix& w);

/// Max-abs residual between U·D₁·Σ·D₂·Vᵀ and U·Σ̂·Vᵀ with Σ̂ = D₁ΣD₂, evaluated
/// from svd(w). `d1` has n entries, `d2` has m.
double column_scale_is_sigma_adjustment(const Matrix& w, const Vector& d1, const Vector& d2);

/// [W; biasᵀ], an (n+1)×m matrix.
Matrix augment_bias(const Matrix& w, const Vector& bias);
/// [x | 1], the input matching augment_bias.
Matrix augment_bias_input(const Matrix& x);
/// x·W + 1·biasᵀ.
Matrix bitfit_forward(const Matrix& x, const Matrix& w, const Vector& bias);

/// [P; W], an (l_p+n)×m matrix.
Matrix augment_prompt(const Matrix& w, const Matrix& prompt);
/// [[I_l, 0], [0, x]], the input matching augment_prompt.
Matrix augment_prompt_input(const Matrix& x, std::size_t prompt_rows);
/// [P; x·W].
Matrix soft_prompt_forward(const Matrix& x, const Matrix& w, const Matrix& prompt);
/// Gradient of the prompt given the gradient of the soft_prompt_forward output.
Matrix soft_prompt_backward(const Matrix& output_grad, std::size_t prompt_rows);

}  // namespace subspace
