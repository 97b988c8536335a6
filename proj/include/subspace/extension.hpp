#pragma once

#include <cstddef>

#include "subspace/activation.hpp"
#include "subspace/matrix.hpp"
#include "subspace/random.hpp"

namespace subspace {

/// Extension tuners: φ(W) = W + s·ΔW with a low-rank addition term.
enum class ExtensionKind {
  LoRA,             // ΔW = A·B
  ADB,              // ΔW = A·diag(d)·B  (AdaLoRA / TriLoRA form)
  AGB,              // ΔW = A·G·B        (FLoRA form)
  SerialAdapter,    // z → z + h(z·A)·B on the layer output
  ParallelAdapter,  // x·W + h(x·A)·B
};

const char* to_string(ExtensionKind kind);

/// Trainable state of one extension tuner attached to an n×m weight.
///
/// `a` is n×r (m×r for SerialAdapter, which acts on the layer output) and `b`
/// is r×m. `d` is used by ADB only, `g` by AGB only; `activation` by the
/// adapter kinds only.
struct ExtensionState {
  ExtensionKind kind = ExtensionKind::LoRA;
  Matrix a;
  Matrix b;
  Vector d;
  Matrix g;
  double scale = 1.0;
  Activation activation = Activation::Relu;

  std::size_t rank() const noexcept { return b.rows(); }
};

struct ExtensionInit {
  double a_stddev = 0.02;
  double scale = 1.0;
  Activation activation = Activation::Relu;
};

/// Fresh state for an n×m weight: A Gaussian, B = 0, d = 1, G = I, so ΔW = 0.
ExtensionState init_extension(ExtensionKind kind, std::size_t n, std::size_t m, std::size_t r,
                              Rng& rng, const ExtensionInit& opts = {});

/// The addition term ΔW (without the scale s). Adapter kinds use the frozen
/// weight with an identity input: serial → h(W·A)·B, parallel → h(A)·B.
Matrix delta(const ExtensionState& state, const Matrix& w);
/// ΔW for the weight-free kinds (LoRA, ADB, AGB); throws UnsupportedKind otherwise.
Matrix delta(const ExtensionState& state);

/// W + s·ΔW.
Matrix apply(const ExtensionState& state, const Matrix& w);

struct EquivalentFactors {
  Matrix a_star;     // A·U·Σ
  Matrix b_diamond;  // Vᵀ·B
};

/// Rewrites A·G·B as A*·B⋄ through the SVD G = U·Σ·Vᵀ; the product is preserved.
EquivalentFactors equivalence_transform(const Matrix& a, const Matrix& g, const Matrix& b);

struct ConstrainedFactors {
  Matrix a;      // U_r (n×r), AᵀA = I_r
  Matrix b;      // V_rᵀ (r×m), B·Bᵀ = I_r
  Vector sigma;  // leading r singular values of the target
};

/// Builds A = U·D₁†, B = D₂†·Vᵀ from svd(ΔW*) with D₁ = I_{r×n}, D₂ = I_{m×r}.
/// A·diag(sigma)·B is then the best rank-r approximation of the target.
ConstrainedFactors construct_constrained_factors(const Matrix& delta_star, std::size_t r);

/// x + h(x·A)·B.
Matrix serial_adapter_forward(const Matrix& x, const Matrix& a, const Matrix& b, Activation h);
/// x·W + h(x·A)·B.
Matrix parallel_adapter_forward(const Matrix& x, const Matrix& w, const Matrix& a, const Matrix& b,
                                Activation h);

}  // namespace subspace
