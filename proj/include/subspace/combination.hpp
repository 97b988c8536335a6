#pragma once

#include <cstddef>
#include <optional>

#include "subspace/matrix.hpp"
#include "subspace/random.hpp"
#include "subspace/svd.hpp"

namespace subspace {

/// Combination tuners reconstruct and extend the subspace of W at once.
enum class CombinationKind { DoRA, SpectralAdapter, SVDiff };

const char* to_string(CombinationKind kind);

/// DoRA: `a` n×r, `b` r×m, `magnitude` m.
/// SpectralAdapter: `a` n×r and `b` m×r, both added to the top-r singular vectors.
/// SVDiff: `shift` holds min(n, m) spectral shifts.
struct CombinationState {
  CombinationKind kind = CombinationKind::DoRA;
  Matrix a;
  Matrix b;
  Vector magnitude;
  Vector shift;
  std::size_t r = 0;
  double scale = 1.0;
  std::optional<SvdFactors> frozen;
};

/// Fresh state with φ(W) = W: DoRA magnitude = ‖W‖_c and B = 0 (A Gaussian);
/// SpectralAdapter A = B = 0; SVDiff shift = 0. Spectral and SVDiff cache svd(w).
CombinationState init_combination(CombinationKind kind, const Matrix& w, std::size_t r, Rng& rng,
                                  double a_stddev = 0.02, double scale = 1.0);

/// magnitude ⊙ (W + s·AB) / ‖W + s·AB‖_c, column by column.
Matrix dora_apply(const CombinationState& state, const Matrix& w);
/// (W + A·B)·diag(dvec).
Matrix dora_simplified_apply(const Matrix& w, const Matrix& a, const Matrix& b, const Vector& dvec);

/// [U_r + A | U_rest]·Σ·[V_r + B | V_rest]ᵀ.
Matrix spectral_adapter_apply(const CombinationState& state, const Matrix& w);
/// W + A·Σ_r·V_rᵀ + U_r·Σ_r·Bᵀ + A·Σ_r·Bᵀ.
Matrix spectral_adapter_expansion(const CombinationState& state, const Matrix& w);

/// U·diag(max(σ + shift, 0))·Vᵀ.
Matrix svdiff_apply(const CombinationState& state, const Matrix& w);
/// H_Σ(D) on the diagonal: max(shift_i, −σ_i).
Vector spectral_shift_operator(const Vector& sigma, const Vector& shift);
/// W + U·diag(H_Σ(D))·Vᵀ.
Matrix svdiff_expansion(const CombinationState& state, const Matrix& w);

Matrix apply(const CombinationState& state, const Matrix& w);

/// Columns of W + s·AB whose norm falls below this are rejected by dora_apply.
inline constexpr double kDegenerateColumnNorm = 1e-30;

}  // namespace subspace
