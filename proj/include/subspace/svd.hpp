#pragma once

#include <cstddef>

#include "subspace/matrix.hpp"

namespace subspace {

/// Full singular value decomposition W = U·diag(sigma)·Vᵀ of an n×m matrix.
///
/// `u` is n×n and `v` is m×m, both orthogonal. `sigma` holds min(n, m) values
/// sorted descending. In every column of `u` the entry of largest magnitude is
/// non-negative; the paired column of `v` carries the compensating sign.
struct SvdFactors {
  Matrix u;
  Vector sigma;
  Matrix v;

  std::size_t rank_count() const noexcept { return sigma.size(); }
};

/// One-sided (Hestenes) Jacobi SVD. Deterministic for identical input bits.
/// Throws DomainError on non-finite input.
SvdFactors svd(const Matrix& w);

/// U_k·diag(sigma)·V_kᵀ with k = sigma.size(); `sigma` may differ from factors.sigma.
Matrix compose(const SvdFactors& factors, std::span<const double> sigma);
inline Matrix reconstruct(const SvdFactors& factors) { return compose(factors, factors.sigma); }

/// Best rank-r approximation U_r·Σ_r·V_rᵀ.
Matrix truncate(const SvdFactors& factors, std::size_t r);

/// Singular values above `rel_tol`·σ_max (default: the pinv cutoff).
std::size_t numerical_rank(const SvdFactors& factors, double rel_tol = -1.0);
std::size_t numerical_rank(const Matrix& w, double rel_tol = -1.0);

/// Relative cutoff used by pinv: 1e-12·max(rows, cols).
double pinv_relative_cutoff(std::size_t rows, std::size_t cols);

/// Moore-Penrose pseudo-inverse V·Σ†·Uᵀ; singular values at or below the
/// cutoff·σ_max are treated as zero.
Matrix pinv(const Matrix& w);

}  // namespace subspace
