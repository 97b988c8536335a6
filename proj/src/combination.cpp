#include "subspace/combination.hpp"

#include <algorithm>
#include <string>

#include "subspace/errors.hpp"

namespace subspace {

const char* to_string(CombinationKind kind) {
  switch (kind) {
    case CombinationKind::DoRA: return "DoRA";
    case CombinationKind::SpectralAdapter: return "SpectralAdapter";
    case CombinationKind::SVDiff: return "SVDiff";
  }
  return "?";
}

CombinationState init_combination(CombinationKind kind, const Matrix& w, std::size_t r, Rng& rng,
                                  double a_stddev, double scale) {
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();
  CombinationState s;
  s.kind = kind;
  s.scale = scale;
  switch (kind) {
    case CombinationKind::DoRA:
      if (r < 1 || r > std::min(n, m)) throw ShapeError("init_combination: rank out of range");
      s.r = r;
      s.a = rng.gaussian(n, r, a_stddev);
      s.b = Matrix(r, m);
      s.magnitude = column_norms(w);
      break;
    case CombinationKind::SpectralAdapter:
      if (r < 1 || r > std::min(n, m)) throw ShapeError("init_combination: rank out of range");
      s.r = r;
      s.a = Matrix(n, r);
      s.b = Matrix(m, r);
      s.frozen = svd(w);
      break;
    case CombinationKind::SVDiff:
      s.frozen = svd(w);
      s.shift.assign(s.frozen->sigma.size(), 0.0);
      break;
  }
  return s;
}

namespace {

const SvdFactors& cached_factors(const CombinationState& state, const Matrix& w, const char* op) {
  if (!state.frozen) throw DomainError(std::string(op) + ": singular factors not attached");
  if (state.frozen->u.rows() != w.rows() || state.frozen->v.rows() != w.cols()) {
    throw ShapeError(std::string(op) + ": cached factors do not match W");
  }
  return *state.frozen;
}

}  // namespace

Matrix dora_apply(const CombinationState& state, const Matrix& w) {
  if (state.magnitude.size() != w.cols()) throw ShapeError("dora_apply: magnitude length != m");
  Matrix v = w;
  if (state.scale != 0.0) v += state.scale * matmul(state.a, state.b);
  const Vector norms = column_norms(v);
  Vector ratio(norms.size());
  for (std::size_t j = 0; j < norms.size(); ++j) {
    if (norms[j] < kDegenerateColumnNorm) {
      throw DomainError("dora_apply: column " + std::to_string(j) + " of W + AB is degenerate");
    }
    ratio[j] = state.magnitude[j] / norms[j];
  }
  return scale_columns(v, ratio);
}

Matrix dora_simplified_apply(const Matrix& w, const Matrix& a, const Matrix& b, const Vector& dvec) {
  return scale_columns(w + matmul(a, b), dvec);
}

Matrix spectral_adapter_apply(const CombinationState& state, const Matrix& w) {
  const SvdFactors& f = cached_factors(state, w, "spectral_adapter_apply");
  const std::size_t r = state.r;
  if (r < 1 || r > f.sigma.size()) throw ShapeError("spectral_adapter_apply: r out of range");
  require_shape(state.a, w.rows(), r, "spectral A");
  require_shape(state.b, w.cols(), r, "spectral B");
  SvdFactors shifted = f;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t k = 0; k < r; ++k) shifted.u(i, k) += state.a(i, k);
  for (std::size_t j = 0; j < w.cols(); ++j)
    for (std::size_t k = 0; k < r; ++k) shifted.v(j, k) += state.b(j, k);
  return reconstruct(shifted);
}

Matrix spectral_adapter_expansion(const CombinationState& state, const Matrix& w) {
  const SvdFactors& f = cached_factors(state, w, "spectral_adapter_expansion");
  const std::size_t r = state.r;
  if (r < 1 || r > f.sigma.size()) throw ShapeError("spectral_adapter_expansion: r out of range");
  const Vector sigma_r(f.sigma.begin(), f.sigma.begin() + static_cast<std::ptrdiff_t>(r));
  const Matrix u_r = f.u.leading_cols(r);
  const Matrix v_r = f.v.leading_cols(r);
  const Matrix a_sigma = scale_columns(state.a, sigma_r);
  Matrix out = w;
  out += matmul_nt(a_sigma, v_r);
  out += matmul_nt(scale_columns(u_r, sigma_r), state.b);
  out += matmul_nt(a_sigma, state.b);
  return out;
}

Vector spectral_shift_operator(const Vector& sigma, const Vector& shift) {
  if (sigma.size() != shift.size()) throw ShapeError("spectral_shift_operator: length mismatch");
  Vector h(sigma.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::max(shift[i], -sigma[i]);
  return h;
}

Matrix svdiff_apply(const CombinationState& state, const Matrix& w) {
  const SvdFactors& f = cached_factors(state, w, "svdiff_apply");
  if (state.shift.size() != f.sigma.size()) throw ShapeError("svdiff_apply: shift length");
  Vector clamped(f.sigma.size());
  for (std::size_t i = 0; i < clamped.size(); ++i) {
    clamped[i] = std::max(f.sigma[i] + state.shift[i], 0.0);
  }
  return compose(f, clamped);
}

Matrix svdiff_expansion(const CombinationState& state, const Matrix& w) {
  const SvdFactors& f = cached_factors(state, w, "svdiff_expansion");
  return w + compose(f, spectral_shift_operator(f.sigma, state.shift));
}

Matrix apply(const CombinationState& state, const Matrix& w) {
  switch (state.kind) {
    case CombinationKind::DoRA: return dora_apply(state, w);
    case CombinationKind::SpectralAdapter: return spectral_adapter_apply(state, w);
    case CombinationKind::SVDiff: return svdiff_apply(state, w);
  }
  return w;
}

}  // namespace subspace
