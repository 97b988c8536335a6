#include "subspace/reconstruction.hpp"

#include <algorithm>
#include <string>

#include "subspace/errors.hpp"

namespace subspace {

const char* to_string(ReconstructionKind kind) {
  switch (kind) {
    case ReconstructionKind::SingularValues: return "SingularValues";
    case ReconstructionKind::IA3: return "IA3";
    case ReconstructionKind::SSL: return "SSL";
    case ReconstructionKind::SSB: return "SSB";
    case ReconstructionKind::BitFit: return "BitFit";
    case ReconstructionKind::SoftPrompt: return "SoftPrompt";
  }
  return "?";
}

ReconstructionState init_reconstruction(ReconstructionKind kind, const Matrix& w,
                                        const Vector& frozen_bias, std::size_t prompt_rows) {
  ReconstructionState s;
  s.kind = kind;
  switch (kind) {
    case ReconstructionKind::SingularValues:
      s.frozen = svd(w);
      s.sigma_prime = s.frozen->sigma;
      break;
    case ReconstructionKind::IA3: s.d2.assign(w.cols(), 1.0); break;
    case ReconstructionKind::SSL: s.d1.assign(w.rows(), 1.0); break;
    case ReconstructionKind::SSB:
      s.d1.assign(w.rows(), 1.0);
      s.d2.assign(w.cols(), 1.0);
      break;
    case ReconstructionKind::BitFit:
      s.bias = frozen_bias.empty() ? Vector(w.cols(), 0.0) : frozen_bias;
      if (s.bias.size() != w.cols()) throw ShapeError("init_reconstruction: bias length != m");
      break;
    case ReconstructionKind::SoftPrompt: s.prompt = Matrix(prompt_rows, w.cols()); break;
  }
  return s;
}

Matrix mode1_apply(const ReconstructionState& state, const Matrix& w) {
  if (!state.frozen) throw DomainError("mode1_apply: singular factors not attached");
  const SvdFactors& f = *state.frozen;
  if (f.u.rows() != w.rows() || f.v.rows() != w.cols()) {
    throw ShapeError("mode1_apply: cached factors do not match W");
  }
  if (state.sigma_prime.size() != f.sigma.size()) {
    throw ShapeError("mode1_apply: sigma' length != min(n, m)");
  }
  return compose(f, state.sigma_prime);
}

Matrix ia3_apply(const ReconstructionState& state, const Matrix& w) {
  return scale_columns(w, state.d2);
}

Matrix ssl_apply(const ReconstructionState& state, const Matrix& w) {
  return scale_rows(state.d1, w);
}

Matrix ssb_apply(const ReconstructionState& state, const Matrix& w) {
  return scale_columns(scale_rows(state.d1, w), state.d2);
}

Matrix apply(const ReconstructionState& state, const Matrix& w) {
  switch (state.kind) {
    case ReconstructionKind::SingularValues: return mode1_apply(state, w);
    case ReconstructionKind::IA3: return ia3_apply(state, w);
    case ReconstructionKind::SSL: return ssl_apply(state, w);
    case ReconstructionKind::SSB: return ssb_apply(state, w);
    case ReconstructionKind::BitFit:
    case ReconstructionKind::SoftPrompt: return w;
  }
  return w;
}

double column_scale_is_sigma_adjustment(const Matrix& w, const Vector& d1, const Vector& d2) {
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();
  if (d1.size() != n || d2.size() != m) {
    throw ShapeError("column_scale_is_sigma_adjustment: scale lengths must be n and m");
  }
  const SvdFactors f = svd(w);
  const Matrix sigma = Matrix::diagonal(n, m, f.sigma);

  // Left side: the scaled singular-vector factors multiplied out in full.
  const Matrix lhs =
      matmul_nt(matmul(matmul(matmul(f.u, Matrix::diagonal(d1)), sigma), Matrix::diagonal(d2)),
                f.v);

  // Right side: the same factors with the adjusted spectrum Σ̂ = D₁ΣD₂.
  Vector sigma_hat(f.sigma.size());
  for (std::size_t i = 0; i < sigma_hat.size(); ++i) sigma_hat[i] = d1[i] * f.sigma[i] * d2[i];
  const Matrix rhs = compose(f, sigma_hat);
  return max_abs_diff(lhs, rhs);
}

Matrix augment_bias(const Matrix& w, const Vector& bias) {
  if (bias.size() != w.cols()) throw ShapeError("augment_bias: bias length != m");
  return vstack(w, Matrix::row(bias));
}

Matrix augment_bias_input(const Matrix& x) { return hstack(x, Matrix(x.rows(), 1, 1.0)); }

Matrix bitfit_forward(const Matrix& x, const Matrix& w, const Vector& bias) {
  if (bias.size() != w.cols()) throw ShapeError("bitfit_forward: bias length != m");
  Matrix out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bias[j];
  return out;
}

Matrix augment_prompt(const Matrix& w, const Matrix& prompt) {
  if (prompt.cols() != w.cols()) throw ShapeError("augment_prompt: prompt cols != m");
  return vstack(prompt, w);
}

Matrix augment_prompt_input(const Matrix& x, std::size_t prompt_rows) {
  const std::size_t l = prompt_rows;
  Matrix out(l + x.rows(), l + x.cols());
  for (std::size_t i = 0; i < l; ++i) out(i, i) = 1.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(l + i, l + j) = x(i, j);
  return out;
}

Matrix soft_prompt_forward(const Matrix& x, const Matrix& w, const Matrix& prompt) {
  if (prompt.cols() != w.cols()) throw ShapeError("soft_prompt_forward: prompt cols != m");
  return vstack(prompt, matmul(x, w));
}

Matrix soft_prompt_backward(const Matrix& output_grad, std::size_t prompt_rows) {
  if (output_grad.rows() < prompt_rows) throw ShapeError("soft_prompt_backward: too few rows");
  return output_grad.block(0, 0, prompt_rows, output_grad.cols());
}

}  // namespace subspace
