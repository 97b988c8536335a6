#include "subspace/mpc.hpp"

#include <string>

#include "subspace/errors.hpp"

namespace subspace {

std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::None: return "none";
    case RegularizerKind::Orthogonal: return "o";
    case RegularizerKind::Diagonal: return "d";
    case RegularizerKind::Nonlinear: return "n";
  }
  return "?";
}

RegularizerKind parse_regularizer(std::string_view name) {
  if (name == "none") return RegularizerKind::None;
  if (name == "o" || name == "mpc_o") return RegularizerKind::Orthogonal;
  if (name == "d" || name == "mpc_d") return RegularizerKind::Diagonal;
  if (name == "n" || name == "mpc_n") return RegularizerKind::Nonlinear;
  throw UnsupportedKind("unknown regularizer '" + std::string(name) + "'");
}

namespace {

void require_penalty(RegularizerKind kind, const char* op) {
  if (kind != RegularizerKind::Orthogonal && kind != RegularizerKind::Diagonal) {
    throw UnsupportedKind(std::string(op) + ": regularizer '" + std::string(to_string(kind)) +
                          "' has no penalty value");
  }
}

void require_pair(const Matrix& a, const Matrix& b, const char* op) {
  if (a.cols() != b.rows()) throw ShapeError(std::string(op) + ": A cols != B rows");
}

// AᵀA − I (r×r).
Matrix gram_residual_a(const Matrix& a) {
  Matrix res = matmul_tn(a, a);
  for (std::size_t i = 0; i < res.rows(); ++i) res(i, i) -= 1.0;
  return res;
}

// BBᵀ − I, or BBᵀ with its diagonal removed (r×r).
Matrix gram_residual_b(RegularizerKind kind, const Matrix& b) {
  Matrix res = matmul_nt(b, b);
  for (std::size_t i = 0; i < res.rows(); ++i) {
    res(i, i) = kind == RegularizerKind::Orthogonal ? res(i, i) - 1.0 : 0.0;
  }
  return res;
}

double squared_norm(const Matrix& m) { return dot(m.values(), m.values()); }

}  // namespace

double mpc_value(RegularizerKind kind, const Matrix& a, const Matrix& b) {
  require_penalty(kind, "mpc_value");
  require_pair(a, b, "mpc_value");
  return squared_norm(gram_residual_a(a)) + squared_norm(gram_residual_b(kind, b));
}

MpcGradient mpc_grad(RegularizerKind kind, const Matrix& a, const Matrix& b) {
  require_penalty(kind, "mpc_grad");
  require_pair(a, b, "mpc_grad");
  // The diagonal of BBᵀ − diag(BBᵀ) is zero, so the chain rule through the
  // subtracted diagonal contributes nothing.
  return {4.0 * matmul(a, gram_residual_a(a)), 4.0 * matmul(gram_residual_b(kind, b), b)};
}

ExtensionState mpc_n_wrap(const ExtensionState& state, Activation h) {
  if (state.kind != ExtensionKind::LoRA) {
    throw UnsupportedKind(std::string("mpc_n_wrap: expects LoRA, got ") + to_string(state.kind));
  }
  ExtensionState out = state;
  out.kind = ExtensionKind::ParallelAdapter;
  out.activation = h;
  return out;
}

}  // namespace subspace
