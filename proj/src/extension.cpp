#include "subspace/extension.hpp"

#include <algorithm>
#include <string>

#include "subspace/errors.hpp"
#include "subspace/svd.hpp"

namespace subspace {

const char* to_string(ExtensionKind kind) {
  switch (kind) {
    case ExtensionKind::LoRA: return "LoRA";
    case ExtensionKind::ADB: return "ADB";
    case ExtensionKind::AGB: return "AGB";
    case ExtensionKind::SerialAdapter: return "SerialAdapter";
    case ExtensionKind::ParallelAdapter: return "ParallelAdapter";
  }
  return "?";
}

ExtensionState init_extension(ExtensionKind kind, std::size_t n, std::size_t m, std::size_t r,
                              Rng& rng, const ExtensionInit& opts) {
  if (r < 1 || r > std::min(n, m)) {
    throw ShapeError("init_extension: rank " + std::to_string(r) + " outside [1, min(n, m)]");
  }
  ExtensionState s;
  s.kind = kind;
  s.scale = opts.scale;
  s.activation = opts.activation;
  const std::size_t a_rows = kind == ExtensionKind::SerialAdapter ? m : n;
  s.a = rng.gaussian(a_rows, r, opts.a_stddev);
  s.b = Matrix(r, m);
  if (kind == ExtensionKind::ADB) s.d.assign(r, 1.0);
  if (kind == ExtensionKind::AGB) s.g = Matrix::identity(r);
  return s;
}

namespace {

void check_factors(const ExtensionState& s) {
  const std::size_t r = s.b.rows();
  if (s.a.cols() != r) throw ShapeError("extension: A columns != B rows");
  if (s.kind == ExtensionKind::ADB && s.d.size() != r) throw ShapeError("extension: d length != r");
  if (s.kind == ExtensionKind::AGB) require_shape(s.g, r, r, "extension G");
}

}  // namespace

Matrix delta(const ExtensionState& state) {
  check_factors(state);
  switch (state.kind) {
    case ExtensionKind::LoRA: return matmul(state.a, state.b);
    case ExtensionKind::ADB: return matmul(state.a, scale_rows(state.d, state.b));
    case ExtensionKind::AGB: return matmul(matmul(state.a, state.g), state.b);
    default:
      throw UnsupportedKind(std::string("delta: ") + to_string(state.kind) +
                            " needs the frozen weight");
  }
}

Matrix delta(const ExtensionState& state, const Matrix& w) {
  check_factors(state);
  Matrix out;
  switch (state.kind) {
    case ExtensionKind::SerialAdapter:
      if (w.cols() != state.a.rows()) throw ShapeError("serial adapter: A rows != W cols");
      out = matmul(activate(state.activation, matmul(w, state.a)), state.b);
      break;
    case ExtensionKind::ParallelAdapter:
      if (w.rows() != state.a.rows()) throw ShapeError("parallel adapter: A rows != W rows");
      out = matmul(activate(state.activation, state.a), state.b);
      break;
    default:
      out = delta(state);
      if (out.rows() != w.rows()) throw ShapeError("extension: A rows != W rows");
  }
  if (out.cols() != w.cols()) throw ShapeError("extension: B cols != W cols");
  return out;
}

Matrix apply(const ExtensionState& state, const Matrix& w) {
  Matrix out = w;
  if (state.scale == 0.0) return out;
  out += state.scale * delta(state, w);
  return out;
}

EquivalentFactors equivalence_transform(const Matrix& a, const Matrix& g, const Matrix& b) {
  const std::size_t r = g.rows();
  require_shape(g, r, r, "equivalence_transform G");
  if (a.cols() != r || b.rows() != r) throw ShapeError("equivalence_transform: rank mismatch");
  const SvdFactors f = svd(g);
  return {matmul(a, scale_columns(f.u, f.sigma)), matmul_tn(f.v, b)};
}

ConstrainedFactors construct_constrained_factors(const Matrix& delta_star, std::size_t r) {
  const std::size_t n = delta_star.rows();
  const std::size_t m = delta_star.cols();
  if (r < 1 || r > std::min(n, m)) {
    throw ShapeError("construct_constrained_factors: rank " + std::to_string(r) +
                     " outside [1, min(n, m)]");
  }
  const SvdFactors f = svd(delta_star);
  ConstrainedFactors out;
  out.a = f.u.leading_cols(r);
  out.b = f.v.leading_cols(r).transpose();
  out.sigma.assign(f.sigma.begin(), f.sigma.begin() + static_cast<std::ptrdiff_t>(r));
  return out;
}

Matrix serial_adapter_forward(const Matrix& x, const Matrix& a, const Matrix& b, Activation h) {
  if (x.cols() != a.rows()) throw ShapeError("serial_adapter_forward: x cols != A rows");
  if (b.cols() != x.cols()) throw ShapeError("serial_adapter_forward: B cols != x cols");
  return x + matmul(activate(h, matmul(x, a)), b);
}

Matrix parallel_adapter_forward(const Matrix& x, const Matrix& w, const Matrix& a, const Matrix& b,
                                Activation h) {
  if (x.cols() != w.rows() || x.cols() != a.rows()) {
    throw ShapeError("parallel_adapter_forward: x cols must match W and A rows");
  }
  if (b.cols() != w.cols()) throw ShapeError("parallel_adapter_forward: B cols != W cols");
  return matmul(x, w) + matmul(activate(h, matmul(x, a)), b);
}

}  // namespace subspace
