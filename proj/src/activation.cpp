#include "subspace/activation.hpp"

#include <cmath>

#include "subspace/errors.hpp"

namespace subspace {

std::string_view to_string(Activation h) {
  switch (h) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity" || name == "linear") return Activation::Identity;
  throw UnsupportedKind("unknown activation '" + std::string(name) + "'");
}

double activate(Activation h, double x) {
  switch (h) {
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Identity: return x;
  }
  return x;
}

double activate_derivative(Activation h, double x) {
  switch (h) {
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

Matrix activate(Activation h, const Matrix& x) {
  if (h == Activation::Identity) return x;
  Matrix out = x;
  for (double& v : out.values()) v = activate(h, v);
  return out;
}

Matrix activate_backward(Activation h, const Matrix& pre, const Matrix& upstream) {
  if (h == Activation::Identity) return upstream;
  Matrix out = upstream;
  auto o = out.values();
  auto p = pre.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] *= activate_derivative(h, p[k]);
  return out;
}

}  // namespace subspace
