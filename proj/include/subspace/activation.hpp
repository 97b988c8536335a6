#pragma once

#include <string>
#include <string_view>

#include "subspace/matrix.hpp"

namespace subspace {

enum class Activation { Relu, Tanh, Identity };

std::string_view to_string(Activation h);
Activation parse_activation(std::string_view name);

double activate(Activation h, double x);
/// Derivative at a pre-activation value; ReLU'(0) is taken as 0.
double activate_derivative(Activation h, double x);

Matrix activate(Activation h, const Matrix& x);
/// Elementwise upstream ⊙ h'(pre).
Matrix activate_backward(Activation h, const Matrix& pre, const Matrix& upstream);

}  // namespace subspace
