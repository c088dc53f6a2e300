// Copyright (c) LagrangeKit contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lagrangekit/types.hpp"

namespace lagrangekit {

/// Vector-valued function with analytic gradient rows. Both callables must be
/// pure; grad_row(x, i) has length dim(x).
struct DifferentiableFunction {
  Eigen::Index output_size = 1;
  std::function<Vector(const Vector&)> eval;
  std::function<Vector(const Vector&, Eigen::Index)> grad_row;

  /// Stacks grad_row for every output.
  Matrix jacobian(const Vector& x) const;
};

/// A constraint block's gradient rows and the weights the formulation assigns
/// to them.
struct WeightedJacobian {
  Vector weights;
  Matrix jacobian;
};

/// grad_f + sum_k J_k^T w_k. Throws InvalidArgument on mismatched dimensions
/// or non-finite weights.
Vector compose_primal_gradient(const Vector& grad_f, const std::vector<WeightedJacobian>& terms);

/// Central-difference step for coordinate value `xk`.
inline double finite_difference_step(double xk) { return 6e-6 * std::max(1.0, std::abs(xk)); }

/// (f(x + h e_k) - f(x - h e_k)) / 2h for every coordinate k, with
/// h = finite_difference_step(x_k). `fun` returns a scalar.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& fun,
                                  const Vector& x);

/// Same, for output `output_index` of a vector function.
Vector finite_difference_gradient(const DifferentiableFunction& fun, const Vector& x,
                                  Eigen::Index output_index);

struct NamedFunction {
  std::string name;
  DifferentiableFunction function;
};

struct FunctionCheck {
  std::string name;
  /// max over outputs and coordinates of |analytic - fd|.
  double max_deviation = 0.0;
  /// Output row and coordinate where the tolerance test was worst.
  Eigen::Index worst_output = 0;
  Eigen::Index worst_coordinate = 0;
  bool passed = true;
};

struct GradientCheckReport {
  std::vector<FunctionCheck> functions;
  bool passed() const;
  /// Names of failing functions, comma separated.
  std::string failures() const;
};

/// Compares analytic gradient rows against central differences. Entry k of a
/// row passes when |analytic_k - fd_k| <= abs_tol + rel_tol * |fd_k|. Failures
/// are reported, not thrown; an empty x or non-positive tolerance throws
/// InvalidArgument.
GradientCheckReport check_gradients(const std::vector<NamedFunction>& functions, const Vector& x,
                                    double rel_tol, double abs_tol);

}  // namespace lagrangekit
