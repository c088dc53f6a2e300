// Copyright (c) LagrangeKit contributors

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lagrangekit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<Eigen::Index>;

/// Inequality groups follow g(x) <= 0 (positive means infeasible); equality
/// groups follow h(x) = 0.
enum class ConstraintType { Inequality, Equality };

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A computation produced or consumed a non-finite value.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lagrangekit
