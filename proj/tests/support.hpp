// Copyright (c) LagrangeKit contributors

#pragma once

#include <functional>
#include <utility>

#include "lagrangekit/core.hpp"

namespace lagrangekit::testing {

// Problem whose evaluation is supplied as a callable. Groups are registered by
// the test.
class LambdaProblem : public ConstrainedMinimizationProblem {
 public:
  using Fn = std::function<Evaluation(const Vector&)>;

  LambdaProblem(Eigen::Index dimension, Fn fn)
      : ConstrainedMinimizationProblem(dimension), fn_(std::move(fn)) {}

  CMPState compute_cmp_state(const Vector& x) const override { return fn_(x).state; }
  Evaluation evaluate(const Vector& x) const override { return fn_(x); }

 private:
  Fn fn_;
};

// 1/2 ||x - target||^2 with linear inequalities A x - b <= 0 in group "g".
// Only the `observed` rows are reported when set. `strict_offset` adds a strict measurement of violation + offset.
struct LinearFixture {
  Vector target;
  Matrix A;
  Vector b;
  std::optional<double> strict_offset;
  std::optional<IndexList> observed;

  Evaluation operator()(const Vector& x) const {
    Evaluation ev;
    ev.state.loss = 0.5 * (x - target).squaredNorm();
    ev.loss_gradient = x - target;
    Vector g = A * x - b;
    Matrix J = A;
    if (observed) {
      g = g(*observed).eval();
      J = A(*observed, Eigen::all).eval();
    }
    ConstraintState cs{g};
    if (strict_offset) cs.strict_violation = (cs.violation.array() + *strict_offset).matrix();
    cs.observed_indices = observed;
    ev.state.observed_constraints.emplace("g", std::move(cs));
    ev.jacobians.emplace("g", std::move(J));
    return ev;
  }
};

}  // namespace lagrangekit::testing
