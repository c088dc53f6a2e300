// Copyright (c) LagrangeKit contributors

#pragma once

#include <any>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lagrangekit/multipliers.hpp"
#include "lagrangekit/types.hpp"

namespace lagrangekit {

enum class Formulation { Lagrangian, AugmentedLagrangian, QuadraticPenalty };

std::string to_string(Formulation formulation);
std::string to_string(ConstraintType type);

/// Strictly positive penalty strength c. A length-1 value broadcasts over the
/// whole group.
struct PenaltyCoefficient {
  Vector value;

  PenaltyCoefficient() = default;
  explicit PenaltyCoefficient(double scalar) : value(Vector::Constant(1, scalar)) {}
  explicit PenaltyCoefficient(Vector v) : value(std::move(v)) {}

  bool is_scalar() const { return value.size() == 1; }
  double at(Eigen::Index i) const { return is_scalar() ? value(0) : value(i); }
};

/// One group's measurement in a single evaluation.
///
/// `violation` holds g(x) (convention g(x) <= 0) or h(x) (h(x) = 0) and is the
/// differentiable quantity that drives the primal step. `strict_violation`,
/// when present, replaces it in the dual update only. `observed_indices`
/// selects which of the group's constraints were measured; entry k of
/// `violation` belongs to constraint observed_indices[k].
struct ConstraintState {
  Vector violation;
  std::optional<Vector> strict_violation;
  std::optional<IndexList> observed_indices;

  /// Throws InvalidArgument when the state is inconsistent with a group of
  /// `group_size` constraints.
  void validate(Eigen::Index group_size) const;

  /// Vector the dual optimizer ascends on (strict if present).
  const Vector& dual_measurement() const { return strict_violation ? *strict_violation : violation; }
};

struct ConstraintGroup {
  std::string id;
  ConstraintType constraint_type = ConstraintType::Inequality;
  Eigen::Index size = 0;
  Formulation formulation = Formulation::Lagrangian;
  std::optional<Multiplier> multiplier;
  std::optional<PenaltyCoefficient> penalty;

  bool has_multiplier() const { return multiplier.has_value(); }

  /// Throws InvalidArgument when the formulation/multiplier/penalty
  /// combination or the sizes are inconsistent.
  void validate() const;
};

/// Builds a group with the default handles for its formulation: a zero dense
/// multiplier for Lagrangian and AugmentedLagrangian, and a penalty of
/// `penalty` for AugmentedLagrangian and QuadraticPenalty.
ConstraintGroup make_group(std::string id, ConstraintType type, Eigen::Index size,
                           Formulation formulation = Formulation::Lagrangian,
                           double penalty = 1.0);

struct CMPState {
  double loss = 0.0;
  std::map<std::string, ConstraintState> observed_constraints;
  /// Carried through untouched; the library never reads it.
  std::map<std::string, std::any> misc;
};

/// A CMPState together with the first-order information the primal step
/// needs. Row k of `jacobians[id]` is the gradient of violation entry k of
/// that group.
struct Evaluation {
  CMPState state;
  Vector loss_gradient;
  std::map<std::string, Matrix> jacobians;
};

/// Non-finite loss or constraint measurement. `group_id` is empty when the
/// loss itself is at fault.
struct EvaluationError : NumericalError {
  EvaluationError(std::string group, const std::string& what)
      : NumericalError(what), group_id(std::move(group)) {}
  std::string group_id;
};

/// Base class for user problems: min f(x) s.t. g(x) <= 0, h(x) = 0.
///
/// Subclasses register their constraint groups in the constructor and
/// implement `compute_cmp_state`. The primal step also needs gradients,
/// supplied by overriding `evaluate`; central finite differences can stand in
/// for them via `enable_finite_difference_fallback`.
class ConstrainedMinimizationProblem {
 public:
  explicit ConstrainedMinimizationProblem(Eigen::Index dimension);
  virtual ~ConstrainedMinimizationProblem() = default;

  ConstrainedMinimizationProblem(const ConstrainedMinimizationProblem&) = default;
  ConstrainedMinimizationProblem& operator=(const ConstrainedMinimizationProblem&) = default;

  const std::string& register_group(ConstraintGroup group);

  Eigen::Index dimension() const { return dimension_; }
  const Vector& x() const { return x_; }
  void set_x(const Vector& x);

  bool has_group(const std::string& id) const;
  const ConstraintGroup& group(const std::string& id) const;
  ConstraintGroup& group(const std::string& id);
  /// Groups in registration order.
  const std::vector<ConstraintGroup>& groups() const { return groups_; }
  std::vector<ConstraintGroup>& groups() { return groups_; }

  /// After freezing, register_group throws. Optimizers freeze the problem
  /// they are bound to.
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  /// Raw measurement at x. Must be pure.
  virtual CMPState compute_cmp_state(const Vector& x) const = 0;

  /// Measurement plus gradients. The default uses finite differences when the
  /// fallback is enabled and throws otherwise.
  virtual Evaluation evaluate(const Vector& x) const;

  void enable_finite_difference_fallback(bool on = true) { fd_fallback_ = on; }

  /// Checked evaluation: dimension and finiteness of x, then state
  /// invariants. Throws EvaluationError / InvalidArgument.
  Evaluation checked_evaluate(const Vector& x) const;
  CMPState checked_cmp_state(const Vector& x) const;

  /// Verifies a state against the registered groups.
  void validate_state(const CMPState& state) const;

  /// "<id>:<type>:<size>:<formulation>" joined by ';', prefixed by the
  /// dimension. Used to match checkpoints to problems.
  std::string signature() const;

 private:
  void check_point(const Vector& x) const;

  Eigen::Index dimension_;
  Vector x_;
  std::vector<ConstraintGroup> groups_;
  bool frozen_ = false;
  bool fd_fallback_ = false;
};

/// True iff every inequality violation <= tol and every |equality violation|
/// <= tol. Uses the strict measurement when one is present. Groups absent from
/// `state` are not considered.
bool is_feasible(const CMPState& state, const ConstrainedMinimizationProblem& problem, double tol);

/// Same as above with the constraint types given directly.
bool is_feasible(const CMPState& state, const std::map<std::string, ConstraintType>& types,
                 double tol);

}  // namespace lagrangekit
