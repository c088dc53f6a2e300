// Copyright (c) LagrangeKit contributors

#include "lagrangekit/core.hpp"

#include <cmath>
#include <sstream>

#include "lagrangekit/gradients.hpp"

namespace lagrangekit {

std::string to_string(Formulation formulation) {
  switch (formulation) {
    case Formulation::Lagrangian:
      return "lagrangian";
    case Formulation::AugmentedLagrangian:
      return "augmented_lagrangian";
    case Formulation::QuadraticPenalty:
      return "quadratic_penalty";
  }
  return "unknown";
}

std::string to_string(ConstraintType type) {
  return type == ConstraintType::Inequality ? "inequality" : "equality";
}

void ConstraintState::validate(Eigen::Index group_size) const {
  if (!violation.allFinite()) throw InvalidArgument("violation has non-finite entries");
  if (strict_violation) {
    if (strict_violation->size() != violation.size())
      throw InvalidArgument("strict_violation length differs from violation length");
    if (!strict_violation->allFinite())
      throw InvalidArgument("strict_violation has non-finite entries");
  }
  if (observed_indices) {
    if (static_cast<Eigen::Index>(observed_indices->size()) != violation.size())
      throw InvalidArgument("observed_indices length differs from violation length");
    check_indices(*observed_indices, group_size);
  } else if (violation.size() != group_size) {
    throw InvalidArgument("violation has length " + std::to_string(violation.size()) +
                          ", group has " + std::to_string(group_size) + " constraints");
  }
}

void ConstraintGroup::validate() const {
  if (id.empty()) throw InvalidArgument("constraint group id must not be empty");
  if (size <= 0) throw InvalidArgument("group '" + id + "': size must be positive");
  const bool wants_multiplier = formulation != Formulation::QuadraticPenalty;
  const bool wants_penalty = formulation != Formulation::Lagrangian;
  if (wants_multiplier != multiplier.has_value())
    throw InvalidArgument("group '" + id + "': formulation " + to_string(formulation) +
                          (wants_multiplier ? " requires" : " forbids") + " a multiplier");
  if (wants_penalty != penalty.has_value())
    throw InvalidArgument("group '" + id + "': formulation " + to_string(formulation) +
                          (wants_penalty ? " requires" : " forbids") + " a penalty coefficient");
  if (multiplier) {
    if (multiplier->size() != size)
      throw InvalidArgument("group '" + id + "': multiplier size does not match group size");
    if (multiplier->constraint_type() != constraint_type)
      throw InvalidArgument("group '" + id + "': multiplier constraint type differs from group");
  }
  if (penalty) {
    const auto n = penalty->value.size();
    if (n != 1 && n != size)
      throw InvalidArgument("group '" + id + "': penalty must be scalar or of group size");
    if (!penalty->value.allFinite() || (penalty->value.array() <= 0).any())
      throw InvalidArgument("group '" + id + "': penalty coefficients must be positive");
  }
}

ConstraintGroup make_group(std::string id, ConstraintType type, Eigen::Index size,
                           Formulation formulation, double penalty) {
  ConstraintGroup group{std::move(id), type, size, formulation};
  if (formulation != Formulation::QuadraticPenalty)
    group.multiplier = Multiplier::dense(type, size);
  if (formulation != Formulation::Lagrangian) group.penalty = PenaltyCoefficient(penalty);
  return group;
}

ConstrainedMinimizationProblem::ConstrainedMinimizationProblem(Eigen::Index dimension)
    : dimension_(dimension), x_(Vector::Zero(dimension)) {
  if (dimension < 1) throw InvalidArgument("problem dimension must be at least 1");
}

const std::string& ConstrainedMinimizationProblem::register_group(ConstraintGroup group) {
  if (frozen_) throw InvalidArgument("cannot register group '" + group.id + "' after freeze");
  group.validate();
  if (has_group(group.id)) throw InvalidArgument("duplicate constraint group id '" + group.id + "'");
  groups_.push_back(std::move(group));
  return groups_.back().id;
}

void ConstrainedMinimizationProblem::check_point(const Vector& x) const {
  if (x.size() != dimension_)
    throw InvalidArgument("x has dimension " + std::to_string(x.size()) + ", problem has " +
                          std::to_string(dimension_));
  if (!x.allFinite()) throw InvalidArgument("x has non-finite entries");
}

void ConstrainedMinimizationProblem::set_x(const Vector& x) {
  check_point(x);
  x_ = x;
}

bool ConstrainedMinimizationProblem::has_group(const std::string& id) const {
  for (const auto& g : groups_)
    if (g.id == id) return true;
  return false;
}

const ConstraintGroup& ConstrainedMinimizationProblem::group(const std::string& id) const {
  for (const auto& g : groups_)
    if (g.id == id) return g;
  throw InvalidArgument("unknown constraint group '" + id + "'");
}

ConstraintGroup& ConstrainedMinimizationProblem::group(const std::string& id) {
  for (auto& g : groups_)
    if (g.id == id) return g;
  throw InvalidArgument("unknown constraint group '" + id + "'");
}

void ConstrainedMinimizationProblem::validate_state(const CMPState& state) const {
  if (!std::isfinite(state.loss)) throw EvaluationError("", "loss is not finite");
  for (const auto& [id, cs] : state.observed_constraints) {
    if (!has_group(id)) throw InvalidArgument("state refers to unregistered group '" + id + "'");
    if (!cs.violation.allFinite() ||
        (cs.strict_violation && !cs.strict_violation->allFinite()))
      throw EvaluationError(id, "group '" + id + "' has a non-finite violation");
    try {
      cs.validate(group(id).size);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("group '" + id + "': " + e.what());
    }
  }
}

CMPState ConstrainedMinimizationProblem::checked_cmp_state(const Vector& x) const {
  check_point(x);
  CMPState state = compute_cmp_state(x);
  validate_state(state);
  return state;
}

Evaluation ConstrainedMinimizationProblem::checked_evaluate(const Vector& x) const {
  check_point(x);
  Evaluation ev = evaluate(x);
  validate_state(ev.state);
  if (ev.loss_gradient.size() != dimension_)
    throw InvalidArgument("loss gradient has the wrong dimension");
  if (!ev.loss_gradient.allFinite()) throw EvaluationError("", "loss gradient is not finite");
  for (const auto& [id, cs] : ev.state.observed_constraints) {
    auto it = ev.jacobians.find(id);
    if (it == ev.jacobians.end())
      throw InvalidArgument("group '" + id + "' was observed without gradients");
    if (it->second.rows() != cs.violation.size() || it->second.cols() != dimension_)
      throw InvalidArgument("group '" + id + "': jacobian shape does not match its violation");
    if (!it->second.allFinite()) throw EvaluationError(id, "group '" + id + "' has non-finite gradients");
  }
  return ev;
}

Evaluation ConstrainedMinimizationProblem::evaluate(const Vector& x) const {
  if (!fd_fallback_)
    throw InvalidArgument(
        "problem provides no analytic gradients; override evaluate() or enable the finite "
        "difference fallback");
  Evaluation ev;
  ev.state = compute_cmp_state(x);
  ev.loss_gradient =
      finite_difference_gradient([this](const Vector& p) { return compute_cmp_state(p).loss; }, x);
  for (const auto& [id, cs] : ev.state.observed_constraints) {
    if (cs.observed_indices)
      throw InvalidArgument("finite difference fallback needs fully observed groups ('" + id + "')");
    Matrix J(cs.violation.size(), x.size());
    for (Eigen::Index i = 0; i < cs.violation.size(); ++i) {
      J.row(i) = finite_difference_gradient(
                     [&, i](const Vector& p) {
                       return compute_cmp_state(p).observed_constraints.at(id).violation(i);
                     },
                     x)
                     .transpose();
    }
    ev.jacobians.emplace(id, std::move(J));
  }
  return ev;
}

std::string ConstrainedMinimizationProblem::signature() const {
  std::ostringstream os;
  os << "dim=" << dimension_;
  for (const auto& g : groups_) {
    os << ';' << g.id << ':' << to_string(g.constraint_type) << ':' << g.size << ':'
       << to_string(g.formulation);
    if (g.multiplier) os << ':' << (g.multiplier->is_indexed() ? "indexed" : "dense");
  }
  return os.str();
}

bool is_feasible(const CMPState& state, const std::map<std::string, ConstraintType>& types,
                 double tol) {
  if (tol < 0) throw InvalidArgument("tolerance must be non-negative");
  for (const auto& [id, cs] : state.observed_constraints) {
    auto it = types.find(id);
    if (it == types.end()) throw InvalidArgument("unknown constraint group '" + id + "'");
    const Vector& v = cs.dual_measurement();
    if (it->second == ConstraintType::Inequality) {
      if ((v.array() > tol).any()) return false;
    } else if ((v.array().abs() > tol).any()) {
      return false;
    }
  }
  return true;
}

bool is_feasible(const CMPState& state, const ConstrainedMinimizationProblem& problem, double tol) {
  std::map<std::string, ConstraintType> types;
  for (const auto& g : problem.groups()) types.emplace(g.id, g.constraint_type);
  return is_feasible(state, types, tol);
}

}  // namespace lagrangekit
