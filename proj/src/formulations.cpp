// Copyright (c) LagrangeKit contributors

#include "lagrangekit/formulations.hpp"

#include <cmath>

#include "lagrangekit/gradients.hpp"

namespace lagrangekit {

namespace {

void require_multiplier_fits(const ConstraintGroup& group, const Vector& gathered,
                             const Vector& violation) {
  if (gathered.size() != violation.size())
    throw InvalidArgument("group '" + group.id + "': multiplier entries (" +
                          std::to_string(gathered.size()) + ") do not match violation entries (" +
                          std::to_string(violation.size()) + ")");
}

void require_positive(const ConstraintGroup& group, const PenaltyCoefficient& penalty) {
  if (penalty.value.size() == 0 || !penalty.value.allFinite() || (penalty.value.array() <= 0).any())
    throw InvalidArgument("group '" + group.id + "': penalty coefficients must be positive");
}

}  // namespace

Vector penalty_values_for(const ConstraintState& state, const PenaltyCoefficient& penalty) {
  if (penalty.is_scalar()) return Vector::Constant(state.violation.size(), penalty.value(0));
  return gather(penalty.value, state.observed_indices);
}

ContributionPair lagrangian_contribution(const ConstraintGroup& group, const ConstraintState& state,
                                         const Multiplier& multiplier) {
  const Vector lambda = multiplier_values_for(state, multiplier);
  require_multiplier_fits(group, lambda, state.violation);
  ContributionPair out{group.id};
  out.primal_term = lambda.dot(state.violation);
  out.dual_signal = state.dual_measurement();
  out.dual_term = lambda.dot(out.dual_signal);
  return out;
}

ContributionPair augmented_lagrangian_contribution(const ConstraintGroup& group,
                                                   const ConstraintState& state,
                                                   const Multiplier& multiplier,
                                                   const PenaltyCoefficient& penalty) {
  require_positive(group, penalty);
  const Vector lambda = multiplier_values_for(state, multiplier);
  require_multiplier_fits(group, lambda, state.violation);
  const Vector c = penalty_values_for(state, penalty);

  ContributionPair out{group.id};
  out.primal_term = group.constraint_type == ConstraintType::Inequality
                        ? phr_inequality_term(state.violation, lambda, c)
                        : augmented_equality_term(state.violation, lambda, c);
  // With a unit dual step this gives lambda <- [lambda + c g]_+.
  out.dual_signal = (c.array() * state.dual_measurement().array()).matrix();
  out.dual_term = lambda.dot(out.dual_signal);
  return out;
}

ContributionPair quadratic_penalty_contribution(const ConstraintGroup& group,
                                                const ConstraintState& state,
                                                const PenaltyCoefficient& penalty) {
  if (group.multiplier)
    throw InvalidArgument("group '" + group.id + "': quadratic penalty groups have no multiplier");
  require_positive(group, penalty);
  const Vector c = penalty_values_for(state, penalty);
  ContributionPair out{group.id};
  out.primal_term = quadratic_penalty_term(group.constraint_type, state.violation, c);
  return out;
}

ContributionPair compute_contribution(const ConstraintGroup& group, const ConstraintState& state) {
  switch (group.formulation) {
    case Formulation::Lagrangian:
      return lagrangian_contribution(group, state, group.multiplier.value());
    case Formulation::AugmentedLagrangian:
      return augmented_lagrangian_contribution(group, state, group.multiplier.value(),
                                               group.penalty.value());
    case Formulation::QuadraticPenalty:
      return quadratic_penalty_contribution(group, state, group.penalty.value());
  }
  throw InvalidArgument("unknown formulation");
}

Vector primal_weights(const ConstraintGroup& group, const ConstraintState& state) {
  const Vector& v = state.violation;
  const bool ineq = group.constraint_type == ConstraintType::Inequality;
  switch (group.formulation) {
    case Formulation::Lagrangian: {
      Vector lambda = multiplier_values_for(state, group.multiplier.value());
      require_multiplier_fits(group, lambda, v);
      return lambda;
    }
    case Formulation::AugmentedLagrangian: {
      const Vector lambda = multiplier_values_for(state, group.multiplier.value());
      require_multiplier_fits(group, lambda, v);
      const Vector c = penalty_values_for(state, group.penalty.value());
      if (ineq) return (c.array() * v.array() + lambda.array()).max(0.0).matrix();
      return (lambda.array() + c.array() * v.array()).matrix();
    }
    case Formulation::QuadraticPenalty: {
      const Vector c = penalty_values_for(state, group.penalty.value());
      if (ineq) return (c.array() * v.array().max(0.0)).matrix();
      return (c.array() * v.array()).matrix();
    }
  }
  throw InvalidArgument("unknown formulation");
}

void PenaltyScheduler::validate() const {
  if (!(growth_factor > 1.0)) throw InvalidArgument("penalty growth factor must exceed 1");
  if (!(required_decrease_ratio > 0.0 && required_decrease_ratio < 1.0))
    throw InvalidArgument("penalty decrease ratio must lie in (0, 1)");
  if (!(max_value > 0.0) || !std::isfinite(max_value))
    throw InvalidArgument("penalty cap must be positive and finite");
}

PenaltyCoefficient schedule_penalty(PenaltyCoefficient penalty, const PenaltyScheduler& scheduler,
                                    double violation_norm_now, double violation_norm_prev) {
  scheduler.validate();
  if (violation_norm_now < 0 || violation_norm_prev < 0)
    throw InvalidArgument("violation norms must be non-negative");
  if (violation_norm_now > scheduler.required_decrease_ratio * violation_norm_prev) {
    for (Eigen::Index i = 0; i < penalty.value.size(); ++i) {
      const double grown = std::min(scheduler.growth_factor * penalty.value(i), scheduler.max_value);
      penalty.value(i) = std::max(penalty.value(i), grown);
    }
  }
  return penalty;
}

double violation_norm(ConstraintType type, const ConstraintState& state) {
  const Vector& v = state.dual_measurement();
  if (type == ConstraintType::Inequality) return positive_part(v).norm();
  return v.norm();
}

AssembledLagrangian assemble_lagrangian(double loss,
                                        const std::vector<ContributionPair>& contributions) {
  AssembledLagrangian out;
  out.primal_lagrangian = loss;
  for (const auto& c : contributions) {
    out.primal_lagrangian += c.primal_term;
    out.dual_lagrangian += c.dual_term;
    out.dual_signals[c.group_id] = c.dual_signal;
  }
  return out;
}

std::vector<ContributionPair> compute_contributions(const std::vector<ConstraintGroup>& groups,
                                                    const CMPState& state) {
  std::vector<ContributionPair> out;
  for (const auto& group : groups) {
    auto it = state.observed_constraints.find(group.id);
    if (it == state.observed_constraints.end()) continue;
    out.push_back(compute_contribution(group, it->second));
  }
  return out;
}

AssembledLagrangian assemble_lagrangian(const std::vector<ConstraintGroup>& groups,
                                        const CMPState& state) {
  return assemble_lagrangian(state.loss, compute_contributions(groups, state));
}

Vector primal_lagrangian_gradient(const std::vector<ConstraintGroup>& groups,
                                  const Evaluation& evaluation) {
  std::vector<WeightedJacobian> terms;
  for (const auto& group : groups) {
    auto it = evaluation.state.observed_constraints.find(group.id);
    if (it == evaluation.state.observed_constraints.end()) continue;
    terms.push_back({primal_weights(group, it->second), evaluation.jacobians.at(group.id)});
  }
  return compose_primal_gradient(evaluation.loss_gradient, terms);
}

}  // namespace lagrangekit
