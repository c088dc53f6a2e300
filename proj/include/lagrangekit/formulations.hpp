// Copyright (c) LagrangeKit contributors

#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lagrangekit/core.hpp"

namespace lagrangekit {

/// Powell-Hestenes-Rockafellar inequality term
///   sum_i (c_i / 2) * (max(0, g_i + lambda_i / c_i)^2 - (lambda_i / c_i)^2).
/// Its derivative in g_i is max(0, c_i g_i + lambda_i).
template <typename DerivedG, typename DerivedL, typename DerivedC>
typename DerivedG::Scalar phr_inequality_term(const Eigen::MatrixBase<DerivedG>& g,
                                              const Eigen::MatrixBase<DerivedL>& lambda,
                                              const Eigen::MatrixBase<DerivedC>& c) {
  using Scalar = typename DerivedG::Scalar;
  const auto ratio = (lambda.array() / c.array()).eval();
  const auto shifted = (g.array() + ratio).max(Scalar(0));
  return (Scalar(0.5) * c.array() * (shifted.square() - ratio.square())).sum();
}

/// <mu, h> + sum_j (c_j / 2) h_j^2.
template <typename DerivedH, typename DerivedL, typename DerivedC>
typename DerivedH::Scalar augmented_equality_term(const Eigen::MatrixBase<DerivedH>& h,
                                                  const Eigen::MatrixBase<DerivedL>& mu,
                                                  const Eigen::MatrixBase<DerivedC>& c) {
  using Scalar = typename DerivedH::Scalar;
  return mu.dot(h) + (Scalar(0.5) * c.array() * h.array().square()).sum();
}

/// sum_i (c_i / 2) max(0, g_i)^2 for inequalities, sum_j (c_j / 2) h_j^2 for
/// equalities.
template <typename Derived, typename DerivedC>
typename Derived::Scalar quadratic_penalty_term(ConstraintType type,
                                                const Eigen::MatrixBase<Derived>& v,
                                                const Eigen::MatrixBase<DerivedC>& c) {
  using Scalar = typename Derived::Scalar;
  if (type == ConstraintType::Inequality)
    return (Scalar(0.5) * c.array() * v.array().max(Scalar(0)).square()).sum();
  return (Scalar(0.5) * c.array() * v.array().square()).sum();
}

/// A group's share of the Lagrangian for one evaluation.
struct ContributionPair {
  std::string group_id;
  /// Added to the primal Lagrangian; depends on x only through the violation.
  double primal_term = 0.0;
  /// Ascent direction for the group's multiplier, one entry per measured
  /// constraint. Empty for quadratic penalty groups.
  Vector dual_signal;
  /// <lambda, dual_signal> with the multiplier entries that were measured.
  double dual_term = 0.0;
};

ContributionPair lagrangian_contribution(const ConstraintGroup& group, const ConstraintState& state,
                                         const Multiplier& multiplier);

ContributionPair augmented_lagrangian_contribution(const ConstraintGroup& group,
                                                   const ConstraintState& state,
                                                   const Multiplier& multiplier,
                                                   const PenaltyCoefficient& penalty);

ContributionPair quadratic_penalty_contribution(const ConstraintGroup& group,
                                                const ConstraintState& state,
                                                const PenaltyCoefficient& penalty);

/// Dispatches on the group's formulation using its own multiplier and
/// penalty.
ContributionPair compute_contribution(const ConstraintGroup& group, const ConstraintState& state);

/// d(primal_term)/d(violation_k) for each measured entry:
///   Lagrangian                 lambda_k
///   AugmentedLagrangian  ineq  max(0, c_k g_k + lambda_k)
///                        eq    mu_k + c_k h_k
///   QuadraticPenalty     ineq  c_k max(0, g_k)
///                        eq    c_k h_k
Vector primal_weights(const ConstraintGroup& group, const ConstraintState& state);

/// Penalty entries for the measured constraints (scalar penalties broadcast).
Vector penalty_values_for(const ConstraintState& state, const PenaltyCoefficient& penalty);

/// Multiplicative penalty growth, triggered when the violation did not shrink
/// enough since the previous check.
struct PenaltyScheduler {
  double growth_factor = 10.0;
  double required_decrease_ratio = 0.25;
  double max_value = 1e8;

  void validate() const;
};

/// c <- min(growth_factor * c, max_value) when now > ratio * prev, otherwise
/// unchanged. Never decreases c.
PenaltyCoefficient schedule_penalty(PenaltyCoefficient penalty, const PenaltyScheduler& scheduler,
                                    double violation_norm_now, double violation_norm_prev);

/// ||max(0, g)||_2 for inequalities, ||h||_2 for equalities, on the strict
/// measurement when present.
double violation_norm(ConstraintType type, const ConstraintState& state);

struct AssembledLagrangian {
  double primal_lagrangian = 0.0;
  double dual_lagrangian = 0.0;
  std::map<std::string, Vector> dual_signals;
};

/// loss + sum of primal terms; dual signals keyed by group.
AssembledLagrangian assemble_lagrangian(double loss,
                                        const std::vector<ContributionPair>& contributions);

/// Contributions of every group observed in `state`, in the order of
/// `groups`.
std::vector<ContributionPair> compute_contributions(const std::vector<ConstraintGroup>& groups,
                                                    const CMPState& state);

AssembledLagrangian assemble_lagrangian(const std::vector<ConstraintGroup>& groups,
                                        const CMPState& state);

inline AssembledLagrangian assemble_lagrangian(const ConstrainedMinimizationProblem& problem,
                                               const CMPState& state) {
  return assemble_lagrangian(problem.groups(), state);
}

/// Gradient of the primal Lagrangian in x with multipliers and penalties held
/// fixed.
Vector primal_lagrangian_gradient(const std::vector<ConstraintGroup>& groups,
                                  const Evaluation& evaluation);

inline Vector primal_lagrangian_gradient(const ConstrainedMinimizationProblem& problem,
                                         const Evaluation& evaluation) {
  return primal_lagrangian_gradient(problem.groups(), evaluation);
}

}  // namespace lagrangekit
