// Copyright (c) LagrangeKit contributors

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lagrangekit/core.hpp"
#include "lagrangekit/gradients.hpp"

namespace lagrangekit {

struct ConstraintSpec {
  std::string id;
  ConstraintType type = ConstraintType::Inequality;
  DifferentiableFunction function;
};

/// KKT point obtained independently of the library's optimizers. `lambda`
/// concatenates the inequality multipliers and `mu` the equality multipliers,
/// in constraint order.
struct CertifiedSolution {
  Vector x;
  Vector lambda;
  Vector mu;
};

/// Test problem with analytic gradient oracles.
struct BenchmarkProblem {
  std::string name;
  Eigen::Index dimension = 0;
  DifferentiableFunction objective;
  std::vector<ConstraintSpec> constraints;
  std::optional<CertifiedSolution> certified_solution;
  Vector feasible_start;
  /// Default starting point and multiplier values for runs.
  Vector initial_point;
  std::map<std::string, double> initial_multipliers;

  /// Objective first, then every constraint group.
  std::vector<NamedFunction> oracles() const;
  Eigen::Index inequality_count() const;
  Eigen::Index equality_count() const;
};

struct KKTResidual {
  /// ||grad f + sum lambda_i grad g_i + sum mu_j grad h_j||_inf
  double stationarity = 0.0;
  /// max(max_i max(g_i, 0), max_j |h_j|)
  double feasibility = 0.0;
  /// max_i |lambda_i g_i|
  double complementarity = 0.0;

  double max() const;
};

/// Throws InvalidArgument if lambda has a negative entry or the sizes do not
/// match the problem.
KKTResidual kkt_residual(const BenchmarkProblem& problem, const Vector& x, const Vector& lambda,
                         const Vector& mu);

/// min ||x - a||^2  s.t. ||x||^2 - 1 <= 0.
/// x* = a / max(1, ||a||), lambda* = max(0, ||a|| - 1).
BenchmarkProblem problem_projection_ball(const Vector& a);

/// min 1/2 x^T Q x - b^T x  s.t. A x = c, certified by a dense solve of the KKT
/// system [[Q, A^T], [A, 0]] [x; mu] = [b; c].
BenchmarkProblem problem_equality_qp(const Matrix& Q, const Vector& b, const Matrix& A,
                                     const Vector& c);

/// Binary logistic regression features/labels.
struct Dataset {
  Matrix features;  // n x d
  Vector labels;    // +1 / -1
};

/// Two unit-covariance Gaussians centred at +-1/sqrt(d) * ones; sample i has
/// label +1 when i is even. Bit-deterministic for a given seed.
Dataset make_two_gaussians(std::uint64_t seed, Eigen::Index n = 200, Eigen::Index d = 5);

/// Average logistic loss of the linear classifier x = [w; b] on
/// make_two_gaussians(seed, n, d), subject to ||w||^2 + b^2 - threshold <= 0.
/// No certificate; judged by KKT residuals.
BenchmarkProblem problem_norm_constrained_logreg(std::uint64_t dataset_seed, double threshold,
                                                 Eigen::Index d = 5, Eigen::Index n = 200);

/// f(x) = 0, h(x) = x: the Lagrangian is mu * x with its saddle at the origin.
/// Runs start from x = 1, mu = 1.
BenchmarkProblem problem_bilinear_game();

struct GroupOptions {
  Formulation formulation = Formulation::Lagrangian;
  /// Initial penalty coefficient (augmented Lagrangian and quadratic penalty).
  double penalty = 1.0;
  Multiplier::Kind multiplier_kind = Multiplier::Kind::Dense;
};

/// Adapts a BenchmarkProblem to the optimizer interface. Every constraint of
/// the benchmark becomes one group with the requested formulation.
class OracleProblem : public ConstrainedMinimizationProblem {
 public:
  /// Uses `defaults` for every group not listed in `per_group`. Starts at the
  /// benchmark's initial point with its initial multipliers.
  OracleProblem(BenchmarkProblem benchmark, GroupOptions defaults = {},
                const std::map<std::string, GroupOptions>& per_group = {});

  CMPState compute_cmp_state(const Vector& x) const override;
  Evaluation evaluate(const Vector& x) const override;

  const BenchmarkProblem& benchmark() const { return benchmark_; }

 private:
  BenchmarkProblem benchmark_;
};

/// Multiplier estimates in kkt_residual's layout. Lagrangian and augmented
/// groups report their multiplier; quadratic penalty groups report the
/// implied c max(0, g) or c h at `state`.
std::pair<Vector, Vector> multiplier_estimates(const OracleProblem& problem, const CMPState& state);

/// kkt_residual at the problem's current point and multiplier estimates.
KKTResidual kkt_residual(const OracleProblem& problem);

}  // namespace lagrangekit
