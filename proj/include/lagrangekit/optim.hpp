// Copyright (c) LagrangeKit contributors

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lagrangekit/core.hpp"
#include "lagrangekit/formulations.hpp"

namespace lagrangekit {

enum class PrimalOptimizerKind { GD, Momentum, AdamLike };

struct PrimalOptimizerOptions {
  PrimalOptimizerKind kind = PrimalOptimizerKind::GD;
  double learning_rate = 1e-2;
  /// Momentum coefficient (Momentum only).
  double momentum = 0.9;
  /// Moment decay rates and denominator offset (AdamLike only).
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Buffers are created lazily as zero vectors on the first step.
struct PrimalOptimizerState {
  std::int64_t step_count = 0;
  /// Momentum velocity or first moment.
  std::optional<Vector> first;
  /// Second moment (AdamLike only).
  std::optional<Vector> second;
};

/// Descent-only optimizer for the primal variables.
///
///   GD        x' = x - lr g
///   Momentum  v <- momentum v + g,  x' = x - lr v
///   AdamLike  m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///             x' = x - lr (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
class PrimalOptimizer {
 public:
  explicit PrimalOptimizer(PrimalOptimizerOptions options = {});

  static PrimalOptimizer gradient_descent(double learning_rate);
  static PrimalOptimizer with_momentum(double learning_rate, double momentum);
  static PrimalOptimizer adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                              double epsilon = 1e-8);

  /// Advances the buffers and returns the new point. Throws NumericalError on
  /// a non-finite gradient and InvalidArgument on a dimension mismatch.
  Vector step(const Vector& x, const Vector& grad);
  /// What step() would return, leaving the buffers untouched.
  Vector preview(const Vector& x, const Vector& grad) const;

  const PrimalOptimizerOptions& options() const { return options_; }
  void set_learning_rate(double lr);

  const PrimalOptimizerState& state() const { return state_; }
  void restore(PrimalOptimizerState state);

 private:
  PrimalOptimizerOptions options_;
  PrimalOptimizerState state_;
};

/// Primal step as a pure function of (options, state): returns the new point
/// and updates `state`.
Vector primal_step(const PrimalOptimizerOptions& options, PrimalOptimizerState& state,
                   const Vector& x, const Vector& grad);

enum class DualOptimizerKind { GradientAscent, NuPI };

struct DualOptimizerOptions {
  DualOptimizerKind kind = DualOptimizerKind::GradientAscent;
  double learning_rate = 1e-2;
  /// Proportional gain (NuPI only).
  double kappa_p = 0.0;
  /// Error smoothing factor in [0, 1) (NuPI only).
  double nu = 0.0;

  void validate() const;
};

/// NuPI error average, one entry per multiplier entry. An entry is seeded with
/// its first observed error, so the first update of every entry is plain
/// gradient ascent.
struct DualOptimizerState {
  std::optional<Vector> error_average;
  std::vector<std::uint8_t> seen;
};

/// Ascent-only optimizer for one group's multiplier.
///
///   GradientAscent  delta = lr e
///   NuPI            a_t = nu a_{t-1} + (1 - nu) e,
///                   delta = lr (e + kappa_p (a_t - a_{t-1}))
///
/// followed by apply_dual_delta (which projects inequality multipliers).
/// Only addressed entries have their value and buffers changed.
class DualOptimizer {
 public:
  explicit DualOptimizer(DualOptimizerOptions options = {});

  static DualOptimizer gradient_ascent(double learning_rate);
  static DualOptimizer nupi(double learning_rate, double kappa_p, double nu);

  void step(Multiplier& multiplier, const Vector& signal,
            const std::optional<IndexList>& indices = std::nullopt);
  Multiplier preview(const Multiplier& multiplier, const Vector& signal,
                     const std::optional<IndexList>& indices = std::nullopt) const;

  const DualOptimizerOptions& options() const { return options_; }
  void set_learning_rate(double lr);

  const DualOptimizerState& state() const { return state_; }
  void restore(DualOptimizerState state);

 private:
  DualOptimizerOptions options_;
  DualOptimizerState state_;
};

/// Value-semantics dual step.
Multiplier dual_step(DualOptimizer& optimizer, Multiplier multiplier, const Vector& signal,
                     const std::optional<IndexList>& indices = std::nullopt);

enum class Scheme { Simultaneous, AlternatingPrimalDual, AlternatingDualPrimal, Extragradient };

std::string to_string(Scheme scheme);

struct ConstrainedOptimizerOptions {
  Scheme scheme = Scheme::Simultaneous;
  /// AlternatingPrimalDual only: feed g(x_t) to the dual step instead of
  /// re-measuring at x_{t+1}. Cheaper, but the dual update lags by one step.
  bool reuse_constraints = false;
  /// Multipliers and penalties are updated on every `dual_update_period`-th
  /// roll; primal-only rolls in between.
  std::int64_t dual_update_period = 1;

  void validate() const;
};

/// Penalty schedule attached to one group, with the violation norm seen at
/// the previous dual update.
struct PenaltySchedule {
  PenaltyScheduler scheduler;
  std::optional<double> previous_norm;
};

struct RollOut {
  double loss = 0.0;
  double primal_lagrangian = 0.0;
  /// sum over groups of <lambda, dual_signal>, without the loss.
  double dual_lagrangian = 0.0;
  CMPState cmp_state;
};

using Evaluator = std::function<Evaluation(const Vector&)>;

/// Orders the primal and dual updates of one problem.
///
/// Each roll evaluates the problem, assembles the Lagrangian, and commits the
/// primal point, the multipliers, the penalties and all optimizer buffers
/// together. If anything throws, nothing is committed.
///
///   Simultaneous           both updates from (x_t, lambda_t)
///   AlternatingPrimalDual  x_{t+1} first, then lambda from g(x_{t+1})
///   AlternatingDualPrimal  lambda_{t+1} from g(x_t), then x from
///                          grad L(x_t, lambda_{t+1})
///   Extragradient          simultaneous preview to (x^, lambda^), then both
///                          updates from (x_t, lambda_t) along the
///                          directions measured at (x^, lambda^)
///
/// Groups missing from a state are left untouched by the dual update.
class ConstrainedOptimizer {
 public:
  ConstrainedOptimizer(ConstrainedMinimizationProblem& problem, PrimalOptimizer primal,
                       DualOptimizerOptions dual = {}, ConstrainedOptimizerOptions options = {});

  /// Replaces the dual optimizer of one multiplier-carrying group.
  void set_dual_optimizer(const std::string& group_id, DualOptimizer optimizer);
  /// Enables penalty growth for a group with a penalty coefficient.
  void set_penalty_scheduler(const std::string& group_id, PenaltyScheduler scheduler);

  RollOut roll();
  /// Uses `evaluate` for every measurement in this roll instead of the
  /// problem's own evaluate(). Results are still validated against the
  /// problem.
  RollOut roll(const Evaluator& evaluate);

  ConstrainedMinimizationProblem& problem() { return *problem_; }
  const ConstrainedMinimizationProblem& problem() const { return *problem_; }
  const ConstrainedOptimizerOptions& options() const { return options_; }

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t step) { step_ = step; }

  PrimalOptimizer& primal_optimizer() { return primal_; }
  const PrimalOptimizer& primal_optimizer() const { return primal_; }
  const std::map<std::string, DualOptimizer>& dual_optimizers() const { return duals_; }
  std::map<std::string, DualOptimizer>& dual_optimizers() { return duals_; }
  const std::map<std::string, PenaltySchedule>& penalty_schedules() const { return schedules_; }
  std::map<std::string, PenaltySchedule>& penalty_schedules() { return schedules_; }

 private:
  struct Working;

  RollOut roll_impl(const Evaluator& full, const std::function<CMPState(const Vector&)>& measure);
  void dual_update(Working& w, const CMPState& state, const AssembledLagrangian& assembled) const;

  ConstrainedMinimizationProblem* problem_;
  PrimalOptimizer primal_;
  std::map<std::string, DualOptimizer> duals_;
  std::map<std::string, PenaltySchedule> schedules_;
  ConstrainedOptimizerOptions options_;
  std::int64_t step_ = 0;
};

}  // namespace lagrangekit
