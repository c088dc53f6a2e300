// Copyright (c) LagrangeKit contributors

#include "lagrangekit/optim.hpp"

#include <cmath>

namespace lagrangekit {

void PrimalOptimizerOptions::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw InvalidArgument("primal learning rate must be finite and non-negative");
  if (kind == PrimalOptimizerKind::Momentum && !(momentum >= 0 && momentum < 1))
    throw InvalidArgument("momentum must lie in [0, 1)");
  if (kind == PrimalOptimizerKind::AdamLike) {
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw InvalidArgument("moment decay rates must lie in [0, 1)");
    if (!(epsilon > 0)) throw InvalidArgument("epsilon must be positive");
  }
}

Vector primal_step(const PrimalOptimizerOptions& options, PrimalOptimizerState& state,
                   const Vector& x, const Vector& grad) {
  if (grad.size() != x.size())
    throw InvalidArgument("gradient has dimension " + std::to_string(grad.size()) + ", x has " +
                          std::to_string(x.size()));
  if (!grad.allFinite()) throw NumericalError("primal gradient is not finite");

  const double lr = options.learning_rate;
  switch (options.kind) {
    case PrimalOptimizerKind::GD:
      ++state.step_count;
      return x - lr * grad;
    case PrimalOptimizerKind::Momentum: {
      if (!state.first) state.first = Vector::Zero(x.size());
      Vector& v = *state.first;
      v = options.momentum * v + grad;
      ++state.step_count;
      return x - lr * v;
    }
    case PrimalOptimizerKind::AdamLike: {
      if (!state.first) state.first = Vector::Zero(x.size());
      if (!state.second) state.second = Vector::Zero(x.size());
      Vector& m = *state.first;
      Vector& v = *state.second;
      ++state.step_count;
      const double t = static_cast<double>(state.step_count);
      m = options.beta1 * m + (1.0 - options.beta1) * grad;
      v = options.beta2 * v + (1.0 - options.beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(options.beta1, t);
      const double c2 = 1.0 - std::pow(options.beta2, t);
      const auto m_hat = m.array() / c1;
      const auto v_hat = v.array() / c2;
      return x - (lr * m_hat / (v_hat.sqrt() + options.epsilon)).matrix();
    }
  }
  throw InvalidArgument("unknown primal optimizer");
}

PrimalOptimizer::PrimalOptimizer(PrimalOptimizerOptions options) : options_(options) {
  options_.validate();
}

PrimalOptimizer PrimalOptimizer::gradient_descent(double learning_rate) {
  return PrimalOptimizer({PrimalOptimizerKind::GD, learning_rate});
}

PrimalOptimizer PrimalOptimizer::with_momentum(double learning_rate, double momentum) {
  PrimalOptimizerOptions o{PrimalOptimizerKind::Momentum, learning_rate};
  o.momentum = momentum;
  return PrimalOptimizer(o);
}

PrimalOptimizer PrimalOptimizer::adam(double learning_rate, double beta1, double beta2,
                                      double epsilon) {
  PrimalOptimizerOptions o{PrimalOptimizerKind::AdamLike, learning_rate};
  o.beta1 = beta1;
  o.beta2 = beta2;
  o.epsilon = epsilon;
  return PrimalOptimizer(o);
}

Vector PrimalOptimizer::step(const Vector& x, const Vector& grad) {
  PrimalOptimizerState next = state_;
  Vector out = primal_step(options_, next, x, grad);
  state_ = std::move(next);
  return out;
}

Vector PrimalOptimizer::preview(const Vector& x, const Vector& grad) const {
  PrimalOptimizerState scratch = state_;
  return primal_step(options_, scratch, x, grad);
}

void PrimalOptimizer::set_learning_rate(double lr) {
  PrimalOptimizerOptions o = options_;
  o.learning_rate = lr;
  o.validate();
  options_ = o;
}

void PrimalOptimizer::restore(PrimalOptimizerState state) {
  if (state.step_count < 0) throw InvalidArgument("negative primal step count");
  if (state.first && state.second && state.first->size() != state.second->size())
    throw InvalidArgument("primal optimizer buffers disagree in size");
  state_ = std::move(state);
}

void DualOptimizerOptions::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw InvalidArgument("dual learning rate must be finite and non-negative");
  if (kind == DualOptimizerKind::NuPI) {
    if (!(kappa_p >= 0) || !std::isfinite(kappa_p))
      throw InvalidArgument("kappa_p must be finite and non-negative");
    if (!(nu >= 0 && nu < 1)) throw InvalidArgument("nu must lie in [0, 1)");
  }
}

DualOptimizer::DualOptimizer(DualOptimizerOptions options) : options_(options) {
  options_.validate();
}

DualOptimizer DualOptimizer::gradient_ascent(double learning_rate) {
  return DualOptimizer({DualOptimizerKind::GradientAscent, learning_rate});
}

DualOptimizer DualOptimizer::nupi(double learning_rate, double kappa_p, double nu) {
  return DualOptimizer({DualOptimizerKind::NuPI, learning_rate, kappa_p, nu});
}

void DualOptimizer::set_learning_rate(double lr) {
  DualOptimizerOptions o = options_;
  o.learning_rate = lr;
  o.validate();
  options_ = o;
}

void DualOptimizer::restore(DualOptimizerState state) {
  if (state.error_average && state.seen.size() != static_cast<std::size_t>(state.error_average->size()))
    throw InvalidArgument("dual optimizer buffers disagree in size");
  state_ = std::move(state);
}

void DualOptimizer::step(Multiplier& multiplier, const Vector& signal,
                         const std::optional<IndexList>& indices) {
  if (!signal.allFinite()) throw NumericalError("dual signal is not finite");
  const Eigen::Index n = indices ? static_cast<Eigen::Index>(indices->size()) : multiplier.size();
  if (signal.size() != n)
    throw InvalidArgument("dual signal has length " + std::to_string(signal.size()) +
                          ", expected " + std::to_string(n));
  if (indices) check_indices(*indices, multiplier.size());

  const double lr = options_.learning_rate;
  if (options_.kind == DualOptimizerKind::GradientAscent) {
    multiplier.apply_dual_delta(lr * signal, indices);
    return;
  }

  DualOptimizerState next = state_;
  if (!next.error_average) {
    next.error_average = Vector::Zero(multiplier.size());
    next.seen.assign(static_cast<std::size_t>(multiplier.size()), 0);
  } else if (next.error_average->size() != multiplier.size()) {
    throw InvalidArgument("dual optimizer buffers do not match the multiplier size");
  }
  Vector& avg = *next.error_average;
  Vector delta(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = indices ? (*indices)[static_cast<std::size_t>(k)] : k;
    const double e = signal(k);
    auto& seen = next.seen[static_cast<std::size_t>(i)];
    const double previous = seen ? avg(i) : e;
    const double current = options_.nu * previous + (1.0 - options_.nu) * e;
    delta(k) = lr * (e + options_.kappa_p * (current - previous));
    avg(i) = current;
    seen = 1;
  }
  multiplier.apply_dual_delta(delta, indices);
  state_ = std::move(next);
}

Multiplier DualOptimizer::preview(const Multiplier& multiplier, const Vector& signal,
                                  const std::optional<IndexList>& indices) const {
  DualOptimizer scratch = *this;
  Multiplier out = multiplier;
  scratch.step(out, signal, indices);
  return out;
}

Multiplier dual_step(DualOptimizer& optimizer, Multiplier multiplier, const Vector& signal,
                     const std::optional<IndexList>& indices) {
  optimizer.step(multiplier, signal, indices);
  return multiplier;
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Simultaneous:
      return "simultaneous";
    case Scheme::AlternatingPrimalDual:
      return "alt-pd";
    case Scheme::AlternatingDualPrimal:
      return "alt-dp";
    case Scheme::Extragradient:
      return "extragradient";
  }
  return "unknown";
}

void ConstrainedOptimizerOptions::validate() const {
  if (dual_update_period < 1) throw InvalidArgument("dual update period must be at least 1");
}

// Everything a roll may modify. Committed to the optimizer and problem only
// after the whole roll succeeded.
struct ConstrainedOptimizer::Working {
  std::vector<ConstraintGroup> groups;
  PrimalOptimizer primal;
  std::map<std::string, DualOptimizer> duals;
  std::map<std::string, PenaltySchedule> schedules;
  bool dual_tick = true;
};

ConstrainedOptimizer::ConstrainedOptimizer(ConstrainedMinimizationProblem& problem,
                                           PrimalOptimizer primal, DualOptimizerOptions dual,
                                           ConstrainedOptimizerOptions options)
    : problem_(&problem), primal_(std::move(primal)), options_(options) {
  options_.validate();
  dual.validate();
  problem.freeze();
  for (const auto& g : problem.groups())
    if (g.multiplier) duals_.emplace(g.id, DualOptimizer(dual));
}

void ConstrainedOptimizer::set_dual_optimizer(const std::string& group_id, DualOptimizer optimizer) {
  if (!problem_->group(group_id).multiplier)
    throw InvalidArgument("group '" + group_id + "' has no multiplier");
  duals_.insert_or_assign(group_id, std::move(optimizer));
}

void ConstrainedOptimizer::set_penalty_scheduler(const std::string& group_id,
                                                 PenaltyScheduler scheduler) {
  if (!problem_->group(group_id).penalty)
    throw InvalidArgument("group '" + group_id + "' has no penalty coefficient");
  scheduler.validate();
  schedules_.insert_or_assign(group_id, PenaltySchedule{scheduler, std::nullopt});
}

void ConstrainedOptimizer::dual_update(Working& w, const CMPState& state,
                                       const AssembledLagrangian& assembled) const {
  if (!w.dual_tick) return;
  for (auto& group : w.groups) {
    auto it = state.observed_constraints.find(group.id);
    if (it == state.observed_constraints.end()) continue;
    const ConstraintState& cs = it->second;
    if (group.multiplier)
      w.duals.at(group.id).step(*group.multiplier, assembled.dual_signals.at(group.id),
                                cs.observed_indices);
    auto sched = w.schedules.find(group.id);
    if (sched != w.schedules.end() && group.penalty) {
      const double now = violation_norm(group.constraint_type, cs);
      if (sched->second.previous_norm)
        group.penalty = schedule_penalty(*group.penalty, sched->second.scheduler, now,
                                         *sched->second.previous_norm);
      sched->second.previous_norm = now;
    }
  }
}

RollOut ConstrainedOptimizer::roll() {
  const auto& p = *problem_;
  return roll_impl([&p](const Vector& x) { return p.checked_evaluate(x); },
                   [&p](const Vector& x) { return p.checked_cmp_state(x); });
}

RollOut ConstrainedOptimizer::roll(const Evaluator& evaluate) {
  const auto& p = *problem_;
  auto full = [&](const Vector& x) {
    Evaluation ev = evaluate(x);
    p.validate_state(ev.state);
    return ev;
  };
  return roll_impl(full, [&](const Vector& x) { return full(x).state; });
}

RollOut ConstrainedOptimizer::roll_impl(const Evaluator& full,
                                        const std::function<CMPState(const Vector&)>& measure) {
  ConstrainedMinimizationProblem& p = *problem_;
  Working w{p.groups(), primal_, duals_, schedules_};
  w.dual_tick = (step_ + 1) % options_.dual_update_period == 0;

  const Vector x0 = p.x();
  Vector x1;
  RollOut out;

  switch (options_.scheme) {
    case Scheme::Simultaneous: {
      const Evaluation ev = full(x0);
      const AssembledLagrangian a = assemble_lagrangian(w.groups, ev.state);
      const Vector grad = primal_lagrangian_gradient(w.groups, ev);
      x1 = w.primal.step(x0, grad);
      dual_update(w, ev.state, a);
      out = {ev.state.loss, a.primal_lagrangian, a.dual_lagrangian, ev.state};
      break;
    }
    case Scheme::AlternatingPrimalDual: {
      const Evaluation ev = full(x0);
      const AssembledLagrangian a = assemble_lagrangian(w.groups, ev.state);
      x1 = w.primal.step(x0, primal_lagrangian_gradient(w.groups, ev));
      out = {ev.state.loss, a.primal_lagrangian, a.dual_lagrangian, ev.state};
      if (w.dual_tick) {
        if (options_.reuse_constraints) {
          dual_update(w, ev.state, a);
        } else {
          const CMPState next = measure(x1);
          const AssembledLagrangian an = assemble_lagrangian(w.groups, next);
          dual_update(w, next, an);
          out.dual_lagrangian = an.dual_lagrangian;
        }
      }
      break;
    }
    case Scheme::AlternatingDualPrimal: {
      const Evaluation ev = full(x0);
      const AssembledLagrangian before = assemble_lagrangian(w.groups, ev.state);
      dual_update(w, ev.state, before);
      const AssembledLagrangian after = assemble_lagrangian(w.groups, ev.state);
      x1 = w.primal.step(x0, primal_lagrangian_gradient(w.groups, ev));
      out = {ev.state.loss, after.primal_lagrangian, before.dual_lagrangian, ev.state};
      break;
    }
    case Scheme::Extragradient: {
      const Evaluation ev = full(x0);
      const AssembledLagrangian a = assemble_lagrangian(w.groups, ev.state);
      const Vector x_hat = w.primal.preview(x0, primal_lagrangian_gradient(w.groups, ev));
      if (!x_hat.allFinite()) throw NumericalError("extrapolated point is not finite");

      std::vector<ConstraintGroup> hat_groups = w.groups;
      if (w.dual_tick) {
        for (auto& g : hat_groups) {
          auto it = ev.state.observed_constraints.find(g.id);
          if (it == ev.state.observed_constraints.end() || !g.multiplier) continue;
          g.multiplier = w.duals.at(g.id).preview(*g.multiplier, a.dual_signals.at(g.id),
                                                  it->second.observed_indices);
        }
      }

      const Evaluation ev_hat = full(x_hat);
      const AssembledLagrangian a_hat = assemble_lagrangian(hat_groups, ev_hat.state);
      x1 = w.primal.step(x0, primal_lagrangian_gradient(hat_groups, ev_hat));
      dual_update(w, ev_hat.state, a_hat);
      out = {ev_hat.state.loss, a_hat.primal_lagrangian, a_hat.dual_lagrangian, ev_hat.state};
      break;
    }
  }

  if (!x1.allFinite()) throw NumericalError("primal step produced a non-finite point");
  for (const auto& g : w.groups)
    if (g.multiplier && !g.multiplier->values().allFinite())
      throw NumericalError("multiplier of group '" + g.id + "' is not finite");

  p.set_x(x1);
  p.groups() = std::move(w.groups);
  primal_ = std::move(w.primal);
  duals_ = std::move(w.duals);
  schedules_ = std::move(w.schedules);
  ++step_;
  return out;
}

}  // namespace lagrangekit
