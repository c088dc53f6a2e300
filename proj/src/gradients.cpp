// Copyright (c) LagrangeKit contributors

#include "lagrangekit/gradients.hpp"

#include <cmath>
#include <string>

namespace lagrangekit {

Matrix DifferentiableFunction::jacobian(const Vector& x) const {
  Matrix J(output_size, x.size());
  for (Eigen::Index i = 0; i < output_size; ++i) {
    Vector row = grad_row(x, i);
    if (row.size() != x.size())
      throw InvalidArgument("gradient row " + std::to_string(i) + " has length " +
                            std::to_string(row.size()) + ", expected " + std::to_string(x.size()));
    J.row(i) = row.transpose();
  }
  return J;
}

Vector compose_primal_gradient(const Vector& grad_f, const std::vector<WeightedJacobian>& terms) {
  Vector grad = grad_f;
  for (const auto& term : terms) {
    if (term.jacobian.cols() != grad_f.size())
      throw InvalidArgument("constraint gradient dimension " +
                            std::to_string(term.jacobian.cols()) + " does not match dim(x) " +
                            std::to_string(grad_f.size()));
    if (term.jacobian.rows() != term.weights.size())
      throw InvalidArgument("weight count does not match the number of gradient rows");
    if (!term.weights.allFinite()) throw InvalidArgument("gradient weights must be finite");
    grad.noalias() += term.jacobian.transpose() * term.weights;
  }
  return grad;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& fun,
                                  const Vector& x) {
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = finite_difference_step(x(k));
    probe(k) = x(k) + h;
    const double up = fun(probe);
    probe(k) = x(k) - h;
    const double down = fun(probe);
    probe(k) = x(k);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw InvalidArgument("non-finite evaluation near x at coordinate " + std::to_string(k));
    grad(k) = (up - down) / (2.0 * h);
  }
  return grad;
}

Vector finite_difference_gradient(const DifferentiableFunction& fun, const Vector& x,
                                  Eigen::Index output_index) {
  if (output_index < 0 || output_index >= fun.output_size)
    throw InvalidArgument("output index out of range");
  return finite_difference_gradient(
      [&](const Vector& p) { return fun.eval(p)(output_index); }, x);
}

bool GradientCheckReport::passed() const {
  for (const auto& f : functions)
    if (!f.passed) return false;
  return true;
}

std::string GradientCheckReport::failures() const {
  std::string out;
  for (const auto& f : functions) {
    if (f.passed) continue;
    if (!out.empty()) out += ", ";
    out += f.name;
  }
  return out;
}

GradientCheckReport check_gradients(const std::vector<NamedFunction>& functions, const Vector& x,
                                    double rel_tol, double abs_tol) {
  if (x.size() < 1) throw InvalidArgument("gradient check needs dim(x) >= 1");
  if (!(rel_tol > 0) || !(abs_tol > 0)) throw InvalidArgument("tolerances must be positive");

  GradientCheckReport report;
  for (const auto& named : functions) {
    FunctionCheck check{named.name};
    double worst_excess = -INFINITY;
    for (Eigen::Index i = 0; i < named.function.output_size; ++i) {
      const Vector analytic = named.function.grad_row(x, i);
      const Vector fd = finite_difference_gradient(named.function, x, i);
      if (analytic.size() != x.size())
        throw InvalidArgument(named.name + ": gradient row has the wrong length");
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double dev = std::abs(analytic(k) - fd(k));
        const double excess = dev - (abs_tol + rel_tol * std::abs(fd(k)));
        check.max_deviation = std::max(check.max_deviation, dev);
        if (!std::isfinite(dev) || excess > 0) check.passed = false;
        if (excess > worst_excess) {
          worst_excess = excess;
          check.worst_output = i;
          check.worst_coordinate = k;
        }
      }
    }
    report.functions.push_back(std::move(check));
  }
  return report;
}

}  // namespace lagrangekit
