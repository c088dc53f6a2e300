// Copyright (c) LagrangeKit contributors

#include "lagrangekit/problems.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "lagrangekit/formulations.hpp"
#include "lagrangekit/random.hpp"

namespace lagrangekit {

namespace {

constexpr double kCertificateTolerance = 1e-10;

void require_certificate(const BenchmarkProblem& problem, double data_scale) {
  const auto& sol = *problem.certified_solution;
  const KKTResidual r = kkt_residual(problem, sol.x, sol.lambda, sol.mu);
  const double tol = kCertificateTolerance * std::max(1.0, data_scale);
  if (!(r.max() <= tol))
    throw InvalidArgument(problem.name + ": certified solution fails the KKT check (residual " +
                          std::to_string(r.max()) + ")");
}

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

std::vector<NamedFunction> BenchmarkProblem::oracles() const {
  std::vector<NamedFunction> out{{"objective", objective}};
  for (const auto& c : constraints) out.push_back({c.id, c.function});
  return out;
}

Eigen::Index BenchmarkProblem::inequality_count() const {
  Eigen::Index n = 0;
  for (const auto& c : constraints)
    if (c.type == ConstraintType::Inequality) n += c.function.output_size;
  return n;
}

Eigen::Index BenchmarkProblem::equality_count() const {
  Eigen::Index n = 0;
  for (const auto& c : constraints)
    if (c.type == ConstraintType::Equality) n += c.function.output_size;
  return n;
}

double KKTResidual::max() const { return std::max({stationarity, feasibility, complementarity}); }

KKTResidual kkt_residual(const BenchmarkProblem& problem, const Vector& x, const Vector& lambda,
                         const Vector& mu) {
  if (x.size() != problem.dimension) throw InvalidArgument("x has the wrong dimension");
  if (lambda.size() != problem.inequality_count())
    throw InvalidArgument("lambda has the wrong length");
  if (mu.size() != problem.equality_count()) throw InvalidArgument("mu has the wrong length");
  if ((lambda.array() < 0).any()) throw InvalidArgument("lambda must be non-negative");

  KKTResidual r;
  Vector grad = problem.objective.grad_row(x, 0);
  Eigen::Index li = 0, mi = 0;
  for (const auto& c : problem.constraints) {
    const Vector v = c.function.eval(x);
    const Matrix J = c.function.jacobian(x);
    const Eigen::Index m = c.function.output_size;
    if (c.type == ConstraintType::Inequality) {
      const auto w = lambda.segment(li, m);
      grad.noalias() += J.transpose() * w;
      r.feasibility = std::max(r.feasibility, positive_part(v).maxCoeff());
      r.complementarity = std::max(r.complementarity, w.cwiseProduct(v).cwiseAbs().maxCoeff());
      li += m;
    } else {
      grad.noalias() += J.transpose() * mu.segment(mi, m);
      r.feasibility = std::max(r.feasibility, v.cwiseAbs().maxCoeff());
      mi += m;
    }
  }
  r.stationarity = grad.lpNorm<Eigen::Infinity>();
  return r;
}

BenchmarkProblem problem_projection_ball(const Vector& a) {
  if (a.size() < 1) throw InvalidArgument("projection_ball needs dim >= 1");
  if (!a.allFinite()) throw InvalidArgument("projection_ball: a must be finite");
  const Eigen::Index n = a.size();

  BenchmarkProblem p;
  p.name = "projection_ball";
  p.dimension = n;
  p.objective.output_size = 1;
  p.objective.eval = [a](const Vector& x) { return Vector::Constant(1, (x - a).squaredNorm()); };
  p.objective.grad_row = [a](const Vector& x, Eigen::Index) -> Vector { return 2.0 * (x - a); };

  DifferentiableFunction ball;
  ball.output_size = 1;
  ball.eval = [](const Vector& x) { return Vector::Constant(1, x.squaredNorm() - 1.0); };
  ball.grad_row = [](const Vector& x, Eigen::Index) -> Vector { return 2.0 * x; };
  p.constraints.push_back({"ball", ConstraintType::Inequality, ball});

  const double norm = a.norm();
  CertifiedSolution sol;
  sol.x = a / std::max(1.0, norm);
  sol.lambda = Vector::Constant(1, std::max(0.0, norm - 1.0));
  sol.mu = Vector(0);
  p.certified_solution = sol;
  p.feasible_start = Vector::Zero(n);
  p.initial_point = Vector::Zero(n);
  require_certificate(p, norm * norm);
  return p;
}

BenchmarkProblem problem_equality_qp(const Matrix& Q, const Vector& b, const Matrix& A,
                                     const Vector& c) {
  const Eigen::Index n = Q.rows();
  const Eigen::Index m = A.rows();
  if (n < 1 || Q.cols() != n || b.size() != n || A.cols() != n || c.size() != m || m < 1)
    throw InvalidArgument("equality_qp: inconsistent dimensions");
  if (!Q.isApprox(Q.transpose(), 1e-12)) throw InvalidArgument("equality_qp: Q must be symmetric");
  if (Q.llt().info() != Eigen::Success)
    throw InvalidArgument("equality_qp: Q must be positive definite");

  Matrix K = Matrix::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = Q;
  K.topRightCorner(n, m) = A.transpose();
  K.bottomLeftCorner(m, n) = A;
  Vector rhs(n + m);
  rhs << b, c;
  const Eigen::FullPivLU<Matrix> lu(K);
  if (lu.rank() < n + m) throw InvalidArgument("equality_qp: singular KKT matrix");
  const Vector sol = lu.solve(rhs);

  BenchmarkProblem p;
  p.name = "equality_qp";
  p.dimension = n;
  p.objective.output_size = 1;
  p.objective.eval = [Q, b](const Vector& x) {
    return Vector::Constant(1, 0.5 * x.dot(Q * x) - b.dot(x));
  };
  p.objective.grad_row = [Q, b](const Vector& x, Eigen::Index) -> Vector { return Q * x - b; };

  DifferentiableFunction eq;
  eq.output_size = m;
  eq.eval = [A, c](const Vector& x) -> Vector { return A * x - c; };
  eq.grad_row = [A](const Vector&, Eigen::Index i) -> Vector { return A.row(i).transpose(); };
  p.constraints.push_back({"eq", ConstraintType::Equality, eq});

  // The stationarity row of the KKT system reads Q x + A^T mu = b, which
  // matches grad f + A^T mu = 0 with grad f = Q x - b.
  p.certified_solution = CertifiedSolution{sol.head(n), Vector(0), sol.tail(m)};
  p.feasible_start = A.transpose() * (A * A.transpose()).ldlt().solve(c);
  p.initial_point = Vector::Zero(n);
  const double scale = std::max({Q.cwiseAbs().maxCoeff(), A.cwiseAbs().maxCoeff(),
                                 b.lpNorm<Eigen::Infinity>(), c.lpNorm<Eigen::Infinity>(),
                                 sol.lpNorm<Eigen::Infinity>()});
  require_certificate(p, scale * scale);
  return p;
}

Dataset make_two_gaussians(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  if (n < 1 || d < 1) throw InvalidArgument("dataset needs n >= 1 and d >= 1");
  Rng rng(seed);
  Dataset data{Matrix(n, d), Vector(n)};
  const double offset = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double label = i % 2 == 0 ? 1.0 : -1.0;
    data.labels(i) = label;
    for (Eigen::Index k = 0; k < d; ++k) data.features(i, k) = label * offset + standard_normal(rng);
  }
  return data;
}

BenchmarkProblem problem_norm_constrained_logreg(std::uint64_t dataset_seed, double threshold,
                                                 Eigen::Index d, Eigen::Index n) {
  if (!(threshold > 0)) throw InvalidArgument("norm_logreg: threshold must be positive");
  auto data = std::make_shared<const Dataset>(make_two_gaussians(dataset_seed, n, d));

  BenchmarkProblem p;
  p.name = "norm_logreg";
  p.dimension = d + 1;
  p.objective.output_size = 1;
  p.objective.eval = [data, d](const Vector& x) {
    const Vector margins =
        data->labels.cwiseProduct(data->features * x.head(d) + Vector::Constant(data->labels.size(), x(d)));
    double loss = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) loss += softplus(-margins(i));
    return Vector::Constant(1, loss / static_cast<double>(margins.size()));
  };
  p.objective.grad_row = [data, d](const Vector& x, Eigen::Index) -> Vector {
    const Eigen::Index count = data->labels.size();
    const Vector margins =
        data->labels.cwiseProduct(data->features * x.head(d) + Vector::Constant(count, x(d)));
    // d/ds softplus(-y s) = -y sigmoid(-y s)
    Vector coeff(count);
    for (Eigen::Index i = 0; i < count; ++i) coeff(i) = -data->labels(i) * sigmoid(-margins(i));
    coeff /= static_cast<double>(count);
    Vector grad(d + 1);
    grad.head(d) = data->features.transpose() * coeff;
    grad(d) = coeff.sum();
    return grad;
  };

  DifferentiableFunction norm;
  norm.output_size = 1;
  norm.eval = [threshold](const Vector& x) { return Vector::Constant(1, x.squaredNorm() - threshold); };
  norm.grad_row = [](const Vector& x, Eigen::Index) -> Vector { return 2.0 * x; };
  p.constraints.push_back({"norm", ConstraintType::Inequality, norm});

  p.feasible_start = Vector::Zero(d + 1);
  p.initial_point = Vector::Zero(d + 1);
  return p;
}

BenchmarkProblem problem_bilinear_game() {
  BenchmarkProblem p;
  p.name = "bilinear";
  p.dimension = 1;
  p.objective.output_size = 1;
  p.objective.eval = [](const Vector&) { return Vector::Zero(1); };
  p.objective.grad_row = [](const Vector&, Eigen::Index) -> Vector { return Vector::Zero(1); };

  DifferentiableFunction h;
  h.output_size = 1;
  h.eval = [](const Vector& x) -> Vector { return x; };
  h.grad_row = [](const Vector&, Eigen::Index) -> Vector { return Vector::Ones(1); };
  p.constraints.push_back({"h", ConstraintType::Equality, h});

  p.certified_solution = CertifiedSolution{Vector::Zero(1), Vector(0), Vector::Zero(1)};
  p.feasible_start = Vector::Zero(1);
  p.initial_point = Vector::Ones(1);
  p.initial_multipliers["h"] = 1.0;
  require_certificate(p, 1.0);
  return p;
}

OracleProblem::OracleProblem(BenchmarkProblem benchmark, GroupOptions defaults,
                             const std::map<std::string, GroupOptions>& per_group)
    : ConstrainedMinimizationProblem(benchmark.dimension), benchmark_(std::move(benchmark)) {
  for (const auto& [id, _] : per_group) {
    const bool known = std::any_of(benchmark_.constraints.begin(), benchmark_.constraints.end(),
                                   [&](const ConstraintSpec& c) { return c.id == id; });
    if (!known) throw InvalidArgument(benchmark_.name + " has no constraint group '" + id + "'");
  }
  for (const auto& spec : benchmark_.constraints) {
    auto it = per_group.find(spec.id);
    const GroupOptions& o = it != per_group.end() ? it->second : defaults;
    ConstraintGroup g = make_group(spec.id, spec.type, spec.function.output_size, o.formulation,
                                   o.penalty);
    if (g.multiplier) {
      auto init = benchmark_.initial_multipliers.find(spec.id);
      const double value = init != benchmark_.initial_multipliers.end() ? init->second : 0.0;
      g.multiplier = o.multiplier_kind == Multiplier::Kind::Indexed
                         ? Multiplier::indexed(spec.type, g.size, value)
                         : Multiplier::dense(spec.type, g.size, value);
    }
    register_group(std::move(g));
  }
  set_x(benchmark_.initial_point);
}

CMPState OracleProblem::compute_cmp_state(const Vector& x) const {
  CMPState state;
  state.loss = benchmark_.objective.eval(x)(0);
  for (const auto& spec : benchmark_.constraints)
    state.observed_constraints.emplace(spec.id, ConstraintState{spec.function.eval(x)});
  return state;
}

Evaluation OracleProblem::evaluate(const Vector& x) const {
  Evaluation ev;
  ev.state = compute_cmp_state(x);
  ev.loss_gradient = benchmark_.objective.grad_row(x, 0);
  for (const auto& spec : benchmark_.constraints) ev.jacobians.emplace(spec.id, spec.function.jacobian(x));
  return ev;
}

std::pair<Vector, Vector> multiplier_estimates(const OracleProblem& problem, const CMPState& state) {
  const auto& bench = problem.benchmark();
  Vector lambda(bench.inequality_count());
  Vector mu(bench.equality_count());
  Eigen::Index li = 0, mi = 0;
  for (const auto& spec : bench.constraints) {
    const ConstraintGroup& g = problem.group(spec.id);
    Vector w;
    if (g.multiplier) {
      w = g.multiplier->values();
    } else {
      const ConstraintState& cs = state.observed_constraints.at(spec.id);
      w = primal_weights(g, cs);
    }
    if (spec.type == ConstraintType::Inequality) {
      lambda.segment(li, w.size()) = w;
      li += w.size();
    } else {
      mu.segment(mi, w.size()) = w;
      mi += w.size();
    }
  }
  return {lambda, mu};
}

KKTResidual kkt_residual(const OracleProblem& problem) {
  const CMPState state = problem.compute_cmp_state(problem.x());
  const auto [lambda, mu] = multiplier_estimates(problem, state);
  return kkt_residual(problem.benchmark(), problem.x(), lambda, mu);
}

}  // namespace lagrangekit
