// Copyright (c) LagrangeKit contributors
//
// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lagrangekit/checkpoint.hpp"
#include "lagrangekit/formulations.hpp"
#include "lagrangekit/optim.hpp"
#include "lagrangekit/problems.hpp"
#include "lagrangekit/random.hpp"
#include "support.hpp"

using namespace lagrangekit;
using lagrangekit::testing::LambdaProblem;
using lagrangekit::testing::LinearFixture;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_bits(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::memcmp(&a(i), &b(i), sizeof(double)) != 0) return false;
  return true;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

Outcome certified_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  OracleProblem problem(problem_projection_ball(Vector{{3.0, 4.0}}));
  ConstrainedOptimizer opt(problem, PrimalOptimizer::gradient_descent(0.05),
                           {DualOptimizerKind::GradientAscent, 0.05});
  for (int k = 0; k < 5000; ++k) opt.roll();
  const double elapsed = seconds_since(t0);
  const double x_err = (problem.x() - Vector{{0.6, 0.8}}).cwiseAbs().maxCoeff();
  const double l_err = std::abs(problem.group("ball").multiplier->values()(0) - 4.0);
  return {x_err <= 1e-3 && l_err <= 1e-2 && elapsed < 1.0,
          "|x-x*|=" + num(x_err) + " |lambda-4|=" + num(l_err) + " time=" + num(elapsed) + "s"};
}

Outcome bilinear_contrast() {
  auto run = [](Scheme scheme, std::vector<double>& energy, Vector& first) {
    OracleProblem problem(problem_bilinear_game());
    ConstrainedOptimizer opt(problem, PrimalOptimizer::gradient_descent(0.1),
                             {DualOptimizerKind::GradientAscent, 0.1}, {scheme});
    auto mu = [&] { return problem.group("h").multiplier->values()(0); };
    energy.push_back(problem.x()(0) * problem.x()(0) + mu() * mu());
    for (int k = 0; k < 100; ++k) {
      opt.roll();
      const double x = problem.x()(0);
      const double m = mu();
      if (k == 0) first = Vector{{x, m}};
      energy.push_back(x * x + m * m);
    }
  };
  std::vector<double> sim, eg;
  Vector sim_first, eg_first;
  run(Scheme::Simultaneous, sim, sim_first);
  run(Scheme::Extragradient, eg, eg_first);

  bool increasing = true;
  for (std::size_t i = 1; i < sim.size(); ++i) increasing = increasing && sim[i] > sim[i - 1];
  const bool sim_first_ok = same_bits(sim_first, Vector{{1.0 - 0.1 * 1.0, 1.0 + 0.1 * 1.0}});
  const bool eg_first_ok = same_bits(
      eg_first, Vector{{1.0 - 0.1 * (1.0 + 0.1 * 1.0), 1.0 + 0.1 * (1.0 - 0.1 * 1.0)}});
  const bool pass = increasing && sim.back() > 2.0 && eg.back() < 2.0 && eg.back() < eg.front() &&
                    sim_first_ok && eg_first_ok;
  return {pass, "sim increasing=" + std::string(increasing ? "yes" : "no") + " sim final=" +
                    num(sim.back()) + " eg final=" + num(eg.back()) + " first steps exact=" +
                    (sim_first_ok && eg_first_ok ? "yes" : "no")};
}

Outcome equality_qp_augmented() {
  BenchmarkProblem bench = problem_equality_qp(Matrix::Identity(2, 2), Vector::Zero(2),
                                               Matrix{{1.0, 1.0}}, Vector{{2.0}});
  const CertifiedSolution oracle = *bench.certified_solution;
  OracleProblem problem(bench, {Formulation::AugmentedLagrangian, 1.0});
  problem.set_x(Vector::Zero(2));
  // 10 outer rounds of 200 primal steps: multipliers and penalty move once per round.
  ConstrainedOptimizer opt(problem, PrimalOptimizer::gradient_descent(0.1),
                           {DualOptimizerKind::GradientAscent, 1.0},
                           {Scheme::Simultaneous, false, 200});
  opt.set_penalty_scheduler("eq", {10.0, 0.5, 1e8});
  for (int k = 0; k < 2000; ++k) opt.roll();
  const double x_err = (problem.x() - oracle.x).cwiseAbs().maxCoeff();
  const double mu_err = std::abs(problem.group("eq").multiplier->values()(0) - oracle.mu(0));
  return {x_err <= 1e-4 && mu_err <= 1e-3,
          "|x-x*|=" + num(x_err) + " |mu-mu*|=" + num(mu_err) + " oracle mu=" + num(oracle.mu(0))};
}

Outcome gradient_consistency() {
  std::vector<BenchmarkProblem> benches{
      problem_projection_ball(Vector{{3.0, 4.0}}),
      problem_equality_qp(Matrix::Identity(2, 2), Vector::Zero(2), Matrix{{1.0, 1.0}},
                          Vector{{2.0}}),
      problem_norm_constrained_logreg(0, 1.0), problem_bilinear_game()};
  const std::vector<Formulation> forms{Formulation::Lagrangian, Formulation::AugmentedLagrangian,
                                       Formulation::QuadraticPenalty};
  int checked = 0, skipped = 0, failed = 0;
  std::string first_failure;
  for (const auto& bench : benches) {
    for (Formulation form : forms) {
      Rng rng(0xC0FFEE);
      OracleProblem problem(bench, {form});
      int accepted = 0;
      while (accepted < 100) {
        const Vector x = normal_vector(rng, bench.dimension, 2.0);
        for (auto& g : problem.groups()) {
          if (g.multiplier) {
            Vector v = normal_vector(rng, g.size);
            if (g.constraint_type == ConstraintType::Inequality) v = v.cwiseAbs();
            g.multiplier->restore(v, g.multiplier->update_counts());
          }
          if (g.penalty) g.penalty = PenaltyCoefficient(0.5 + 4.5 * uniform_open(rng));
        }
        const CMPState state = problem.compute_cmp_state(x);
        bool kink = false;
        for (const auto& g : problem.groups()) {
          if (g.constraint_type != ConstraintType::Inequality || g.formulation == Formulation::Lagrangian)
            continue;
          const Vector& v = state.observed_constraints.at(g.id).violation;
          for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double shift = g.multiplier ? g.multiplier->values()(i) / g.penalty->at(i) : 0.0;
            kink = kink || std::abs(v(i) + shift) < 1e-4;
          }
        }
        if (kink) {
          ++skipped;
          continue;
        }
        ++accepted;
        DifferentiableFunction lagrangian{
            1,
            [&](const Vector& y) {
              return Vector::Constant(1, assemble_lagrangian(problem, problem.compute_cmp_state(y))
                                             .primal_lagrangian);
            },
            [&](const Vector& y, Eigen::Index) {
              return primal_lagrangian_gradient(problem, problem.evaluate(y));
            }};
        const auto report = check_gradients({{"lagrangian", lagrangian}}, x, 1e-5, 1e-8);
        ++checked;
        if (!report.passed()) {
          ++failed;
          if (first_failure.empty())
            first_failure = " first failure: " + bench.name + "/" + to_string(form) + " " + report.failures();
        }
      }
    }
  }
  return {failed == 0, std::to_string(checked) + " points checked, " + std::to_string(skipped) +
                           " kink-adjacent skipped, " + std::to_string(failed) + " failed" +
                           first_failure};
}

Outcome nupi_reduction() {
  bool all = true;
  std::string detail;
  for (double nu : {0.0, 0.5, 0.9}) {
    auto trajectory = [&](DualOptimizerOptions dual) {
      OracleProblem problem(problem_projection_ball(Vector{{3.0, 4.0}}));
      ConstrainedOptimizer opt(problem, PrimalOptimizer::gradient_descent(0.05), dual);
      std::vector<Vector> out;
      for (int k = 0; k < 100; ++k) {
        opt.roll();
        Vector row(3);
        row << problem.x(), problem.group("ball").multiplier->values();
        out.push_back(row);
      }
      return out;
    };
    const auto ga = trajectory({DualOptimizerKind::GradientAscent, 0.05});
    const auto pi = trajectory({DualOptimizerKind::NuPI, 0.05, 0.0, nu});
    bool same = true;
    for (std::size_t k = 0; k < ga.size(); ++k) same = same && same_bits(ga[k], pi[k]);
    all = all && same;
    detail += "nu=" + num(nu) + (same ? ":identical " : ":DIFFERENT ");
  }
  return {all, detail};
}

Outcome proxy_data_path() {
  const double eta_x = 0.1, eta_l = 0.5;
  LinearFixture fixture{Vector{{2.0, -1.0}}, Matrix{{1.0, 0.0}}, Vector{{0.5}}, 1.0, std::nullopt};
  LinearFixture plain = fixture;
  plain.strict_offset.reset();

  LambdaProblem problem(2, fixture);
  problem.register_group(make_group("g", ConstraintType::Inequality, 1));
  problem.set_x(Vector{{0.0, 0.0}});
  ConstrainedOptimizer opt(problem, PrimalOptimizer::gradient_descent(eta_x),
                           {DualOptimizerKind::GradientAscent, eta_l});

  // Hand-rolled reference: primal uses the differentiable violation, dual the strict one.
  Vector x{{0.0, 0.0}};
  double lambda = 0.0;
  bool match = true, grad_same = true;
  for (int k = 0; k < 3; ++k) {
    const Evaluation with_strict = fixture(problem.x());
    const Evaluation without = plain(problem.x());
    grad_same = grad_same && same_bits(primal_lagrangian_gradient(problem, with_strict),
                                       primal_lagrangian_gradient(problem, without));
    opt.roll();
    const Vector grad = (x - fixture.target) + fixture.A.transpose() * Vector::Constant(1, lambda);
    const double strict = (fixture.A * x - fixture.b)(0) + 1.0;
    x = x - eta_x * grad;
    lambda = std::max(0.0, lambda + eta_l * strict);
    match = match && same_bits(problem.x(), x) &&
            same_bits(problem.group("g").multiplier->values()(0), lambda);
  }
  return {match && grad_same, std::string("trajectory ") + (match ? "exact" : "DIFFERS") +
                                  ", primal gradient " + (grad_same ? "unchanged" : "CHANGED") +
                                  ", lambda_3=" + num(lambda)};
}

Outcome dense_indexed_equivalence() {
  Rng rng(7);
  const Eigen::Index n = 4, m = 6;
  Matrix A(m, n);
  for (Eigen::Index i = 0; i < m; ++i) A.row(i) = normal_vector(rng, n).transpose();
  const Vector b = normal_vector(rng, m, 0.3);
  const Vector target = normal_vector(rng, n, 3.0);

  auto run = [&](Multiplier::Kind kind, std::optional<IndexList> observed) {
    LambdaProblem problem(n, LinearFixture{target, A, b, std::nullopt, observed});
    ConstraintGroup g = make_group("g", ConstraintType::Inequality, m);
    g.multiplier = kind == Multiplier::Kind::Indexed ? Multiplier::indexed(ConstraintType::Inequality, m, 0.25)
                                                      : Multiplier::dense(ConstraintType::Inequality, m, 0.25);
    problem.register_group(std::move(g));
    ConstrainedOptimizer opt(problem, PrimalOptimizer::gradient_descent(0.05),
                             {DualOptimizerKind::GradientAscent, 0.05});
    std::vector<Vector> traj;
    for (int k = 0; k < 200; ++k) {
      opt.roll();
      traj.push_back(problem.group("g").multiplier->values());
    }
    return traj;
  };
  IndexList all(m);
  for (Eigen::Index i = 0; i < m; ++i) all[static_cast<std::size_t>(i)] = i;
  const auto dense = run(Multiplier::Kind::Dense, std::nullopt);
  const auto indexed = run(Multiplier::Kind::Indexed, all);
  bool same = true;
  for (std::size_t k = 0; k < dense.size(); ++k) same = same && same_bits(dense[k], indexed[k]);

  const IndexList subset{1, 4};
  const auto partial = run(Multiplier::Kind::Indexed, subset);
  bool frozen = true, moved = false;
  for (const auto& v : partial)
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i == 1 || i == 4) moved = moved || v(i) != 0.25;
      else frozen = frozen && same_bits(v(i), 0.25);
    }
  return {same && frozen && moved, std::string("all-observed ") + (same ? "identical" : "DIFFERENT") +
                                       ", unobserved entries " + (frozen ? "frozen" : "MOVED")};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

Outcome exact_resume() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("lagrangekit_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cli = LAGRANGEKIT_CLI_PATH;
  const std::vector<std::pair<std::string, std::string>> setups{
      {"projection_ball", "--a 3,4 --primal-optimizer adam --lr-primal 0.05 --dual-optimizer nupi "
                          "--lr-dual 0.05 --kappa-p 0.5 --nu 0.5 --penalty-schedule"},
      {"equality_qp", "--primal-optimizer momentum --lr-primal 0.02 --lr-dual 0.1 --penalty-schedule --penalty-max 10"},
  };
  int combos = 0, failures = 0;
  std::string first;
  for (const auto& [problem, extra] : setups)
    for (const char* scheme : {"simultaneous", "alt-pd", "alt-dp", "extragradient"})
      for (const char* form : {"lagrangian", "augmented_lagrangian", "quadratic_penalty"}) {
        ++combos;
        const std::string base = cli + " run --problem " + problem + " " + extra + " --scheme " +
                                  scheme + " --formulation " + form;
        const fs::path full = dir / "full.csv", part = dir / "part.csv", ckpt = dir / "ckpt";
        fs::remove(part);
        int rc = shell(base + " --steps 50 --trace " + full.string());
        rc |= shell(base + " --steps 30 --trace " + part.string() + " --checkpoint-out " + ckpt.string());
        rc |= shell(base + " --steps 20 --trace " + part.string() + " --trace-append --checkpoint-in " +
                    ckpt.string());
        const std::string a = read_file(full), b = read_file(part);
        if (rc != 0 || a.empty() || a != b) {
          ++failures;
          if (first.empty()) first = std::string(" first: ") + problem + "/" + scheme + "/" + form;
        }
      }
  fs::remove_all(dir);
  return {failures == 0, std::to_string(combos - failures) + "/" + std::to_string(combos) +
                             " traces byte-identical" + first};
}

Outcome norm_logreg() {
  const auto t0 = std::chrono::steady_clock::now();
  OracleProblem problem(problem_norm_constrained_logreg(0, 1.0, 5, 200));
  ConstrainedOptimizer opt(problem, PrimalOptimizer::adam(1e-3),
                           {DualOptimizerKind::GradientAscent, 1e-2}, {Scheme::Simultaneous});
  for (int k = 0; k < 20000; ++k) opt.roll();
  const double elapsed = seconds_since(t0);
  const double lambda = problem.group("norm").multiplier->values()(0);
  const double g = problem.compute_cmp_state(problem.x()).observed_constraints.at("norm").violation(0);
  const KKTResidual r = kkt_residual(problem);
  const bool pass = std::max(g, 0.0) <= 1e-3 && lambda >= 0.0 && std::abs(lambda * g) <= 1e-3 &&
                    r.stationarity <= 1e-2 && elapsed < 30.0;
  return {pass, "violation=" + num(std::max(g, 0.0)) + " lambda=" + num(lambda) + " |lambda*g|=" +
                    num(std::abs(lambda * g)) + " stationarity=" + num(r.stationarity) +
                    " time=" + num(elapsed) + "s"};
}

// Property suites, each over 100 seeded inputs.
Outcome invariant_suites() {
  constexpr int kCases = 100;
  int bad_idem = 0, bad_zero = 0, bad_qp = 0, bad_al = 0, bad_atomic = 0;

  for (int s = 0; s < kCases; ++s) {
    Rng rng(1000 + s);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 8);
    const auto kind = rng() % 2 == 0 ? Multiplier::Kind::Dense : Multiplier::Kind::Indexed;
    Multiplier base = Multiplier::from_values(kind, ConstraintType::Inequality, normal_vector(rng, m));
    const Multiplier p1 = apply_dual_delta(base, normal_vector(rng, m, 3.0));
    const Multiplier p2 = project(p1);
    if (!same_bits(p1.values(), p2.values()) || (p1.values().array() < 0).any()) ++bad_idem;
  }

  for (int s = 0; s < kCases; ++s) {
    Rng rng(2000 + s);
    const Vector a = normal_vector(rng, 3, 2.0);
    OracleProblem problem(problem_projection_ball(a));
    const CMPState state = problem.compute_cmp_state(normal_vector(rng, 3, 2.0));
    if (!same_bits(assemble_lagrangian(problem, state).primal_lagrangian, state.loss)) ++bad_zero;
  }

  for (int s = 0; s < kCases; ++s) {
    Rng rng(3000 + s);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 6);
    const bool ineq = rng() % 2 == 0;
    const ConstraintType type = ineq ? ConstraintType::Inequality : ConstraintType::Equality;
    ConstraintGroup g = make_group("q", type, m, Formulation::QuadraticPenalty, 0.1 + 10 * uniform_open(rng));
    const Vector v = ineq ? Vector(-normal_vector(rng, m).cwiseAbs()) : Vector(Vector::Zero(m));
    const ContributionPair c = compute_contribution(g, ConstraintState{v});
    if (c.primal_term != 0.0 || !primal_weights(g, ConstraintState{v}).isZero(0.0)) ++bad_qp;
  }

  for (int s = 0; s < kCases; ++s) {
    Rng rng(4000 + s);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 6);
    const bool ineq = rng() % 2 == 0;
    const ConstraintType type = ineq ? ConstraintType::Inequality : ConstraintType::Equality;
    const double c = 0.1 + 10 * uniform_open(rng);
    Vector lam = normal_vector(rng, m);
    if (ineq) lam = lam.cwiseAbs();
    ConstraintState state{normal_vector(rng, m)};
    if (rng() % 2 == 0) state.strict_violation = normal_vector(rng, m);
    ConstraintGroup plain = make_group("p", type, m, Formulation::Lagrangian);
    plain.multiplier->restore(lam, plain.multiplier->update_counts());
    ConstraintGroup al = make_group("p", type, m, Formulation::AugmentedLagrangian, c);
    al.multiplier->restore(lam, al.multiplier->update_counts());
    const Vector expected = c * compute_contribution(plain, state).dual_signal;
    if (!same_bits(compute_contribution(al, state).dual_signal, expected)) ++bad_al;
  }

  const Scheme schemes[] = {Scheme::Simultaneous, Scheme::AlternatingPrimalDual,
                            Scheme::AlternatingDualPrimal, Scheme::Extragradient};
  const Formulation forms[] = {Formulation::Lagrangian, Formulation::AugmentedLagrangian,
                               Formulation::QuadraticPenalty};
  for (int s = 0; s < kCases; ++s) {
    Rng rng(5000 + s);
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 3), m = 1 + static_cast<Eigen::Index>(rng() % 4);
    Matrix A(m, n);
    for (Eigen::Index i = 0; i < m; ++i) A.row(i) = normal_vector(rng, n).transpose();
    LinearFixture fixture{normal_vector(rng, n, 2.0), A, normal_vector(rng, m, 0.3), std::nullopt, std::nullopt};
    LambdaProblem problem(n, fixture);
    const Scheme scheme = schemes[rng() % 4];
    problem.register_group(make_group("g", ConstraintType::Inequality, m, forms[rng() % 3], 2.0));
    ConstrainedOptimizer opt(problem, PrimalOptimizer::adam(0.01),
                             {DualOptimizerKind::NuPI, 0.05, 0.3, 0.5}, {scheme});
    if (problem.group("g").penalty) opt.set_penalty_scheduler("g", {});
    const int warmup = static_cast<int>(rng() % 20);
    for (int k = 0; k < warmup; ++k) opt.roll();

    const int calls_per_roll = scheme == Scheme::AlternatingPrimalDual || scheme == Scheme::Extragradient ? 2 : 1;
    const int fail_at = 1 + static_cast<int>(rng() % calls_per_roll);
    const bool throw_error = rng() % 2 == 0;
    int calls = 0;
    Evaluator faulty = [&](const Vector& x) {
      Evaluation ev = fixture(x);
      if (++calls == fail_at) {
        if (throw_error) throw EvaluationError("g", "injected failure");
        ev.state.loss = std::nan("");
      }
      return ev;
    };
    const std::string before = serialize_checkpoint(opt);
    bool raised = false;
    try {
      opt.roll(faulty);
    } catch (const NumericalError&) {
      raised = true;
    }
    if (!raised || serialize_checkpoint(opt) != before) ++bad_atomic;
  }

  const int bad = bad_idem + bad_zero + bad_qp + bad_al + bad_atomic;
  return {bad == 0, "violations per 100 cases: idempotence=" + std::to_string(bad_idem) +
                        " zero-multiplier=" + std::to_string(bad_zero) + " qp-feasible-zero=" +
                        std::to_string(bad_qp) + " al-dual-signal=" + std::to_string(bad_al) +
                        " roll-atomicity=" + std::to_string(bad_atomic)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 certified-solution convergence", certified_convergence},
      {"2 bilinear contrast", bilinear_contrast},
      {"3 equality QP via augmented Lagrangian", equality_qp_augmented},
      {"4 gradient consistency", gradient_consistency},
      {"5 nuPI reduction", nupi_reduction},
      {"6 proxy data path", proxy_data_path},
      {"7 dense/indexed equivalence", dense_indexed_equivalence},
      {"8 exact resume", exact_resume},
      {"9 norm-constrained logistic regression", norm_logreg},
      {"10 invariant suites", invariant_suites},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << "criterion " << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed == 0 ? 0 : 1;
}
