// Copyright (c) LagrangeKit contributors

#include <doctest.h>

#include <cmath>

#include "lagrangekit/formulations.hpp"
#include "lagrangekit/optim.hpp"
#include "lagrangekit/problems.hpp"

using namespace lagrangekit;

TEST_SUITE("problems") {
  TEST_CASE("projection ball certificates") {
    auto cert = [](Vector a) { return *problem_projection_ball(a).certified_solution; };
    const CertifiedSolution outside = cert(Vector{{3.0, 4.0}});
    CHECK(outside.x(0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(outside.x(1) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(outside.lambda(0) == 4.0);
    const CertifiedSolution inside = cert(Vector{{0.3, -0.2}});
    CHECK(inside.x == Vector{{0.3, -0.2}});
    CHECK(inside.lambda(0) == 0.0);
    const CertifiedSolution boundary = cert(Vector{{1.0, 0.0}});
    CHECK(boundary.x == Vector{{1.0, 0.0}});
    CHECK(boundary.lambda(0) == 0.0);
  }

  TEST_CASE("equality QP certificates from the KKT solve") {
    auto cert = [](Matrix A, Vector c, Vector b) {
      return *problem_equality_qp(Matrix::Identity(2, 2), b, A, c).certified_solution;
    };
    const CertifiedSolution s = cert(Matrix{{1.0, 1.0}}, Vector{{2.0}}, Vector::Zero(2));
    CHECK((s.x - Vector{{1.0, 1.0}}).norm() <= 1e-14);
    CHECK(s.mu(0) == doctest::Approx(-1.0).epsilon(1e-14));
    const CertifiedSolution z = cert(Matrix{{1.0, 1.0}}, Vector{{0.0}}, Vector::Zero(2));
    CHECK(z.x.norm() <= 1e-15);
    CHECK(std::abs(z.mu(0)) <= 1e-15);
    const CertifiedSolution f = cert(Matrix{{1.0, 0.0}}, Vector{{5.0}}, Vector::Zero(2));
    CHECK((f.x - Vector{{5.0, 0.0}}).norm() <= 1e-14);
    CHECK(f.mu(0) == doctest::Approx(-5.0).epsilon(1e-14));
  }

  TEST_CASE("equality QP rejects bad data") {
    CHECK_THROWS_AS(problem_equality_qp(Matrix{{1.0, 2.0}, {3.0, 1.0}}, Vector::Zero(2), Matrix{{1.0, 1.0}},
                                        Vector{{1.0}}),
                    InvalidArgument);
    CHECK_THROWS_AS(problem_equality_qp(Matrix::Identity(2, 2), Vector::Zero(3), Matrix{{1.0, 1.0}}, Vector{{1.0}}),
                    InvalidArgument);
  }

  TEST_CASE("logistic regression at the origin") {
    const BenchmarkProblem b = problem_norm_constrained_logreg(4, 1.0);
    const Vector zero = Vector::Zero(b.dimension);
    CHECK(b.dimension == 6);
    CHECK(b.objective.eval(zero)(0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(b.constraints[0].function.eval(zero)(0) == -1.0);
    CHECK_FALSE(b.certified_solution.has_value());
  }

  TEST_CASE("dataset is deterministic per seed") {
    const Dataset a = make_two_gaussians(9), b = make_two_gaussians(9), c = make_two_gaussians(10);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.features != c.features);
    CHECK(a.features.rows() == 200);
    CHECK(a.features.cols() == 5);
    CHECK(a.labels(0) == 1.0);
    CHECK(a.labels(1) == -1.0);
  }

  TEST_CASE("loose threshold keeps the multiplier at zero") {
    OracleProblem p(problem_norm_constrained_logreg(0, 1e6));
    ConstrainedOptimizer opt(p, PrimalOptimizer::adam(1e-2), {DualOptimizerKind::GradientAscent, 1e-2});
    for (int k = 0; k < 300; ++k) opt.roll();
    CHECK(p.group("norm").multiplier->values()(0) == 0.0);
  }

  TEST_CASE("bilinear game") {
    const BenchmarkProblem b = problem_bilinear_game();
    OracleProblem p(b);
    const CMPState s = p.compute_cmp_state(p.x());
    CHECK(assemble_lagrangian(p, s).primal_lagrangian == 1.0);
    p.set_x(Vector::Zero(1));
    CHECK(assemble_lagrangian(p, p.compute_cmp_state(p.x())).primal_lagrangian == 0.0);
  }

  TEST_CASE("KKT residuals") {
    const BenchmarkProblem b = problem_projection_ball(Vector{{3.0, 4.0}});
    const CertifiedSolution& s = *b.certified_solution;
    CHECK(kkt_residual(b, s.x, s.lambda, s.mu).max() <= 1e-10);
    const KKTResidual at_a = kkt_residual(b, Vector{{3.0, 4.0}}, Vector{{0.0}}, Vector(0));
    CHECK(at_a.stationarity == 0.0);
    CHECK(at_a.feasibility == 24.0);
    const KKTResidual interior = kkt_residual(b, Vector{{0.1, 0.1}}, Vector{{0.0}}, Vector(0));
    CHECK(interior.complementarity == 0.0);
    CHECK_THROWS_AS(kkt_residual(b, s.x, Vector{{-1.0}}, Vector(0)), InvalidArgument);
    CHECK_THROWS_AS(kkt_residual(b, s.x, Vector{{1.0, 1.0}}, Vector(0)), InvalidArgument);
  }

  TEST_CASE("oracle problem honours per-group options") {
    OracleProblem p(problem_projection_ball(Vector{{3.0, 4.0}}), {Formulation::AugmentedLagrangian, 3.0},
                    {{"ball", {Formulation::QuadraticPenalty, 7.0}}});
    CHECK(p.group("ball").formulation == Formulation::QuadraticPenalty);
    CHECK(p.group("ball").penalty->at(0) == 7.0);
    CHECK_FALSE(p.group("ball").multiplier.has_value());
    CHECK_THROWS_AS(OracleProblem(problem_bilinear_game(), {}, {{"nope", {}}}), InvalidArgument);
  }

  TEST_CASE("quadratic penalty KKT uses implied multipliers") {
    OracleProblem p(problem_projection_ball(Vector{{3.0, 4.0}}), {Formulation::QuadraticPenalty, 2.0});
    p.set_x(Vector{{1.2, 1.6}});  // g = 3
    const auto [lambda, mu] = multiplier_estimates(p, p.compute_cmp_state(p.x()));
    CHECK(lambda(0) == 6.0);
    CHECK(mu.size() == 0);
  }
}
