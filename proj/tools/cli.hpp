// Copyright (c) LagrangeKit contributors

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lagrangekit/problems.hpp"

namespace lagrangekit::cli {

/// Exit codes of the command-line runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitGradientMismatch = 3;

/// Exact trace header.
inline constexpr const char* kTraceHeader =
    "step,loss,primal_lagrangian,dual_lagrangian,max_ineq_violation,max_eq_violation,"
    "multiplier_linf,kkt_stationarity,kkt_complementarity";

/// Problem parameters gathered from the command line. Each problem reads the
/// fields it needs.
struct ProblemParams {
  std::vector<double> a{3.0, 4.0};
  std::string Q = "1,0;0,1";
  std::string b = "0,0";
  std::string A = "1,1";
  std::string c = "2";
  std::uint64_t seed = 0;
  double threshold = 1.0;
  int dim = 5;
  int samples = 200;
};

struct ProblemEntry {
  std::string name;
  std::string description;
  std::function<BenchmarkProblem(const ProblemParams&)> make;
};

class Registry {
 public:
  void add(ProblemEntry entry);
  const ProblemEntry* find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<ProblemEntry> entries_;
};

/// projection_ball, equality_qp, norm_logreg, bilinear.
Registry default_registry();

/// Parses "1,2;3,4" (rows separated by ';') into a matrix.
Matrix parse_matrix(const std::string& text);
Vector parse_vector(const std::string& text);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Registry& registry = default_registry());

}  // namespace lagrangekit::cli
