// Copyright (c) LagrangeKit contributors

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lagrangekit/checkpoint.hpp"
#include "lagrangekit/formulations.hpp"
#include "lagrangekit/optim.hpp"
#include "lagrangekit/random.hpp"

namespace lagrangekit::cli {

namespace {

const std::map<std::string, Scheme> kSchemes{
    {"simultaneous", Scheme::Simultaneous},
    {"alt-pd", Scheme::AlternatingPrimalDual},
    {"alt-dp", Scheme::AlternatingDualPrimal},
    {"extragradient", Scheme::Extragradient},
};

const std::map<std::string, Formulation> kFormulations{
    {"lagrangian", Formulation::Lagrangian},
    {"augmented_lagrangian", Formulation::AugmentedLagrangian},
    {"quadratic_penalty", Formulation::QuadraticPenalty},
};

const std::map<std::string, PrimalOptimizerKind> kPrimalKinds{
    {"gd", PrimalOptimizerKind::GD},
    {"momentum", PrimalOptimizerKind::Momentum},
    {"adam", PrimalOptimizerKind::AdamLike},
};

const std::map<std::string, DualOptimizerKind> kDualKinds{
    {"ga", DualOptimizerKind::GradientAscent},
    {"nupi", DualOptimizerKind::NuPI},
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
std::string joined_keys(const std::map<std::string, T>& m) {
  std::string out;
  for (const auto& [k, _] : m) out += (out.empty() ? "" : ", ") + k;
  return out;
}

template <typename T>
T lookup(const std::map<std::string, T>& m, const std::string& key, const std::string& what) {
  auto it = m.find(key);
  if (it == m.end())
    throw UsageError("unknown " + what + " '" + key + "'; valid values: " + joined_keys(m));
  return it->second;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct RunConfig {
  std::string problem;
  ProblemParams params;
  std::string scheme = "simultaneous";
  std::string formulation = "lagrangian";
  std::vector<std::string> group_formulations;
  std::string multiplier = "dense";
  double penalty_init = 1.0;
  bool penalty_schedule = false;
  PenaltyScheduler scheduler;
  std::string primal_optimizer = "gd";
  double lr_primal = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::string dual_optimizer = "ga";
  double lr_dual = 0.01;
  double kappa_p = 0.0;
  double nu = 0.0;
  std::int64_t dual_period = 1;
  bool reuse_constraints = false;
  std::int64_t steps = 0;
  std::string x0;
  std::string trace;
  bool trace_append = false;
  std::string checkpoint_in;
  std::string checkpoint_out;
  std::int64_t checkpoint_every = 0;
};

void add_problem_options(CLI::App& app, std::string& problem, ProblemParams& p) {
  app.add_option("--problem", problem, "Benchmark problem name")->required();
  app.add_option("--a", p.a, "projection_ball: point to project")->delimiter(',');
  app.add_option("--Q", p.Q, "equality_qp: SPD matrix, rows separated by ';'");
  app.add_option("--b", p.b, "equality_qp: linear term");
  app.add_option("--A", p.A, "equality_qp: constraint matrix");
  app.add_option("--c", p.c, "equality_qp: constraint right-hand side");
  app.add_option("--seed", p.seed, "Dataset / sampling seed");
  app.add_option("--threshold", p.threshold, "norm_logreg: squared-norm bound");
  app.add_option("--dim", p.dim, "norm_logreg: feature dimension");
  app.add_option("--samples", p.samples, "norm_logreg: number of samples");
}

void add_run_options(CLI::App& app, RunConfig& c) {
  add_problem_options(app, c.problem, c.params);
  app.add_option("--scheme", c.scheme, "simultaneous | alt-pd | alt-dp | extragradient");
  app.add_option("--formulation", c.formulation,
                 "lagrangian | augmented_lagrangian | quadratic_penalty");
  app.add_option("--group-formulation", c.group_formulations, "Per-group override: <id>=<formulation>")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--multiplier", c.multiplier, "dense | indexed");
  app.add_option("--penalty-init", c.penalty_init, "Initial penalty coefficient");
  app.add_flag("--penalty-schedule", c.penalty_schedule, "Grow penalties when violation stalls");
  app.add_option("--penalty-growth", c.scheduler.growth_factor);
  app.add_option("--penalty-ratio", c.scheduler.required_decrease_ratio);
  app.add_option("--penalty-max", c.scheduler.max_value);
  app.add_option("--primal-optimizer", c.primal_optimizer, "gd | momentum | adam");
  app.add_option("--lr-primal", c.lr_primal);
  app.add_option("--momentum", c.momentum);
  app.add_option("--beta1", c.beta1);
  app.add_option("--beta2", c.beta2);
  app.add_option("--eps", c.eps);
  app.add_option("--dual-optimizer", c.dual_optimizer, "ga | nupi");
  app.add_option("--lr-dual", c.lr_dual);
  app.add_option("--kappa-p", c.kappa_p);
  app.add_option("--nu", c.nu);
  app.add_option("--dual-period", c.dual_period, "Update multipliers every N rolls");
  app.add_flag("--reuse-constraints", c.reuse_constraints, "alt-pd: reuse g(x_t) for the dual step");
  app.add_option("--steps", c.steps, "Number of rolls to execute")->required();
  app.add_option("--x0", c.x0, "Starting point, comma separated");
  app.add_option("--trace", c.trace, "CSV trace output path");
  app.add_flag("--trace-append", c.trace_append, "Append rows to an existing trace");
  app.add_option("--checkpoint-in", c.checkpoint_in, "Resume from this checkpoint");
  app.add_option("--checkpoint-out", c.checkpoint_out, "Checkpoint path");
  app.add_option("--checkpoint-every", c.checkpoint_every, "Save every N steps");
}

// Turns a JSON object into "--key=value" arguments that precede the real
// command line, so flags given explicitly win.
std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("invalid config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  std::vector<std::string> out;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_string()) {
      out.push_back(flag + "=" + value.get<std::string>());
    } else if (value.is_number_integer()) {
      out.push_back(flag + "=" + std::to_string(value.get<std::int64_t>()));
    } else if (value.is_number()) {
      out.push_back(flag + "=" + fmt17(value.get<double>()));
    } else if (value.is_array()) {
      for (const auto& item : value)
        out.push_back(flag + "=" + (item.is_string() ? item.get<std::string>() : item.dump()));
    } else {
      throw UsageError("unsupported config value for '" + key + "'");
    }
  }
  return out;
}

BenchmarkProblem make_problem(const Registry& registry, const std::string& name,
                              const ProblemParams& params) {
  const ProblemEntry* entry = registry.find(name);
  if (!entry) {
    std::string valid;
    for (const auto& n : registry.names()) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError("unknown problem '" + name + "'; valid problems: " + valid);
  }
  try {
    return entry->make(params);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

struct TraceRow {
  double loss, primal_lagrangian, dual_lagrangian, max_ineq, max_eq, multiplier_linf;
  KKTResidual kkt;
};

TraceRow measure(const OracleProblem& problem) {
  const CMPState state = problem.checked_cmp_state(problem.x());
  const AssembledLagrangian a = assemble_lagrangian(problem, state);
  TraceRow row{state.loss, a.primal_lagrangian, a.dual_lagrangian, 0.0, 0.0, 0.0, {}};
  for (const auto& g : problem.groups()) {
    const Vector& v = state.observed_constraints.at(g.id).violation;
    if (g.constraint_type == ConstraintType::Inequality)
      row.max_ineq = std::max(row.max_ineq, positive_part(v).maxCoeff());
    else
      row.max_eq = std::max(row.max_eq, v.cwiseAbs().maxCoeff());
    if (g.multiplier)
      row.multiplier_linf = std::max(row.multiplier_linf, g.multiplier->values().cwiseAbs().maxCoeff());
  }
  row.kkt = kkt_residual(problem);
  return row;
}

std::string format_row(std::int64_t step, const TraceRow& r) {
  std::string out = std::to_string(step);
  for (double v : {r.loss, r.primal_lagrangian, r.dual_lagrangian, r.max_ineq, r.max_eq,
                   r.multiplier_linf, r.kkt.stationarity, r.kkt.complementarity})
    out += "," + fmt17(v);
  return out;
}

int cmd_run(const RunConfig& c, const Registry& registry, std::ostream& out, std::ostream& err) {
  if (c.steps < 1) throw UsageError("--steps must be at least 1");
  if (!(c.lr_primal > 0) || !(c.lr_dual > 0)) throw UsageError("learning rates must be positive");
  if (c.checkpoint_every < 0) throw UsageError("--checkpoint-every must be non-negative");
  if (c.checkpoint_every > 0 && c.checkpoint_out.empty())
    throw UsageError("--checkpoint-every needs --checkpoint-out");

  const Scheme scheme = lookup(kSchemes, c.scheme, "scheme");
  GroupOptions defaults;
  defaults.formulation = lookup(kFormulations, c.formulation, "formulation");
  defaults.penalty = c.penalty_init;
  if (c.multiplier != "dense" && c.multiplier != "indexed")
    throw UsageError("unknown multiplier '" + c.multiplier + "'; valid values: dense, indexed");
  defaults.multiplier_kind =
      c.multiplier == "indexed" ? Multiplier::Kind::Indexed : Multiplier::Kind::Dense;
  std::map<std::string, GroupOptions> per_group;
  for (const auto& spec : c.group_formulations) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--group-formulation expects <id>=<formulation>");
    GroupOptions o = defaults;
    o.formulation = lookup(kFormulations, spec.substr(eq + 1), "formulation");
    per_group[spec.substr(0, eq)] = o;
  }

  PrimalOptimizerOptions po;
  po.kind = lookup(kPrimalKinds, c.primal_optimizer, "primal optimizer");
  po.learning_rate = c.lr_primal;
  po.momentum = c.momentum;
  po.beta1 = c.beta1;
  po.beta2 = c.beta2;
  po.epsilon = c.eps;
  DualOptimizerOptions dopts{lookup(kDualKinds, c.dual_optimizer, "dual optimizer"), c.lr_dual,
                             c.kappa_p, c.nu};
  ConstrainedOptimizerOptions copts{scheme, c.reuse_constraints, c.dual_period};

  BenchmarkProblem bench = make_problem(registry, c.problem, c.params);
  std::optional<OracleProblem> problem;
  std::optional<ConstrainedOptimizer> opt;
  try {
    problem.emplace(std::move(bench), defaults, per_group);
    if (!c.x0.empty()) problem->set_x(parse_vector(c.x0));
    opt.emplace(*problem, PrimalOptimizer(po), dopts, copts);
    if (c.penalty_schedule)
      for (const auto& g : problem->groups())
        if (g.penalty) opt->set_penalty_scheduler(g.id, c.scheduler);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  if (!c.checkpoint_in.empty()) {
    try {
      load_checkpoint(c.checkpoint_in, *opt);
    } catch (const CheckpointError& e) {
      throw UsageError(e.what());
    }
  }

  std::ofstream trace;
  if (!c.trace.empty()) {
    const bool append = c.trace_append && std::filesystem::exists(c.trace) &&
                        std::filesystem::file_size(c.trace) > 0;
    trace.open(c.trace, append ? std::ios::app : std::ios::trunc);
    if (!trace) throw UsageError("cannot open trace file " + c.trace);
    if (!append) trace << kTraceHeader << '\n';
  }

  TraceRow last{};
  try {
    for (std::int64_t k = 0; k < c.steps; ++k) {
      opt->roll();
      const std::int64_t step = opt->step_count();
      last = measure(*problem);
      if (trace.is_open()) trace << format_row(step, last) << '\n';
      if (c.checkpoint_every > 0 && step % c.checkpoint_every == 0)
        save_checkpoint(*opt, c.checkpoint_out);
    }
  } catch (const NumericalError& e) {
    err << "numerical failure at step " << opt->step_count() + 1 << ": " << e.what() << '\n';
    return kExitNumerical;
  }
  if (!c.checkpoint_out.empty()) save_checkpoint(*opt, c.checkpoint_out);
  if (trace.is_open()) {
    trace.flush();
    if (!trace) throw UsageError("failed writing trace file " + c.trace);
  }

  out << "final step=" << opt->step_count() << " loss=" << fmt17(last.loss)
      << " max_violation=" << fmt17(std::max(last.max_ineq, last.max_eq))
      << " kkt_stationarity=" << fmt17(last.kkt.stationarity)
      << " kkt_feasibility=" << fmt17(last.kkt.feasibility)
      << " kkt_complementarity=" << fmt17(last.kkt.complementarity) << '\n';
  return kExitOk;
}

int cmd_check_grad(const std::string& name, const ProblemParams& params, const Registry& registry,
                   std::ostream& out) {
  const BenchmarkProblem bench = make_problem(registry, name, params);
  constexpr double kRelTol = 1e-5;
  constexpr double kAbsTol = 1e-8;
  constexpr int kPoints = 10;

  Rng rng(params.seed);
  std::map<std::string, double> worst;
  std::map<std::string, bool> ok;
  for (const auto& f : bench.oracles()) {
    worst[f.name] = 0.0;
    ok[f.name] = true;
  }
  for (int i = 0; i < kPoints; ++i) {
    const Vector x = bench.initial_point + normal_vector(rng, bench.dimension);
    const GradientCheckReport report = check_gradients(bench.oracles(), x, kRelTol, kAbsTol);
    for (const auto& f : report.functions) {
      worst[f.name] = std::max(worst[f.name], f.max_deviation);
      ok[f.name] = ok[f.name] && f.passed;
    }
  }
  bool all = true;
  for (const auto& f : bench.oracles()) {
    out << f.name << " max_deviation=" << fmt17(worst[f.name]) << ' '
        << (ok[f.name] ? "ok" : "FAIL") << '\n';
    all = all && ok[f.name];
  }
  out << (all ? "gradient check passed" : "gradient check FAILED") << '\n';
  return all ? kExitOk : kExitGradientMismatch;
}

int cmd_list(const Registry& registry, std::ostream& out) {
  out << "problems:\n";
  for (const auto& n : registry.names()) out << "  " << n << " - " << registry.find(n)->description << '\n';
  out << "schemes:\n";
  for (const auto& [n, _] : kSchemes) out << "  " << n << '\n';
  out << "formulations:\n";
  for (const auto& [n, _] : kFormulations) out << "  " << n << '\n';
  out << "primal optimizers:\n";
  for (const auto& [n, _] : kPrimalKinds) out << "  " << n << '\n';
  out << "dual optimizers:\n";
  for (const auto& [n, _] : kDualKinds) out << "  " << n << '\n';
  return kExitOk;
}

}  // namespace

void Registry::add(ProblemEntry entry) {
  if (find(entry.name)) throw InvalidArgument("problem '" + entry.name + "' already registered");
  entries_.push_back(std::move(entry));
}

const ProblemEntry* Registry::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

Registry default_registry() {
  Registry r;
  r.add({"projection_ball", "min ||x - a||^2 s.t. ||x||^2 <= 1 (--a)",
         [](const ProblemParams& p) {
           return problem_projection_ball(Eigen::Map<const Vector>(p.a.data(), static_cast<Eigen::Index>(p.a.size())));
         }});
  r.add({"equality_qp", "min 1/2 x'Qx - b'x s.t. Ax = c (--Q --b --A --c)",
         [](const ProblemParams& p) {
           return problem_equality_qp(parse_matrix(p.Q), parse_vector(p.b), parse_matrix(p.A),
                                      parse_vector(p.c));
         }});
  r.add({"norm_logreg", "logistic regression s.t. ||w||^2 + b^2 <= threshold (--seed --threshold)",
         [](const ProblemParams& p) {
           return problem_norm_constrained_logreg(p.seed, p.threshold, p.dim, p.samples);
         }});
  r.add({"bilinear", "f = 0, h(x) = x; Lagrangian mu * x", [](const ProblemParams&) {
           return problem_bilinear_game();
         }});
  return r;
}

Matrix parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) {
    const Vector v = parse_vector(row);
    rows.emplace_back(v.data(), v.data() + v.size());
  }
  if (rows.empty()) throw InvalidArgument("empty matrix '" + text + "'");
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw InvalidArgument("ragged matrix '" + text + "'");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return M;
}

Vector parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("cannot parse number '" + item + "'");
    }
  }
  if (values.empty()) throw InvalidArgument("empty vector '" + text + "'");
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Registry& registry) {
  CLI::App app{"lagrangekit: Lagrangian primal-dual runner"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;

  RunConfig run_config;
  CLI::App* run_cmd = app.add_subcommand("run", "Execute rolls and write a convergence trace");
  run_cmd->add_option("--config", config_path, "JSON file with default flag values");
  add_run_options(*run_cmd, run_config);

  std::string grad_problem;
  ProblemParams grad_params;
  CLI::App* grad_cmd = app.add_subcommand("check-grad", "Compare analytic gradients with finite differences");
  add_problem_options(*grad_cmd, grad_problem, grad_params);

  CLI::App* list_cmd = app.add_subcommand("list", "List problems, schemes, formulations and optimizers");

  try {
    std::vector<std::string> argv = args;
    // Config values go right after the subcommand so explicit flags override them.
    for (std::size_t i = 0; i < argv.size(); ++i) {
      std::string path;
      if (argv[i] == "--config" && i + 1 < argv.size()) path = argv[i + 1];
      else if (argv[i].rfind("--config=", 0) == 0) path = argv[i].substr(9);
      if (path.empty()) continue;
      const auto extra = config_arguments(path);
      if (!argv.empty()) argv.insert(argv.begin() + 1, extra.begin(), extra.end());
      break;
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {
        out << app.help();
        return kExitOk;
      }
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    }

    if (*list_cmd) return cmd_list(registry, out);
    if (*grad_cmd) return cmd_check_grad(grad_problem, grad_params, registry, out);
    return cmd_run(run_config, registry, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace lagrangekit::cli
