// Command-line front end: single-point evaluation, optimization runs, sweep
// scenarios from config files, and the built-in oracle self-checks.
//
// Exit codes: 0 success, 1 invalid spec or failed check, 2 no feasible
// solution, 3 I/O failure.

#include "qrnscale/experiment.hpp"
#include "qrnscale/oracle.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace qrnscale;

struct GlobalArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  int threads = 1;
};

void add_global_options(CLI::App* cmd, GlobalArgs& args) {
  cmd->add_option("--config", args.config, "experiment config file (JSON)");
  cmd->add_option("--seed", args.seed, "override the experiment seed");
  cmd->add_option("--out", args.out, "output file path");
  cmd->add_option("--format", args.format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--threads", args.threads, "worker threads for grid scans")
      ->check(CLI::PositiveNumber);
}

// Optional single-value model overrides shared by evaluate and optimize.
struct ModelArgs {
  std::optional<double> f0, r0, l0, p2, eta, r_min, f_min;
};

void add_model_options(CLI::App* cmd, ModelArgs& args) {
  cmd->add_option("--f0", args.f0, "initial link fidelity");
  cmd->add_option("--r0", args.r0, "source rate at zero distance");
  cmd->add_option("--l0", args.l0, "fiber attenuation length (km)");
  cmd->add_option("--p2", args.p2, "two-qubit gate fidelity");
  cmd->add_option("--eta", args.eta, "measurement fidelity");
  cmd->add_option("--r-min", args.r_min, "end-to-end rate floor");
  cmd->add_option("--f-min", args.f_min, "end-to-end fidelity floor");
}

ExperimentSpec spec_from_args(const GlobalArgs& global, const ModelArgs& model) {
  ExperimentSpec spec;
  if (!global.config.empty()) spec = load_spec(global.config);
  if (model.f0 || model.r0 || model.l0) {
    spec.link = LinkConfig(Fidelity(model.f0.value_or(spec.link.f0.value())),
                           model.r0.value_or(spec.link.r0),
                           model.l0.value_or(spec.link.l0), spec.link.d);
  }
  if (model.p2 || model.eta) {
    spec.noise = NoiseParams(model.p2.value_or(spec.noise.p2),
                             model.eta.value_or(spec.noise.eta));
  }
  if (model.r_min || model.f_min) {
    spec.qos = QosRequirement(
        model.r_min.value_or(spec.qos.r_min),
        Fidelity(model.f_min.value_or(spec.qos.f_min.value())));
  }
  if (global.seed) {
    spec.seed = *global.seed;
    spec.ga.seed = *global.seed;
  }
  if (!global.out.empty()) spec.out_path = global.out;
  if (!global.format.empty()) spec.format = format_from_string(global.format);
  return spec;
}

int execute(const ExperimentSpec& spec, int threads) {
  const ExperimentOutput output = run_experiment(spec, threads);
  std::string path = spec.out_path;
  if (path.empty()) {
    path = std::string("qrnscale_") + to_string(spec.scenario) + "." +
           to_string(spec.format);
  }
  write_outputs(output.records, output.summary, spec, spec.format, path);

  const ExperimentSummary& s = output.summary;
  std::cout << "scenario: " << s.scenario << "\n"
            << "records: " << s.record_count << " (feasible "
            << s.feasible_count << ")\n";
  if (s.best_objective_km) {
    std::cout << "best objective: " << *s.best_objective_km
              << " km (record " << *s.best_record_index << ")\n";
  }
  if (s.exhaustive_reference_km) {
    std::cout << "exhaustive reference: " << *s.exhaustive_reference_km
              << " km\n";
  }
  if (s.generations_run) {
    std::cout << "generations: " << *s.generations_run
              << (s.stalled && *s.stalled ? " (stalled)" : "") << "\n";
  }
  std::cout << "evaluations: " << s.total_evaluations << "\n"
            << "wrote: " << path << "\n";
  return s.feasible_count == 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeater chain scalability planner"};
  app.require_subcommand(1);

  GlobalArgs global;
  ModelArgs model;

  auto* cmd_evaluate =
      app.add_subcommand("evaluate", "evaluate one chain decision");
  add_global_options(cmd_evaluate, global);
  add_model_options(cmd_evaluate, model);
  std::optional<int> arg_n_links, arg_n_link_distill, arg_n_e2e_distill;
  std::optional<double> arg_d;
  cmd_evaluate->add_option("--n-links", arg_n_links, "number of links");
  cmd_evaluate->add_option("--d", arg_d, "node separation (km)");
  cmd_evaluate->add_option("--n-link-distill", arg_n_link_distill,
                           "link-level distillation rounds");
  cmd_evaluate->add_option("--n-e2e-distill", arg_n_e2e_distill,
                           "end-to-end distillation rounds");

  auto* cmd_optimize =
      app.add_subcommand("optimize", "search for the best chain layout");
  add_global_options(cmd_optimize, global);
  add_model_options(cmd_optimize, model);
  std::string arg_method;
  cmd_optimize->add_option("--method", arg_method, "exhaustive or genetic")
      ->check(CLI::IsMember({"exhaustive", "genetic"}));

  auto* cmd_sweep =
      app.add_subcommand("sweep", "run the sweep scenario from a config file");
  add_global_options(cmd_sweep, global);

  auto* cmd_oracle =
      app.add_subcommand("oracle-check", "run the built-in verification suite");
  int arg_instances = 20;
  long long arg_trials = 4000;
  std::uint64_t arg_check_seed = 20240814ULL;
  bool arg_verbose = false;
  cmd_oracle->add_option("--instances", arg_instances,
                         "randomized equivalence instances");
  cmd_oracle->add_option("--trials", arg_trials, "Monte-Carlo trials per case");
  cmd_oracle->add_option("--seed", arg_check_seed, "master seed");
  cmd_oracle->add_flag("--verbose", arg_verbose, "print every check line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_oracle->parsed()) {
      const OracleCheckReport report =
          run_oracle_checks(arg_instances, arg_trials, arg_check_seed);
      if (arg_verbose) {
        for (const std::string& line : report.lines) {
          std::cout << line << "\n";
        }
      }
      std::cout << "equivalence: " << report.equivalence_instances
                << " instances, " << report.equivalence_failures
                << " failures\n"
                << "monte-carlo: " << report.mc_cases << " cases, "
                << report.mc_failures << " failures\n"
                << (report.ok() ? "all checks passed" : "CHECKS FAILED")
                << "\n";
      return report.ok() ? 0 : 1;
    }

    ExperimentSpec spec = spec_from_args(global, model);
    if (cmd_evaluate->parsed()) {
      spec.scenario = Scenario::evaluate;
      if (arg_n_links) spec.decision.n_links = *arg_n_links;
      if (arg_n_link_distill) spec.decision.n_link_distill = *arg_n_link_distill;
      if (arg_n_e2e_distill) spec.decision.n_e2e_distill = *arg_n_e2e_distill;
      if (arg_d) {
        spec.decision.d = *arg_d;
        spec.decision_has_d = true;
      }
    } else if (cmd_optimize->parsed()) {
      spec.scenario = Scenario::optimize;
      if (!arg_method.empty()) {
        spec.method = arg_method == "genetic" ? SearchMethod::genetic
                                              : SearchMethod::exhaustive;
      }
    } else if (cmd_sweep->parsed()) {
      if (global.config.empty()) {
        throw SpecError("sweep requires --config");
      }
      switch (spec.scenario) {
        case Scenario::evaluate:
        case Scenario::optimize:
          throw SpecError(
              "sweep requires a sweep_* or ga_convergence scenario in the "
              "config; use the evaluate/optimize subcommands for single runs");
        default:
          break;
      }
    }
    return execute(spec, global.threads);
  } catch (const SpecError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
