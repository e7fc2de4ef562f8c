#pragma once

// Config-file driven experiment harness. A spec names a scenario (single
// evaluation, one optimization run, or a parameter sweep), the harness runs
// it deterministically and serializes flat records to CSV or JSON.

#include "qrnscale/oracle.hpp"
#include "qrnscale/optimizer.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qrnscale {

// Invalid or inconsistent experiment spec (CLI exit code 1).
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem trouble reading a config or writing results (CLI exit code 3).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

enum class Scenario {
  evaluate,
  optimize,
  sweep_qos,
  sweep_d_vs_rmin_r0,
  sweep_no_link_distill,
  sweep_no_e2e_distill,
  sweep_noise,
  ga_convergence,
};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::evaluate: return "evaluate";
    case Scenario::optimize: return "optimize";
    case Scenario::sweep_qos: return "sweep_qos";
    case Scenario::sweep_d_vs_rmin_r0: return "sweep_d_vs_rmin_r0";
    case Scenario::sweep_no_link_distill: return "sweep_no_link_distill";
    case Scenario::sweep_no_e2e_distill: return "sweep_no_e2e_distill";
    case Scenario::sweep_noise: return "sweep_noise";
    case Scenario::ga_convergence: return "ga_convergence";
  }
  return "unknown";
}

inline Scenario scenario_from_string(const std::string& s) {
  for (Scenario sc : {Scenario::evaluate, Scenario::optimize, Scenario::sweep_qos,
                      Scenario::sweep_d_vs_rmin_r0, Scenario::sweep_no_link_distill,
                      Scenario::sweep_no_e2e_distill, Scenario::sweep_noise,
                      Scenario::ga_convergence}) {
    if (s == to_string(sc)) return sc;
  }
  throw SpecError("unknown scenario '" + s + "'");
}

enum class OutputFormat { csv, json };

inline const char* to_string(OutputFormat f) {
  return f == OutputFormat::csv ? "csv" : "json";
}

inline OutputFormat format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw SpecError("unknown output format '" + s + "', expected csv or json");
}

// One experiment, fully specified. Defaults describe the reference setup:
// F0 = 0.99, R0 = 1e5, L0 = 0.542 km, P2 = eta = 0.99, R_min = 1, F_min = 0.5.
struct ExperimentSpec {
  Scenario scenario = Scenario::optimize;
  LinkConfig link{Fidelity(0.99), 1e5, 0.542, 0.0};
  NoiseParams noise{0.99, 0.99};
  QosRequirement qos{1.0, Fidelity(0.5)};
  BoundsOverrides bounds;
  GaConfig ga;
  Pins pins;
  SearchMethod method = SearchMethod::exhaustive;
  ChainDecision decision;        // evaluate scenario only
  bool decision_has_d = false;   // false: decision.d falls back to link.d
  std::vector<double> f_min_grid, r_min_grid, r0_grid, f0_grid, p2_grid, eta_grid;
  std::uint64_t seed = 1;
  std::string out_path;          // empty: CLI picks a default
  OutputFormat format = OutputFormat::csv;
};

// One output row. Optionals stay empty when the field does not apply (e.g.
// decision fields of a search that found nothing feasible; generation outside
// ga_convergence). Inputs are echoed per row so files stand alone.
struct SweepRecord {
  std::string scenario;
  long long index = 0;
  std::optional<int> generation;
  double f0 = 0, r0 = 0, l0 = 0, p2 = 0, eta = 0, r_min = 0, f_min = 0;
  std::optional<int> pin_n_links;
  std::optional<double> pin_d_km;
  std::optional<int> pin_n_link_distill;
  std::optional<int> pin_n_e2e_distill;
  std::string method;
  bool feasible = false;
  std::optional<int> n_links;
  std::optional<double> d_km;
  std::optional<int> n_link_distill;
  std::optional<int> n_e2e_distill;
  std::optional<double> objective_km;
  std::optional<double> e2e_fidelity;
  std::optional<double> e2e_rate;
  std::optional<double> link_fidelity;
  std::optional<double> link_rate;
  std::string infeasibility_reason;
  long long evaluations_used = 0;
  std::optional<std::uint64_t> seed;
};

struct ExperimentSummary {
  std::string scenario;
  long long record_count = 0;
  long long feasible_count = 0;
  std::optional<double> best_objective_km;
  std::optional<long long> best_record_index;
  long long total_evaluations = 0;
  // ga_convergence extras
  std::optional<double> exhaustive_reference_km;
  std::optional<int> generations_run;
  std::optional<bool> stalled;
};

struct ExperimentOutput {
  std::vector<SweepRecord> records;
  ExperimentSummary summary;
};

// ---------------------------------------------------------------------------
// Spec parsing (strict: unknown keys are rejected so typos cannot silently
// fall back to defaults).

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                std::initializer_list<const char*> allowed,
                                const char* where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw SpecError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

template <typename T>
void assign_if(const nlohmann::json& obj, const char* key,
               std::optional<T>& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

inline std::vector<double> grid_values(const nlohmann::json& grids,
                                       const char* key) {
  if (!grids.contains(key)) return {};
  return grids.at(key).get<std::vector<double>>();
}

}  // namespace detail

inline ExperimentSpec parse_spec(const nlohmann::json& root) {
  try {
    detail::reject_unknown_keys(
        root,
        {"scenario", "link", "noise", "qos", "bounds", "ga", "pins", "method",
         "decision", "grids", "seed", "out", "format"},
        "spec");
    ExperimentSpec spec;
    if (root.contains("scenario")) {
      spec.scenario = scenario_from_string(root.at("scenario").get<std::string>());
    }
    if (root.contains("link")) {
      const auto& j = root.at("link");
      detail::reject_unknown_keys(j, {"f0", "r0", "l0", "d"}, "link");
      spec.link = LinkConfig(
          Fidelity(detail::get_or(j, "f0", spec.link.f0.value())),
          detail::get_or(j, "r0", spec.link.r0),
          detail::get_or(j, "l0", spec.link.l0),
          detail::get_or(j, "d", spec.link.d));
    }
    if (root.contains("noise")) {
      const auto& j = root.at("noise");
      detail::reject_unknown_keys(j, {"p2", "eta"}, "noise");
      spec.noise = NoiseParams(detail::get_or(j, "p2", spec.noise.p2),
                               detail::get_or(j, "eta", spec.noise.eta));
    }
    if (root.contains("qos")) {
      const auto& j = root.at("qos");
      detail::reject_unknown_keys(j, {"r_min", "f_min"}, "qos");
      spec.qos = QosRequirement(
          detail::get_or(j, "r_min", spec.qos.r_min),
          Fidelity(detail::get_or(j, "f_min", spec.qos.f_min.value())));
    }
    if (root.contains("bounds")) {
      const auto& j = root.at("bounds");
      detail::reject_unknown_keys(
          j,
          {"n_max", "d_min", "d_max", "d_coarse_step", "d_refine_step",
           "n_link_distill_max", "n_e2e_distill_max", "n_max_hard_cap"},
          "bounds");
      detail::assign_if(j, "n_max", spec.bounds.n_max);
      detail::assign_if(j, "d_min", spec.bounds.d_min);
      detail::assign_if(j, "d_max", spec.bounds.d_max);
      detail::assign_if(j, "d_coarse_step", spec.bounds.d_coarse_step);
      detail::assign_if(j, "d_refine_step", spec.bounds.d_refine_step);
      detail::assign_if(j, "n_link_distill_max", spec.bounds.n_link_distill_max);
      detail::assign_if(j, "n_e2e_distill_max", spec.bounds.n_e2e_distill_max);
      spec.bounds.n_max_hard_cap =
          detail::get_or(j, "n_max_hard_cap", spec.bounds.n_max_hard_cap);
    }
    if (root.contains("ga")) {
      const auto& j = root.at("ga");
      detail::reject_unknown_keys(
          j,
          {"population_size", "generations_max", "crossover_rate",
           "mutation_rate", "tournament_size", "seed", "stall_generations",
           "d_sigma_km"},
          "ga");
      spec.ga.population_size =
          detail::get_or(j, "population_size", spec.ga.population_size);
      spec.ga.generations_max =
          detail::get_or(j, "generations_max", spec.ga.generations_max);
      spec.ga.crossover_rate =
          detail::get_or(j, "crossover_rate", spec.ga.crossover_rate);
      spec.ga.mutation_rate =
          detail::get_or(j, "mutation_rate", spec.ga.mutation_rate);
      spec.ga.tournament_size =
          detail::get_or(j, "tournament_size", spec.ga.tournament_size);
      spec.ga.seed = detail::get_or(j, "seed", spec.ga.seed);
      spec.ga.stall_generations =
          detail::get_or(j, "stall_generations", spec.ga.stall_generations);
      spec.ga.d_sigma_km = detail::get_or(j, "d_sigma_km", spec.ga.d_sigma_km);
      validate(spec.ga);
    }
    if (root.contains("pins")) {
      const auto& j = root.at("pins");
      detail::reject_unknown_keys(
          j, {"n_links", "d", "n_link_distill", "n_e2e_distill"}, "pins");
      detail::assign_if(j, "n_links", spec.pins.n_links);
      detail::assign_if(j, "d", spec.pins.d);
      detail::assign_if(j, "n_link_distill", spec.pins.n_link_distill);
      detail::assign_if(j, "n_e2e_distill", spec.pins.n_e2e_distill);
    }
    if (root.contains("method")) {
      const std::string m = root.at("method").get<std::string>();
      if (m == "exhaustive") {
        spec.method = SearchMethod::exhaustive;
      } else if (m == "genetic") {
        spec.method = SearchMethod::genetic;
      } else {
        throw SpecError("unknown method '" + m + "'");
      }
    }
    if (root.contains("decision")) {
      const auto& j = root.at("decision");
      detail::reject_unknown_keys(
          j, {"n_links", "d", "n_link_distill", "n_e2e_distill"}, "decision");
      spec.decision.n_links = detail::get_or(j, "n_links", 1);
      spec.decision.n_link_distill = detail::get_or(j, "n_link_distill", 0);
      spec.decision.n_e2e_distill = detail::get_or(j, "n_e2e_distill", 0);
      if (j.contains("d")) {
        spec.decision.d = j.at("d").get<double>();
        spec.decision_has_d = true;
      }
    }
    if (root.contains("grids")) {
      const auto& j = root.at("grids");
      detail::reject_unknown_keys(
          j, {"f_min", "r_min", "r0", "f0", "p2", "eta"}, "grids");
      spec.f_min_grid = detail::grid_values(j, "f_min");
      spec.r_min_grid = detail::grid_values(j, "r_min");
      spec.r0_grid = detail::grid_values(j, "r0");
      spec.f0_grid = detail::grid_values(j, "f0");
      spec.p2_grid = detail::grid_values(j, "p2");
      spec.eta_grid = detail::grid_values(j, "eta");
    }
    spec.seed = detail::get_or<std::uint64_t>(root, "seed", spec.seed);
    spec.out_path = detail::get_or<std::string>(root, "out", spec.out_path);
    if (root.contains("format")) {
      spec.format = format_from_string(root.at("format").get<std::string>());
    }
    return spec;
  } catch (const SpecError&) {
    throw;
  } catch (const nlohmann::json::exception& err) {
    throw SpecError(std::string("malformed spec: ") + err.what());
  } catch (const std::exception& err) {
    throw SpecError(std::string("invalid spec value: ") + err.what());
  }
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& err) {
    throw SpecError("config '" + path + "' is not valid JSON: " + err.what());
  }
  return parse_spec(root);
}

// Canonical re-serialization of a spec; every field explicit so outputs are
// self-describing regardless of which keys the config file spelled out.
inline nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["scenario"] = to_string(spec.scenario);
  j["link"] = {{"f0", spec.link.f0.value()},
               {"r0", spec.link.r0},
               {"l0", spec.link.l0},
               {"d", spec.link.d}};
  j["noise"] = {{"p2", spec.noise.p2}, {"eta", spec.noise.eta}};
  j["qos"] = {{"r_min", spec.qos.r_min}, {"f_min", spec.qos.f_min.value()}};
  nlohmann::json bounds = nlohmann::json::object();
  if (spec.bounds.n_max) bounds["n_max"] = *spec.bounds.n_max;
  if (spec.bounds.d_min) bounds["d_min"] = *spec.bounds.d_min;
  if (spec.bounds.d_max) bounds["d_max"] = *spec.bounds.d_max;
  if (spec.bounds.d_coarse_step) bounds["d_coarse_step"] = *spec.bounds.d_coarse_step;
  if (spec.bounds.d_refine_step) bounds["d_refine_step"] = *spec.bounds.d_refine_step;
  if (spec.bounds.n_link_distill_max) {
    bounds["n_link_distill_max"] = *spec.bounds.n_link_distill_max;
  }
  if (spec.bounds.n_e2e_distill_max) {
    bounds["n_e2e_distill_max"] = *spec.bounds.n_e2e_distill_max;
  }
  bounds["n_max_hard_cap"] = spec.bounds.n_max_hard_cap;
  j["bounds"] = bounds;
  j["ga"] = {{"population_size", spec.ga.population_size},
             {"generations_max", spec.ga.generations_max},
             {"crossover_rate", spec.ga.crossover_rate},
             {"mutation_rate", spec.ga.mutation_rate},
             {"tournament_size", spec.ga.tournament_size},
             {"seed", spec.ga.seed},
             {"stall_generations", spec.ga.stall_generations},
             {"d_sigma_km", spec.ga.d_sigma_km}};
  nlohmann::json pins = nlohmann::json::object();
  if (spec.pins.n_links) pins["n_links"] = *spec.pins.n_links;
  if (spec.pins.d) pins["d"] = *spec.pins.d;
  if (spec.pins.n_link_distill) pins["n_link_distill"] = *spec.pins.n_link_distill;
  if (spec.pins.n_e2e_distill) pins["n_e2e_distill"] = *spec.pins.n_e2e_distill;
  j["pins"] = pins;
  j["method"] = to_string(spec.method);
  j["decision"] = {{"n_links", spec.decision.n_links},
                   {"d", spec.decision_has_d ? spec.decision.d : spec.link.d},
                   {"n_link_distill", spec.decision.n_link_distill},
                   {"n_e2e_distill", spec.decision.n_e2e_distill}};
  nlohmann::json grids = nlohmann::json::object();
  if (!spec.f_min_grid.empty()) grids["f_min"] = spec.f_min_grid;
  if (!spec.r_min_grid.empty()) grids["r_min"] = spec.r_min_grid;
  if (!spec.r0_grid.empty()) grids["r0"] = spec.r0_grid;
  if (!spec.f0_grid.empty()) grids["f0"] = spec.f0_grid;
  if (!spec.p2_grid.empty()) grids["p2"] = spec.p2_grid;
  if (!spec.eta_grid.empty()) grids["eta"] = spec.eta_grid;
  j["grids"] = grids;
  j["seed"] = spec.seed;
  j["out"] = spec.out_path;
  j["format"] = to_string(spec.format);
  return j;
}

// ---------------------------------------------------------------------------
// Scenario execution.

namespace detail {

// Deterministic chunked parallel map over [0, count).
inline void parallel_for(long long count, int threads,
                         const std::function<void(long long)>& fn) {
  const int workers =
      static_cast<int>(std::max<long long>(1, std::min<long long>(threads, count)));
  if (workers == 1) {
    for (long long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const long long per = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long long begin = w * per;
    const long long end = std::min(count, begin + per);
    pool.emplace_back([&fn, begin, end] {
      for (long long i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline SweepRecord base_record(const ExperimentSpec& spec, long long index,
                               const LinkConfig& link, const NoiseParams& noise,
                               const QosRequirement& qos, const Pins& pins) {
  SweepRecord rec;
  rec.scenario = to_string(spec.scenario);
  rec.index = index;
  rec.f0 = link.f0.value();
  rec.r0 = link.r0;
  rec.l0 = link.l0;
  rec.p2 = noise.p2;
  rec.eta = noise.eta;
  rec.r_min = qos.r_min;
  rec.f_min = qos.f_min.value();
  rec.pin_n_links = pins.n_links;
  rec.pin_d_km = pins.d;
  rec.pin_n_link_distill = pins.n_link_distill;
  rec.pin_n_e2e_distill = pins.n_e2e_distill;
  return rec;
}

inline void fill_solution(SweepRecord& rec, const Solution& sol) {
  rec.feasible = true;
  rec.n_links = sol.decision.n_links;
  rec.d_km = sol.decision.d;
  rec.n_link_distill = sol.decision.n_link_distill;
  rec.n_e2e_distill = sol.decision.n_e2e_distill;
  rec.objective_km = sol.objective_km;
  rec.e2e_fidelity = sol.result.e2e_fidelity.value();
  rec.e2e_rate = sol.result.e2e_rate;
  rec.link_fidelity = sol.result.link_fidelity_after_distill.value();
  rec.link_rate = sol.result.link_rate_after_distill;
  rec.infeasibility_reason = to_string(InfeasibilityReason::none);
  rec.evaluations_used = sol.evaluations_used;
  rec.seed = sol.seed;
}

// One optimization run inside a sweep. Grid points whose rate floor exceeds
// the source rate are emitted as infeasible records rather than aborting the
// sweep, so feasibility boundaries stay visible in the output.
inline SweepRecord optimize_point(const ExperimentSpec& spec, long long index,
                                  const LinkConfig& link, const NoiseParams& noise,
                                  const QosRequirement& qos, const Pins& pins,
                                  int threads) {
  SweepRecord rec = base_record(spec, index, link, noise, qos, pins);
  rec.method = to_string(spec.method);
  if (link.r0 < qos.r_min) {
    rec.feasible = false;
    rec.infeasibility_reason = to_string(InfeasibilityReason::rate_below_min);
    return rec;
  }
  const SearchBounds bounds = derive_bounds(link, noise, qos, spec.bounds);
  std::optional<Solution> sol;
  if (spec.method == SearchMethod::genetic) {
    GaSearchResult ga = ga_search(link, noise, qos, bounds, spec.ga, pins);
    sol = std::move(ga.best);
    rec.seed = spec.ga.seed;
    rec.evaluations_used = ga.evaluations_used;
  } else {
    sol = exhaustive_search(link, noise, qos, bounds, pins, threads);
  }
  if (sol) {
    fill_solution(rec, *sol);
  } else {
    rec.feasible = false;
  }
  return rec;
}

}  // namespace detail

// Executes the spec's scenario. Grid points run concurrently when threads > 1;
// records always come back in deterministic grid order.
inline ExperimentOutput run_experiment(const ExperimentSpec& spec,
                                       int threads = 1) {
  ExperimentOutput out;
  out.summary.scenario = to_string(spec.scenario);
  // ga_convergence rows each echo the whole run's evaluation count, so the
  // summary total is set explicitly there instead of summed over rows
  std::optional<long long> total_evaluations_override;

  auto require_grid = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) {
      throw SpecError(std::string("scenario requires a non-empty grid '") +
                      name + "'");
    }
  };

  // Outer/inner grid layout per sweep scenario; records are row-major.
  switch (spec.scenario) {
    case Scenario::evaluate: {
      ChainDecision dec = spec.decision;
      if (!spec.decision_has_d) dec.d = spec.link.d;
      SweepRecord rec = detail::base_record(spec, 0, spec.link, spec.noise,
                                            spec.qos, spec.pins);
      rec.method = "evaluate";
      EvaluationResult res;
      try {
        res = evaluate(dec, spec.link, spec.noise, spec.qos);
      } catch (const std::invalid_argument& err) {
        throw SpecError(std::string("invalid decision: ") + err.what());
      }
      rec.feasible = res.feasible;
      rec.n_links = dec.n_links;
      rec.d_km = dec.d;
      rec.n_link_distill = dec.n_link_distill;
      rec.n_e2e_distill = dec.n_e2e_distill;
      rec.objective_km = res.objective_km;
      rec.e2e_fidelity = res.e2e_fidelity.value();
      rec.e2e_rate = res.e2e_rate;
      rec.link_fidelity = res.link_fidelity_after_distill.value();
      rec.link_rate = res.link_rate_after_distill;
      rec.infeasibility_reason = to_string(res.infeasibility_reason);
      rec.evaluations_used = 1;
      out.records.push_back(std::move(rec));
      break;
    }

    case Scenario::optimize: {
      out.records.push_back(detail::optimize_point(
          spec, 0, spec.link, spec.noise, spec.qos, spec.pins, threads));
      break;
    }

    case Scenario::sweep_qos: {
      require_grid(spec.f_min_grid, "f_min");
      require_grid(spec.r_min_grid, "r_min");
      const long long count =
          static_cast<long long>(spec.f_min_grid.size()) *
          static_cast<long long>(spec.r_min_grid.size());
      out.records.resize(count);
      detail::parallel_for(count, threads, [&](long long i) {
        const double f_min =
            spec.f_min_grid[i / spec.r_min_grid.size()];
        const double r_min = spec.r_min_grid[i % spec.r_min_grid.size()];
        const QosRequirement qos(r_min, Fidelity(f_min));
        out.records[i] = detail::optimize_point(spec, i, spec.link, spec.noise,
                                                qos, spec.pins, 1);
      });
      break;
    }

    case Scenario::sweep_d_vs_rmin_r0: {
      require_grid(spec.r0_grid, "r0");
      require_grid(spec.r_min_grid, "r_min");
      const long long count =
          static_cast<long long>(spec.r0_grid.size()) *
          static_cast<long long>(spec.r_min_grid.size());
      out.records.resize(count);
      detail::parallel_for(count, threads, [&](long long i) {
        const double r0 = spec.r0_grid[i / spec.r_min_grid.size()];
        const double r_min = spec.r_min_grid[i % spec.r_min_grid.size()];
        const LinkConfig link(spec.link.f0, r0, spec.link.l0, spec.link.d);
        const QosRequirement qos(r_min, spec.qos.f_min);
        out.records[i] = detail::optimize_point(spec, i, link, spec.noise, qos,
                                                spec.pins, 1);
      });
      break;
    }

    case Scenario::sweep_no_link_distill:
    case Scenario::sweep_no_e2e_distill: {
      require_grid(spec.f0_grid, "f0");
      require_grid(spec.f_min_grid, "f_min");
      Pins pins = spec.pins;
      if (spec.scenario == Scenario::sweep_no_link_distill) {
        pins.n_link_distill = 0;
      } else {
        pins.n_e2e_distill = 0;
      }
      const long long count =
          static_cast<long long>(spec.f0_grid.size()) *
          static_cast<long long>(spec.f_min_grid.size());
      out.records.resize(count);
      detail::parallel_for(count, threads, [&](long long i) {
        const double f0 = spec.f0_grid[i / spec.f_min_grid.size()];
        const double f_min = spec.f_min_grid[i % spec.f_min_grid.size()];
        const LinkConfig link(Fidelity(f0), spec.link.r0, spec.link.l0,
                              spec.link.d);
        const QosRequirement qos(spec.qos.r_min, Fidelity(f_min));
        out.records[i] =
            detail::optimize_point(spec, i, link, spec.noise, qos, pins, 1);
      });
      break;
    }

    case Scenario::sweep_noise: {
      require_grid(spec.p2_grid, "p2");
      require_grid(spec.eta_grid, "eta");
      const long long count =
          static_cast<long long>(spec.p2_grid.size()) *
          static_cast<long long>(spec.eta_grid.size());
      out.records.resize(count);
      detail::parallel_for(count, threads, [&](long long i) {
        const double p2 = spec.p2_grid[i / spec.eta_grid.size()];
        const double eta = spec.eta_grid[i % spec.eta_grid.size()];
        const NoiseParams noise(p2, eta);
        out.records[i] = detail::optimize_point(spec, i, spec.link, noise,
                                                spec.qos, spec.pins, 1);
      });
      break;
    }

    case Scenario::ga_convergence: {
      const SearchBounds bounds =
          derive_bounds(spec.link, spec.noise, spec.qos, spec.bounds);
      GaConfig ga = spec.ga;
      ga.seed = spec.seed;  // the experiment seed drives the GA run
      const GaSearchResult run =
          ga_search(spec.link, spec.noise, spec.qos, bounds, ga, spec.pins);
      const std::optional<Solution> reference = exhaustive_search(
          spec.link, spec.noise, spec.qos, bounds, spec.pins, threads);
      out.records.reserve(run.history.size());
      for (size_t i = 0; i < run.history.size(); ++i) {
        const GaGenerationStat& stat = run.history[i];
        SweepRecord rec = detail::base_record(
            spec, static_cast<long long>(i), spec.link, spec.noise, spec.qos,
            spec.pins);
        rec.method = to_string(SearchMethod::genetic);
        rec.generation = stat.generation;
        rec.seed = ga.seed;
        const EvaluationResult res =
            evaluate(stat.best_decision, spec.link, spec.noise, spec.qos);
        rec.feasible = res.feasible;
        rec.n_links = stat.best_decision.n_links;
        rec.d_km = stat.best_decision.d;
        rec.n_link_distill = stat.best_decision.n_link_distill;
        rec.n_e2e_distill = stat.best_decision.n_e2e_distill;
        rec.objective_km = stat.best_objective_km;
        rec.e2e_fidelity = res.e2e_fidelity.value();
        rec.e2e_rate = res.e2e_rate;
        rec.link_fidelity = res.link_fidelity_after_distill.value();
        rec.link_rate = res.link_rate_after_distill;
        rec.infeasibility_reason = to_string(res.infeasibility_reason);
        rec.evaluations_used = run.evaluations_used;
        out.records.push_back(std::move(rec));
      }
      out.summary.generations_run = run.generations_run;
      out.summary.stalled = run.stalled;
      if (reference) out.summary.exhaustive_reference_km = reference->objective_km;
      total_evaluations_override =
          run.evaluations_used +
          (reference ? reference->evaluations_used : 0);
      break;
    }
  }

  out.summary.record_count = static_cast<long long>(out.records.size());
  for (const SweepRecord& rec : out.records) {
    if (!total_evaluations_override) {
      out.summary.total_evaluations += rec.evaluations_used;
    }
    if (!rec.feasible) continue;
    ++out.summary.feasible_count;
    if (rec.objective_km &&
        (!out.summary.best_objective_km ||
         *rec.objective_km > *out.summary.best_objective_km)) {
      out.summary.best_objective_km = rec.objective_km;
      out.summary.best_record_index = rec.index;
    }
  }
  if (total_evaluations_override) {
    out.summary.total_evaluations = *total_evaluations_override;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace detail {

// Shortest decimal form that round-trips back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string opt_to_csv(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_same_v<T, double>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

template <typename T>
nlohmann::json opt_to_json(const std::optional<T>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace detail

// Fixed CSV column order; documented in the README and kept stable.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "scenario",        "index",
      "generation",      "f0",
      "r0",              "l0",
      "p2",              "eta",
      "r_min",           "f_min",
      "pin_n_links",     "pin_d_km",
      "pin_n_link_distill", "pin_n_e2e_distill",
      "method",          "feasible",
      "n_links",         "d_km",
      "n_link_distill",  "n_e2e_distill",
      "objective_km",    "e2e_fidelity",
      "e2e_rate",        "link_fidelity",
      "link_rate",       "infeasibility_reason",
      "evaluations_used", "seed"};
  return cols;
}

inline std::string record_to_csv_row(const SweepRecord& r) {
  std::ostringstream row;
  row << r.scenario << ',' << r.index << ','
      << detail::opt_to_csv(r.generation) << ','
      << detail::format_double(r.f0) << ',' << detail::format_double(r.r0)
      << ',' << detail::format_double(r.l0) << ','
      << detail::format_double(r.p2) << ',' << detail::format_double(r.eta)
      << ',' << detail::format_double(r.r_min) << ','
      << detail::format_double(r.f_min) << ','
      << detail::opt_to_csv(r.pin_n_links) << ','
      << detail::opt_to_csv(r.pin_d_km) << ','
      << detail::opt_to_csv(r.pin_n_link_distill) << ','
      << detail::opt_to_csv(r.pin_n_e2e_distill) << ',' << r.method << ','
      << (r.feasible ? "true" : "false") << ','
      << detail::opt_to_csv(r.n_links) << ',' << detail::opt_to_csv(r.d_km)
      << ',' << detail::opt_to_csv(r.n_link_distill) << ','
      << detail::opt_to_csv(r.n_e2e_distill) << ','
      << detail::opt_to_csv(r.objective_km) << ','
      << detail::opt_to_csv(r.e2e_fidelity) << ','
      << detail::opt_to_csv(r.e2e_rate) << ','
      << detail::opt_to_csv(r.link_fidelity) << ','
      << detail::opt_to_csv(r.link_rate) << ',' << r.infeasibility_reason
      << ',' << r.evaluations_used << ',' << detail::opt_to_csv(r.seed);
  return row.str();
}

inline std::string records_to_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream outp;
  const auto& cols = csv_columns();
  for (size_t i = 0; i < cols.size(); ++i) {
    if (i) outp << ',';
    outp << cols[i];
  }
  outp << '\n';
  for (const SweepRecord& r : records) {
    outp << record_to_csv_row(r) << '\n';
  }
  return outp.str();
}

inline nlohmann::json record_to_json(const SweepRecord& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["index"] = r.index;
  j["generation"] = detail::opt_to_json(r.generation);
  j["f0"] = r.f0;
  j["r0"] = r.r0;
  j["l0"] = r.l0;
  j["p2"] = r.p2;
  j["eta"] = r.eta;
  j["r_min"] = r.r_min;
  j["f_min"] = r.f_min;
  j["pin_n_links"] = detail::opt_to_json(r.pin_n_links);
  j["pin_d_km"] = detail::opt_to_json(r.pin_d_km);
  j["pin_n_link_distill"] = detail::opt_to_json(r.pin_n_link_distill);
  j["pin_n_e2e_distill"] = detail::opt_to_json(r.pin_n_e2e_distill);
  j["method"] = r.method;
  j["feasible"] = r.feasible;
  j["n_links"] = detail::opt_to_json(r.n_links);
  j["d_km"] = detail::opt_to_json(r.d_km);
  j["n_link_distill"] = detail::opt_to_json(r.n_link_distill);
  j["n_e2e_distill"] = detail::opt_to_json(r.n_e2e_distill);
  j["objective_km"] = detail::opt_to_json(r.objective_km);
  j["e2e_fidelity"] = detail::opt_to_json(r.e2e_fidelity);
  j["e2e_rate"] = detail::opt_to_json(r.e2e_rate);
  j["link_fidelity"] = detail::opt_to_json(r.link_fidelity);
  j["link_rate"] = detail::opt_to_json(r.link_rate);
  j["infeasibility_reason"] = r.infeasibility_reason;
  j["evaluations_used"] = r.evaluations_used;
  j["seed"] = detail::opt_to_json(r.seed);
  return j;
}

inline nlohmann::json summary_to_json(const ExperimentSummary& s) {
  nlohmann::json j;
  j["scenario"] = s.scenario;
  j["record_count"] = s.record_count;
  j["feasible_count"] = s.feasible_count;
  j["best_objective_km"] = detail::opt_to_json(s.best_objective_km);
  j["best_record_index"] = detail::opt_to_json(s.best_record_index);
  j["total_evaluations"] = s.total_evaluations;
  if (s.exhaustive_reference_km) {
    j["exhaustive_reference_km"] = *s.exhaustive_reference_km;
  }
  if (s.generations_run) j["generations_run"] = *s.generations_run;
  if (s.stalled) j["stalled"] = *s.stalled;
  return j;
}

inline constexpr int kSchemaVersion = 1;

// Writes records + summary to path in the chosen format. CSV carries the
// records (header + one row per record); JSON additionally embeds the spec
// echo and summary. No timestamps anywhere: identical runs produce identical
// bytes.
inline void write_outputs(const std::vector<SweepRecord>& records,
                          const ExperimentSummary& summary,
                          const ExperimentSpec& spec, OutputFormat format,
                          const std::string& path) {
  std::string payload;
  if (format == OutputFormat::csv) {
    payload = records_to_csv(records);
  } else {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["spec_echo"] = spec_to_json(spec);
    nlohmann::json recs = nlohmann::json::array();
    for (const SweepRecord& r : records) recs.push_back(record_to_json(r));
    j["records"] = recs;
    j["summary"] = summary_to_json(summary);
    payload = j.dump(2);
    payload.push_back('\n');
  }
  std::ofstream outp(path, std::ios::binary);
  if (!outp) throw IoError("cannot open output file '" + path + "' for writing");
  outp << payload;
  if (!outp) throw IoError("failed writing output file '" + path + "'");
}

}  // namespace qrnscale
