#include "qrnscale/experiment.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace qrnscale;
using Catch::Approx;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_row(const std::string& row) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(row);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  // a trailing empty cell is dropped by getline; restore it
  if (!row.empty() && row.back() == ',') cells.push_back("");
  return cells;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// compact spec used by most harness tests: small bounded space, snappy runs
ExperimentSpec small_optimize_spec() {
  ExperimentSpec spec;
  spec.scenario = Scenario::optimize;
  spec.bounds.n_max = 6;
  spec.bounds.d_max = 3.0;
  spec.bounds.d_coarse_step = 0.1;
  spec.bounds.d_refine_step = 0.01;
  spec.bounds.n_link_distill_max = 1;
  spec.bounds.n_e2e_distill_max = 1;
  return spec;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("spec parsing fills defaults and echoes round-trip stably") {
  const json root = {
      {"scenario", "optimize"},
      {"link", {{"f0", 0.95}, {"r0", 2e4}}},
      {"qos", {{"r_min", 10.0}, {"f_min", 0.6}}},
      {"bounds", {{"n_max", 5}, {"d_coarse_step", 0.1}}},
      {"seed", 9},
  };
  const ExperimentSpec spec = parse_spec(root);
  REQUIRE(spec.scenario == Scenario::optimize);
  REQUIRE(spec.link.f0.value() == 0.95);
  REQUIRE(spec.link.r0 == 2e4);
  REQUIRE(spec.link.l0 == 0.542);  // default retained
  REQUIRE(spec.qos.r_min == 10.0);
  REQUIRE(spec.qos.f_min.value() == 0.6);
  REQUIRE(spec.bounds.n_max.has_value());
  REQUIRE(*spec.bounds.n_max == 5);
  REQUIRE_FALSE(spec.bounds.d_max.has_value());
  REQUIRE(spec.seed == 9);
  REQUIRE(spec.method == SearchMethod::exhaustive);

  const json echo = spec_to_json(spec);
  const json echo2 = spec_to_json(parse_spec(echo));
  REQUIRE(echo == echo2);
}

TEST_CASE("spec parsing rejects unknown keys and bad values") {
  REQUIRE_THROWS_AS(parse_spec(json{{"scneario", "optimize"}}), SpecError);
  REQUIRE_THROWS_AS(parse_spec(json{{"link", {{"f", 0.9}}}}), SpecError);
  REQUIRE_THROWS_AS(parse_spec(json{{"scenario", "optimise"}}), SpecError);
  REQUIRE_THROWS_AS(parse_spec(json{{"method", "annealing"}}), SpecError);
  REQUIRE_THROWS_AS(parse_spec(json{{"format", "xml"}}), SpecError);
  // wrong type
  REQUIRE_THROWS_AS(parse_spec(json{{"link", {{"r0", "fast"}}}}), SpecError);
  // out-of-domain value surfaces as a spec error, not a bare domain_error
  REQUIRE_THROWS_AS(parse_spec(json{{"link", {{"f0", 0.1}}}}), SpecError);
  REQUIRE_THROWS_AS(parse_spec(json{{"ga", {{"population_size", 1}}}}),
                    SpecError);
}

TEST_CASE("config loading distinguishes io errors from parse errors") {
  REQUIRE_THROWS_AS(load_spec("definitely_missing_config.json"), IoError);

  TempFile bad("qrn_test_bad_config.json");
  {
    std::ofstream out(bad.path);
    out << "{ not json";
  }
  REQUIRE_THROWS_AS(load_spec(bad.path), SpecError);

  TempFile good("qrn_test_good_config.json");
  {
    std::ofstream out(good.path);
    out << R"({"scenario": "evaluate", "decision": {"n_links": 2, "d": 0.4}})";
  }
  const ExperimentSpec spec = load_spec(good.path);
  REQUIRE(spec.scenario == Scenario::evaluate);
  REQUIRE(spec.decision.n_links == 2);
  REQUIRE(spec.decision_has_d);
  REQUIRE(spec.decision.d == 0.4);
}

TEST_CASE("evaluate scenario emits one record matching the evaluator") {
  ExperimentSpec spec;
  spec.scenario = Scenario::evaluate;
  spec.decision = ChainDecision{2, 0.0, 0, 0};
  spec.link = LinkConfig(Fidelity(0.99), 1e5, 0.542, 0.5);
  // decision carries no d of its own, so the link separation applies
  spec.decision_has_d = false;

  const ExperimentOutput out = run_experiment(spec);
  REQUIRE(out.records.size() == 1);
  const SweepRecord& rec = out.records[0];
  REQUIRE(rec.scenario == "evaluate");
  REQUIRE(rec.method == "evaluate");
  REQUIRE(rec.d_km == 0.5);
  REQUIRE(rec.n_links == 2);
  REQUIRE(rec.evaluations_used == 1);

  const EvaluationResult direct =
      evaluate(ChainDecision{2, 0.5, 0, 0}, spec.link, spec.noise, spec.qos);
  REQUIRE(rec.feasible == direct.feasible);
  REQUIRE(*rec.e2e_fidelity == direct.e2e_fidelity.value());
  REQUIRE(*rec.e2e_rate == direct.e2e_rate);
  REQUIRE(*rec.objective_km == direct.objective_km);
  REQUIRE(out.summary.record_count == 1);
  REQUIRE(out.summary.total_evaluations == 1);
}

TEST_CASE("evaluate scenario surfaces invalid decisions as spec errors") {
  ExperimentSpec spec;
  spec.scenario = Scenario::evaluate;
  spec.decision.n_links = 0;
  REQUIRE_THROWS_AS(run_experiment(spec), SpecError);
}

TEST_CASE("optimize scenario record matches a direct search") {
  const ExperimentSpec spec = small_optimize_spec();
  const ExperimentOutput out = run_experiment(spec);
  REQUIRE(out.records.size() == 1);
  const SweepRecord& rec = out.records[0];

  const SearchBounds bounds =
      derive_bounds(spec.link, spec.noise, spec.qos, spec.bounds);
  const auto sol =
      exhaustive_search(spec.link, spec.noise, spec.qos, bounds, spec.pins);
  REQUIRE(sol.has_value());
  REQUIRE(rec.feasible);
  REQUIRE(*rec.n_links == sol->decision.n_links);
  REQUIRE(*rec.d_km == sol->decision.d);
  REQUIRE(*rec.n_link_distill == sol->decision.n_link_distill);
  REQUIRE(*rec.n_e2e_distill == sol->decision.n_e2e_distill);
  REQUIRE(*rec.objective_km == sol->objective_km);
  REQUIRE(rec.evaluations_used == sol->evaluations_used);
  REQUIRE(rec.method == "exhaustive");
  REQUIRE(out.summary.best_objective_km.has_value());
  REQUIRE(*out.summary.best_objective_km == sol->objective_km);
  REQUIRE(*out.summary.best_record_index == 0);
}

TEST_CASE("qos sweep covers the grid row-major and matches direct searches") {
  ExperimentSpec spec = small_optimize_spec();
  spec.scenario = Scenario::sweep_qos;
  spec.f_min_grid = {0.5, 0.7};
  spec.r_min_grid = {1.0, 100.0};

  const ExperimentOutput out = run_experiment(spec);
  REQUIRE(out.records.size() == 4);
  REQUIRE(out.summary.record_count == 4);

  for (long long i = 0; i < 4; ++i) {
    const SweepRecord& rec = out.records[i];
    REQUIRE(rec.index == i);
    const double f_min = spec.f_min_grid[i / 2];
    const double r_min = spec.r_min_grid[i % 2];
    REQUIRE(rec.f_min == f_min);
    REQUIRE(rec.r_min == r_min);

    const QosRequirement qos(r_min, Fidelity(f_min));
    const SearchBounds bounds =
        derive_bounds(spec.link, spec.noise, qos, spec.bounds);
    const auto sol =
        exhaustive_search(spec.link, spec.noise, qos, bounds, spec.pins);
    REQUIRE(sol.has_value());
    REQUIRE(rec.feasible);
    REQUIRE(*rec.objective_km == sol->objective_km);
    REQUIRE(*rec.n_links == sol->decision.n_links);
    REQUIRE(*rec.d_km == sol->decision.d);
  }

  SECTION("thread count changes nothing") {
    const ExperimentOutput par = run_experiment(spec, 4);
    REQUIRE(records_to_csv(par.records) == records_to_csv(out.records));
  }
}

TEST_CASE("sweeps keep infeasible grid points as flagged records") {
  ExperimentSpec spec = small_optimize_spec();
  spec.scenario = Scenario::sweep_d_vs_rmin_r0;
  spec.r0_grid = {1e3};
  spec.r_min_grid = {10.0, 1e4};  // the second floor exceeds the source rate

  const ExperimentOutput out = run_experiment(spec);
  REQUIRE(out.records.size() == 2);
  REQUIRE(out.records[0].feasible);
  REQUIRE_FALSE(out.records[1].feasible);
  REQUIRE(out.records[1].infeasibility_reason == "rate_below_min");
  REQUIRE_FALSE(out.records[1].n_links.has_value());
  REQUIRE(out.summary.feasible_count == 1);
}

TEST_CASE("distillation-restricted sweeps pin the corresponding variable") {
  ExperimentSpec spec = small_optimize_spec();
  spec.scenario = Scenario::sweep_no_link_distill;
  spec.f0_grid = {0.99};
  spec.f_min_grid = {0.5};

  const ExperimentOutput out = run_experiment(spec);
  REQUIRE(out.records.size() == 1);
  REQUIRE(out.records[0].feasible);
  REQUIRE(*out.records[0].n_link_distill == 0);
  REQUIRE(*out.records[0].pin_n_link_distill == 0);

  spec.scenario = Scenario::sweep_no_e2e_distill;
  const ExperimentOutput out2 = run_experiment(spec);
  REQUIRE(out2.records.size() == 1);
  REQUIRE(*out2.records[0].n_e2e_distill == 0);
  REQUIRE(*out2.records[0].pin_n_e2e_distill == 0);
}

TEST_CASE("noise sweep varies device parameters per record") {
  ExperimentSpec spec = small_optimize_spec();
  spec.scenario = Scenario::sweep_noise;
  spec.p2_grid = {1.0, 0.98};
  spec.eta_grid = {1.0};

  const ExperimentOutput out = run_experiment(spec);
  REQUIRE(out.records.size() == 2);
  REQUIRE(out.records[0].p2 == 1.0);
  REQUIRE(out.records[1].p2 == 0.98);
  REQUIRE(out.records[0].feasible);
  REQUIRE(out.records[1].feasible);
  // cleaner devices can only do better on the same instance
  REQUIRE(*out.records[0].objective_km >= *out.records[1].objective_km - 1e-9);
}

TEST_CASE("sweep scenarios demand their grids") {
  ExperimentSpec spec = small_optimize_spec();
  spec.scenario = Scenario::sweep_qos;
  REQUIRE_THROWS_AS(run_experiment(spec), SpecError);
  spec.scenario = Scenario::sweep_noise;
  REQUIRE_THROWS_AS(run_experiment(spec), SpecError);
}

TEST_CASE("ga convergence scenario traces the running best per generation") {
  ExperimentSpec spec = small_optimize_spec();
  spec.scenario = Scenario::ga_convergence;
  spec.seed = 5;
  spec.ga.population_size = 32;
  spec.ga.generations_max = 40;
  spec.ga.stall_generations = 15;

  const ExperimentOutput out = run_experiment(spec);
  REQUIRE_FALSE(out.records.empty());
  REQUIRE(out.summary.generations_run.has_value());
  REQUIRE(out.summary.stalled.has_value());
  REQUIRE(out.summary.exhaustive_reference_km.has_value());

  double prev = 0.0;
  int prev_gen = -1;
  for (const SweepRecord& rec : out.records) {
    REQUIRE(rec.method == "genetic");
    REQUIRE(rec.generation.has_value());
    REQUIRE(*rec.generation > prev_gen);
    prev_gen = *rec.generation;
    REQUIRE(rec.feasible);
    REQUIRE(*rec.objective_km >= prev);
    prev = *rec.objective_km;
    REQUIRE(*rec.seed == spec.seed);
  }
  // the GA can never beat the exact reference on the same grid
  REQUIRE(prev <= *out.summary.exhaustive_reference_km + 1e-9);

  // every row echoes the whole run's evaluation count; the summary must not
  // multiply that by the number of rows
  REQUIRE(out.records.size() > 1);
  REQUIRE(out.summary.total_evaluations >= out.records[0].evaluations_used);
  REQUIRE(out.summary.total_evaluations <
          2 * out.records[0].evaluations_used +
              static_cast<long long>(out.records.size()));
}

TEST_CASE("csv output has the documented shape") {
  ExperimentSpec spec;
  spec.scenario = Scenario::evaluate;
  const ExperimentOutput out = run_experiment(spec);
  const std::string csv = records_to_csv(out.records);

  std::istringstream lines(csv);
  std::string header, row, extra;
  REQUIRE(std::getline(lines, header));
  REQUIRE(std::getline(lines, row));
  REQUIRE_FALSE(std::getline(lines, extra));

  const auto& cols = csv_columns();
  const auto header_cells = split_csv_row(header);
  REQUIRE(header_cells.size() == cols.size());
  for (size_t i = 0; i < cols.size(); ++i) REQUIRE(header_cells[i] == cols[i]);
  REQUIRE(split_csv_row(row).size() == cols.size());
}

TEST_CASE("csv and json outputs carry identical values") {
  ExperimentSpec spec = small_optimize_spec();
  const ExperimentOutput out = run_experiment(spec);
  const SweepRecord& rec = out.records[0];

  // parse the single data row
  std::istringstream lines(records_to_csv(out.records));
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  const auto data = split_csv_row(row);
  const json j = record_to_json(rec);

  REQUIRE(data[0] == j["scenario"].get<std::string>());
  REQUIRE(std::stoll(data[1]) == j["index"].get<long long>());
  REQUIRE(data[2].empty());  // generation applies only to ga_convergence
  REQUIRE(j["generation"].is_null());
  REQUIRE(std::stod(data[3]) == j["f0"].get<double>());
  REQUIRE(std::stod(data[4]) == j["r0"].get<double>());
  REQUIRE(data[15] == (j["feasible"].get<bool>() ? "true" : "false"));
  REQUIRE(std::stoll(data[16]) == j["n_links"].get<long long>());
  // shortest-round-trip doubles must parse back bit-exactly
  REQUIRE(std::stod(data[17]) == j["d_km"].get<double>());
  REQUIRE(std::stod(data[20]) == j["objective_km"].get<double>());
  REQUIRE(std::stod(data[21]) == j["e2e_fidelity"].get<double>());
  REQUIRE(data[25] == j["infeasibility_reason"].get<std::string>());
}

TEST_CASE("written outputs are byte-identical across reruns and thread counts") {
  ExperimentSpec spec = small_optimize_spec();
  spec.scenario = Scenario::sweep_qos;
  spec.f_min_grid = {0.5, 0.6};
  spec.r_min_grid = {1.0, 10.0};

  TempFile a("qrn_test_out_a.csv");
  TempFile b("qrn_test_out_b.csv");
  TempFile c("qrn_test_out_c.json");
  TempFile d("qrn_test_out_d.json");

  const ExperimentOutput run1 = run_experiment(spec, 1);
  const ExperimentOutput run2 = run_experiment(spec, 3);
  write_outputs(run1.records, run1.summary, spec, OutputFormat::csv, a.path);
  write_outputs(run2.records, run2.summary, spec, OutputFormat::csv, b.path);
  REQUIRE(read_file(a.path) == read_file(b.path));

  write_outputs(run1.records, run1.summary, spec, OutputFormat::json, c.path);
  write_outputs(run2.records, run2.summary, spec, OutputFormat::json, d.path);
  REQUIRE(read_file(c.path) == read_file(d.path));
}

TEST_CASE("json output embeds schema version, spec echo, records and summary") {
  ExperimentSpec spec = small_optimize_spec();
  TempFile f("qrn_test_out_full.json");
  const ExperimentOutput out = run_experiment(spec);
  write_outputs(out.records, out.summary, spec, OutputFormat::json, f.path);

  const json root = json::parse(read_file(f.path));
  REQUIRE(root.at("schema_version").get<int>() == kSchemaVersion);
  REQUIRE(root.at("spec_echo").is_object());
  REQUIRE(root.at("spec_echo").at("scenario") == "optimize");
  REQUIRE(root.at("records").is_array());
  REQUIRE(root.at("records").size() == 1);
  REQUIRE(root.at("summary").at("record_count").get<long long>() == 1);
  REQUIRE(root.at("summary").at("feasible_count").get<long long>() == 1);
}

TEST_CASE("unwritable output paths raise io errors") {
  ExperimentSpec spec;
  spec.scenario = Scenario::evaluate;
  const ExperimentOutput out = run_experiment(spec);
  REQUIRE_THROWS_AS(write_outputs(out.records, out.summary, spec,
                                  OutputFormat::csv,
                                  "no_such_dir_qrn/out.csv"),
                    IoError);
}
