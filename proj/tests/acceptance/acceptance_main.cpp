// Acceptance gate: one numbered end-to-end criterion per invocation, exit 0
// on pass. Each criterion prints a single [PASS]/[FAIL] line with the
// measured numbers so a red run documents the actual discrepancy.

#include "qrnscale/experiment.hpp"
#include "qrnscale/oracle.hpp"
#include "qrnscale/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace qrnscale;

LinkConfig default_link() { return LinkConfig(Fidelity(0.99), 1e5, 0.542); }
NoiseParams default_noise() { return NoiseParams(0.99, 0.99); }
QosRequirement default_qos() { return QosRequirement(1.0, Fidelity(0.5)); }

bool report(int criterion, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion
            << ": " << detail << "\n";
  return pass;
}

// 1: the default instance's exhaustive optimum lands within 3% of the
// 115.521 km reference span.
bool criterion_reference_span() {
  const SearchBounds bounds =
      derive_bounds(default_link(), default_noise(), default_qos());
  const auto sol = exhaustive_search(default_link(), default_noise(),
                                     default_qos(), bounds, {}, 4);
  if (!sol) return report(1, false, "no feasible solution found");
  const double expected = 115.521;
  const double tol = 0.03 * expected;
  const double got = sol->objective_km;
  std::ostringstream msg;
  msg << "default-instance optimum " << got << " km (N=" << sol->decision.n_links
      << ", d=" << sol->decision.d << ", nL=" << sol->decision.n_link_distill
      << ", nE=" << sol->decision.n_e2e_distill << ") vs reference " << expected
      << " km +/- 3% [" << expected - tol << ", " << expected + tol << "]";
  return report(1, std::abs(got - expected) <= tol, msg.str());
}

// 2: the genetic search reproduces the exhaustive optimum within 0.1% on
// five fixed seeds, terminating inside its generation budget.
bool criterion_ga_matches_exhaustive() {
  const SearchBounds bounds =
      derive_bounds(default_link(), default_noise(), default_qos());
  const auto exact = exhaustive_search(default_link(), default_noise(),
                                       default_qos(), bounds, {}, 4);
  if (!exact) return report(2, false, "exhaustive search found nothing");
  bool pass = true;
  std::ostringstream msg;
  msg << "exhaustive " << exact->objective_km << " km; ga:";
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GaConfig ga;
    ga.seed = seed;
    const GaSearchResult run =
        ga_search(default_link(), default_noise(), default_qos(), bounds, ga);
    if (!run.best) {
      pass = false;
      msg << " seed" << seed << "=none";
      continue;
    }
    const double rel =
        std::abs(run.best->objective_km - exact->objective_km) /
        exact->objective_km;
    if (rel > 0.001 || run.generations_run > ga.generations_max) pass = false;
    msg << " seed" << seed << "=" << run.best->objective_km << " ("
        << run.generations_run << " gens" << (run.stalled ? ", stalled" : "")
        << ")";
  }
  return report(2, pass, msg.str());
}

// 3: perfect devices at least double the achievable span of the noisy
// default instance.
bool criterion_perfect_devices() {
  const SearchBounds noisy_bounds =
      derive_bounds(default_link(), default_noise(), default_qos());
  const auto noisy = exhaustive_search(default_link(), default_noise(),
                                       default_qos(), noisy_bounds, {}, 4);
  const NoiseParams perfect;
  const SearchBounds perfect_bounds =
      derive_bounds(default_link(), perfect, default_qos());
  const auto ideal = exhaustive_search(default_link(), perfect, default_qos(),
                                       perfect_bounds, {}, 4);
  if (!noisy || !ideal) return report(3, false, "search found nothing");
  std::ostringstream msg;
  msg << "perfect-device optimum " << ideal->objective_km << " km (N="
      << ideal->decision.n_links << ", d=" << ideal->decision.d
      << ", nL=" << ideal->decision.n_link_distill
      << ") vs noisy " << noisy->objective_km << " km";
  return report(3, ideal->objective_km >= 2.0 * noisy->objective_km, msg.str());
}

// 4: over a 5 x 4 QoS grid the optimum span is monotone non-increasing in
// both floors, within one refinement step per link of slack.
bool criterion_qos_monotonicity() {
  ExperimentSpec spec;
  spec.scenario = Scenario::sweep_qos;
  spec.f_min_grid = {0.5, 0.6, 0.7, 0.8, 0.9};
  spec.r_min_grid = {1.0, 10.0, 100.0, 1000.0};
  const ExperimentOutput out = run_experiment(spec, 4);

  const size_t rows = spec.f_min_grid.size();
  const size_t cols = spec.r_min_grid.size();
  bool pass = out.records.size() == rows * cols;
  std::ostringstream msg;
  auto obj = [&](size_t r, size_t c) -> double {
    const SweepRecord& rec = out.records[r * cols + c];
    return rec.objective_km ? *rec.objective_km : 0.0;
  };
  auto slack = [&](size_t r, size_t c) {
    const SweepRecord& rec = out.records[r * cols + c];
    return 0.001 * (rec.n_links ? *rec.n_links : 1) + 1e-9;
  };
  for (size_t r = 0; r < rows && pass; ++r) {
    for (size_t c = 0; c + 1 < cols && pass; ++c) {
      if (obj(r, c + 1) > obj(r, c) + slack(r, c + 1)) {
        pass = false;
        msg << "rate-floor violation at f_min=" << spec.f_min_grid[r]
            << ": " << obj(r, c + 1) << " > " << obj(r, c);
      }
    }
  }
  for (size_t c = 0; c < cols && pass; ++c) {
    for (size_t r = 0; r + 1 < rows && pass; ++r) {
      if (obj(r + 1, c) > obj(r, c) + slack(r + 1, c)) {
        pass = false;
        msg << "fidelity-floor violation at r_min=" << spec.r_min_grid[c]
            << ": " << obj(r + 1, c) << " > " << obj(r, c);
      }
    }
  }
  if (pass) {
    msg << "20-point sweep monotone in both floors; spans "
        << obj(rows - 1, cols - 1) << " to " << obj(0, 0) << " km";
  }
  return report(4, pass, msg.str());
}

// 5: without link-level distillation, dropping the raw link fidelity from
// 0.99 to 0.95 cuts the optimal repeater chain to less than half its length.
bool criterion_link_quality_sensitivity() {
  ExperimentSpec spec;
  spec.scenario = Scenario::sweep_no_link_distill;
  spec.f0_grid = {0.95, 0.99};
  spec.f_min_grid = {0.5};
  const ExperimentOutput out = run_experiment(spec, 2);
  if (out.records.size() != 2 || !out.records[0].n_links ||
      !out.records[1].n_links) {
    return report(5, false, "sweep did not produce two feasible records");
  }
  const int n_low = *out.records[0].n_links;
  const int n_high = *out.records[1].n_links;
  std::ostringstream msg;
  msg << "optimal links " << n_low << " at f0=0.95 vs " << n_high
      << " at f0=0.99 (threshold " << 0.5 * n_high << ")";
  return report(5, n_low < 0.5 * n_high, msg.str());
}

// 6: spot checks of the analytic building blocks against closed-form values.
bool criterion_analytic_properties() {
  bool pass = true;
  std::ostringstream msg;
  auto check = [&](bool ok, const char* what) {
    if (!ok) {
      pass = false;
      msg << (msg.str().empty() ? "" : "; ") << what;
    }
  };

  std::mt19937 rng(60001);
  std::uniform_real_distribution<double> fdist(0.25, 1.0);
  std::uniform_real_distribution<double> ndist(0.5, 1.0);
  bool identity = true;
  for (int i = 0; i < 1000; ++i) {
    const Fidelity f(fdist(rng));
    const NoiseParams noise(ndist(rng), ndist(rng));
    if (swap_chain_fidelity(f, 1, noise).value() != f.value()) identity = false;
    if (distill_n_rounds(0, f, noise).final_fidelity().value() != f.value()) {
      identity = false;
    }
  }
  check(identity, "one-link swap or zero-round schedule altered its input");

  check(std::abs(distill_fidelity(Fidelity(0.7), NoiseParams()).value() -
                 25.0 / 34.0) <= 1e-12,
        "noiseless purification of 0.7 is not 25/34");
  check(std::abs(distill_fidelity(Fidelity(0.5), NoiseParams()).value() - 0.5) <=
            1e-12,
        "0.5 is not a purification fixed point");
  check(std::abs(distill_success_prob(Fidelity(0.7), NoiseParams()) - 0.68) <=
            1e-12,
        "noiseless success probability at 0.7 is not 0.68");

  std::uniform_real_distribution<double> ddist(0.0, 5.0);
  std::uniform_real_distribution<double> r0dist(1e3, 1e6);
  std::uniform_real_distribution<double> l0dist(0.3, 2.0);
  bool attenuation = true;
  for (int i = 0; i < 200; ++i) {
    const double r0 = r0dist(rng);
    const double l0 = l0dist(rng);
    const double d = ddist(rng);
    const LinkConfig link(Fidelity(0.9), r0, l0, d);
    const double expected = r0 * std::exp(-d / l0);
    if (std::abs(link_rate(link, 0, NoiseParams()) - expected) >
        1e-9 * expected) {
      attenuation = false;
    }
  }
  check(attenuation, "undistilled link rate deviates from r0*exp(-d/l0)");

  if (pass) msg << "identity, purification and attenuation checks all hold";
  return report(6, pass, msg.str());
}

// 7: the randomized pruned-vs-naive equivalence and Monte-Carlo rate checks
// all pass on the documented default budget.
bool criterion_oracle_checks() {
  const OracleCheckReport rep = run_oracle_checks(20, 4000, 20240814ULL);
  std::ostringstream msg;
  msg << rep.equivalence_instances << " equivalence instances ("
      << rep.equivalence_failures << " failed), " << rep.mc_cases
      << " sampled-rate cases (" << rep.mc_failures << " failed)";
  if (!rep.ok()) {
    for (const std::string& line : rep.lines) {
      if (line.find("MISMATCH") != std::string::npos ||
          line.find("FAIL") != std::string::npos) {
        std::cout << "  " << line << "\n";
      }
    }
  }
  return report(7, rep.ok(), msg.str());
}

// 8: rerunning the default optimization, with different worker counts,
// produces byte-identical output files in both formats.
bool criterion_deterministic_outputs() {
  ExperimentSpec spec;  // default optimize scenario
  auto read_all = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  const ExperimentOutput serial = run_experiment(spec, 1);
  const ExperimentOutput parallel = run_experiment(spec, 4);

  const std::string csv1 = "acceptance_det_1.csv";
  const std::string csv2 = "acceptance_det_2.csv";
  const std::string json1 = "acceptance_det_1.json";
  const std::string json2 = "acceptance_det_2.json";
  write_outputs(serial.records, serial.summary, spec, OutputFormat::csv, csv1);
  write_outputs(parallel.records, parallel.summary, spec, OutputFormat::csv,
                csv2);
  write_outputs(serial.records, serial.summary, spec, OutputFormat::json,
                json1);
  write_outputs(parallel.records, parallel.summary, spec, OutputFormat::json,
                json2);

  const bool csv_same = read_all(csv1) == read_all(csv2);
  const bool json_same = read_all(json1) == read_all(json2);
  for (const std::string& p : {csv1, csv2, json1, json2}) {
    std::remove(p.c_str());
  }
  std::ostringstream msg;
  msg << "1-thread vs 4-thread outputs " << (csv_same ? "match" : "DIFFER")
      << " (csv) and " << (json_same ? "match" : "DIFFER") << " (json)";
  return report(8, csv_same && json_same, msg.str());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: " << argv[0] << " <criterion 1-8>\n";
    return 2;
  }
  const int criterion = std::atoi(argv[1]);
  bool pass = false;
  switch (criterion) {
    case 1: pass = criterion_reference_span(); break;
    case 2: pass = criterion_ga_matches_exhaustive(); break;
    case 3: pass = criterion_perfect_devices(); break;
    case 4: pass = criterion_qos_monotonicity(); break;
    case 5: pass = criterion_link_quality_sensitivity(); break;
    case 6: pass = criterion_analytic_properties(); break;
    case 7: pass = criterion_oracle_checks(); break;
    case 8: pass = criterion_deterministic_outputs(); break;
    default:
      std::cerr << "unknown criterion " << criterion << ", expected 1-8\n";
      return 2;
  }
  return pass ? 0 : 1;
}
