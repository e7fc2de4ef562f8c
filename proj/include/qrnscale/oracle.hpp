#pragma once

// Independent checks for the planners: a brute-force grid optimizer with no
// pruning or refinement, and a Monte-Carlo simulator for the rate bookkeeping.
// Both deliberately avoid the optimizer's shortcut code paths; the only
// shared pieces are evaluate() itself and the tie-break rule, which are part
// of the contract being checked.

#include "qrnscale/optimizer.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrnscale {

// Brute-force scan of the full coarse grid, innermost loop over d, keeping
// the best candidate under the shared tie-break. Guarded to small spaces.
inline std::optional<Solution> naive_grid_optimum(const LinkConfig& link,
                                                  const NoiseParams& noise,
                                                  const QosRequirement& qos,
                                                  const SearchBounds& bounds,
                                                  const Pins& pins = {}) {
  validate(bounds);
  const detail::VarRanges vr = detail::ranges_for(bounds, pins);
  const detail::DistanceGrid grid =
      detail::grid_for(bounds, pins, bounds.d_coarse_step);

  const long long total = (vr.nl_hi - vr.nl_lo + 1LL) *
                          (vr.ne_hi - vr.ne_lo + 1LL) *
                          (vr.n_hi - vr.n_lo + 1LL) * grid.size();
  if (total > 10'000'000LL) {
    throw std::invalid_argument("naive_grid_optimum: grid has " +
                                std::to_string(total) +
                                " points, limit is 10^7");
  }

  long long evaluations = 0;
  std::optional<ChainDecision> best_dec;
  std::optional<EvaluationResult> best_res;
  for (int nl = vr.nl_lo; nl <= vr.nl_hi; ++nl) {
    for (int ne = vr.ne_lo; ne <= vr.ne_hi; ++ne) {
      for (int n = vr.n_lo; n <= vr.n_hi; ++n) {
        for (long long k = 0; k < grid.size(); ++k) {
          const ChainDecision dec{n, grid.at(k), nl, ne};
          ++evaluations;
          EvaluationResult res = evaluate(dec, link, noise, qos);
          if (!res.feasible) continue;
          if (!best_dec || better_candidate(dec, res, *best_dec, *best_res)) {
            best_dec = dec;
            best_res = std::move(res);
          }
        }
      }
    }
  }
  if (!best_dec) return std::nullopt;

  Solution sol;
  sol.decision = *best_dec;
  sol.result = std::move(*best_res);
  sol.objective_km = sol.result.objective_km;
  sol.method = SearchMethod::exhaustive;
  sol.evaluations_used = evaluations;
  return sol;
}

// Sampled throughput estimate for one decision.
struct McRateEstimate {
  double mean_rate = 0.0;
  double std_error = 0.0;
  long long trials = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Standard 64-bit mixer; gives every trial an independent, reproducible
// sub-seed regardless of execution order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Binomial draw with exact handling of the degenerate probabilities so that
// p = 1 never touches the distribution internals.
inline long long binomial_draw(std::mt19937_64& rng, long long n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<long long> dist(n, p);
  return dist(rng);
}

}  // namespace detail

// Simulates batches of raw pairs through fiber survival, per-round
// distillation with the trace's success probabilities, and deterministic
// swapping (one state consumed per link, throughput limited by the scarcest
// link). Fidelities are deterministic in this model, so only the rate is
// sampled. batch_size 0 picks 2^(n_L + n_E + 4) raw pairs per link.
inline McRateEstimate mc_rate(const ChainDecision& decision,
                              const LinkConfig& link, const NoiseParams& noise,
                              long long trials, std::uint64_t seed,
                              long long batch_size = 0) {
  validate(decision);
  if (trials < 1000) {
    throw std::invalid_argument("mc_rate: need at least 1000 trials");
  }

  // Deterministic fidelity traces fix each round's success probability.
  const DistillationTrace link_trace =
      distill_n_rounds(decision.n_link_distill, link.f0, noise);
  const double swapped = detail::swap_chain_fidelity_raw(
      link_trace.final_fidelity().value(), decision.n_links, noise);
  const DistillationTrace e2e_trace =
      distill_n_rounds(decision.n_e2e_distill, Fidelity(swapped), noise);

  const double p_fiber = std::exp(-decision.d / link.l0);
  const long long m =
      batch_size > 0
          ? batch_size
          : 1LL << (decision.n_link_distill + decision.n_e2e_distill + 4);

  double sum = 0.0;
  double sum_sq = 0.0;
  for (long long t = 0; t < trials; ++t) {
    std::mt19937_64 rng(detail::splitmix64(seed + static_cast<std::uint64_t>(t)));
    // Per link: fiber survival, then the link-level distillation cascade.
    long long scarcest = m;
    for (int l = 0; l < decision.n_links; ++l) {
      long long count = detail::binomial_draw(rng, m, p_fiber);
      for (double p : link_trace.success_probs) {
        count = detail::binomial_draw(rng, count / 2, p);
      }
      scarcest = std::min(scarcest, count);
    }
    // Swaps are deterministic and consume one state per link.
    long long count = scarcest;
    for (double p : e2e_trace.success_probs) {
      count = detail::binomial_draw(rng, count / 2, p);
    }
    // m raw attempts per link take m / r0 time units.
    const double rate = link.r0 * static_cast<double>(count) /
                        static_cast<double>(m);
    sum += rate;
    sum_sq += rate * rate;
  }

  McRateEstimate est;
  est.trials = trials;
  est.seed = seed;
  est.mean_rate = sum / static_cast<double>(trials);
  const double var = std::max(
      0.0, (sum_sq - sum * sum / static_cast<double>(trials)) /
               static_cast<double>(trials - 1));
  est.std_error = std::sqrt(var / static_cast<double>(trials));
  return est;
}

// ---------------------------------------------------------------------------
// Self-check harness shared by the CLI oracle-check command and the
// acceptance suite: randomized pruned-vs-naive equivalence instances plus
// Monte-Carlo agreement cases for the rate formulas.

struct OracleCheckReport {
  int equivalence_instances = 0;
  int equivalence_failures = 0;
  int mc_cases = 0;
  int mc_failures = 0;
  std::vector<std::string> lines;

  bool ok() const {
    return equivalence_failures == 0 && mc_failures == 0;
  }
};

namespace detail {

inline bool same_solution(const std::optional<Solution>& a,
                          const std::optional<Solution>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->objective_km == b->objective_km &&
         a->decision.n_links == b->decision.n_links &&
         a->decision.d == b->decision.d &&
         a->decision.n_link_distill == b->decision.n_link_distill &&
         a->decision.n_e2e_distill == b->decision.n_e2e_distill;
}

inline std::string describe(const std::optional<Solution>& s) {
  if (!s) return "no feasible solution";
  return "objective " + std::to_string(s->objective_km) + " at N=" +
         std::to_string(s->decision.n_links) + " d=" +
         std::to_string(s->decision.d) + " nL=" +
         std::to_string(s->decision.n_link_distill) + " nE=" +
         std::to_string(s->decision.n_e2e_distill);
}

}  // namespace detail

// Randomized instances compare the pruned search against the brute-force
// scan on identical coarse-only grids (refine step = coarse step), expecting
// bit-exact objective and decision. Deterministic for a fixed seed.
inline void check_search_equivalence(OracleCheckReport& report, int instances,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(detail::splitmix64(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < instances; ++i) {
    const LinkConfig link(Fidelity(0.85 + 0.145 * unit(rng)),
                          std::pow(10.0, 4.0 + 2.0 * unit(rng)),
                          0.3 + 0.7 * unit(rng));
    const NoiseParams noise(0.9 + 0.1 * unit(rng), 0.9 + 0.1 * unit(rng));
    const QosRequirement qos(std::pow(10.0, 3.0 * unit(rng)),
                             Fidelity(0.5 + 0.4 * unit(rng)));
    const double step = 0.1 + 0.4 * unit(rng);
    const int n_cap = 3 + static_cast<int>(unit(rng) * 38.0);
    const int distill_cap = static_cast<int>(unit(rng) * 5.0);

    BoundsOverrides overrides;
    overrides.d_coarse_step = step;
    overrides.d_refine_step = step;  // coarse-only: identical grids
    SearchBounds bounds = derive_bounds(link, noise, qos, overrides);
    bounds.n_max = std::min(bounds.n_max, n_cap);
    bounds.n_link_distill_max = std::min(bounds.n_link_distill_max, distill_cap);
    bounds.n_e2e_distill_max = std::min(bounds.n_e2e_distill_max, distill_cap);

    const auto fast = exhaustive_search(link, noise, qos, bounds);
    const auto slow = naive_grid_optimum(link, noise, qos, bounds);
    ++report.equivalence_instances;
    if (detail::same_solution(fast, slow)) {
      report.lines.push_back("equivalence instance " + std::to_string(i) +
                             ": ok (" + detail::describe(fast) + ")");
    } else {
      ++report.equivalence_failures;
      report.lines.push_back("equivalence instance " + std::to_string(i) +
                             ": MISMATCH pruned={" + detail::describe(fast) +
                             "} naive={" + detail::describe(slow) + "}");
    }
  }
}

// Fixed decision set for the Monte-Carlo agreement checks. Restricted to
// configurations where the batch estimator is unbiased or its pairing bias is
// far below the 3-sigma band: single-link chains for every distillation mix,
// and multi-link chains only at d=0 with no link distillation (deterministic
// survival, so the min over links adds no bias).
inline void check_mc_agreement(OracleCheckReport& report, long long trials,
                               std::uint64_t seed) {
  const NoiseParams noise(0.99, 0.99);
  const LinkConfig link(Fidelity(0.9), 1e5, 0.542);
  const QosRequirement loose(1e-12, Fidelity(Fidelity::kMin));

  struct Case {
    ChainDecision decision;
    long long batch;  // 0 = default
  };
  std::vector<Case> cases;
  int combo = 0;
  for (int nl = 0; nl <= 2; ++nl) {
    for (int ne = 0; ne <= 2; ++ne) {
      // vary d across combos; larger batches keep pairing bias negligible
      const double d = (combo % 3) * 0.3;
      cases.push_back({{1, d, nl, ne}, (nl + ne > 0) ? (1LL << 16) : 0});
      ++combo;
    }
  }
  cases.push_back({{3, 0.0, 0, 0}, 0});
  cases.push_back({{3, 0.0, 0, 1}, 1LL << 16});

  for (size_t i = 0; i < cases.size(); ++i) {
    const Case& c = cases[i];
    const double analytic =
        evaluate(c.decision, link, noise, loose).e2e_rate;
    const McRateEstimate est =
        mc_rate(c.decision, link, noise, trials,
                detail::splitmix64(seed + 1000 + i), c.batch);
    ++report.mc_cases;
    const double diff = std::abs(est.mean_rate - analytic);
    // deterministic cases must match exactly, sampled ones within 3 sigma
    const bool pass =
        est.std_error == 0.0 ? diff == 0.0 : diff <= 3.0 * est.std_error;
    std::string line =
        "mc case " + std::to_string(i) + " (N=" +
        std::to_string(c.decision.n_links) + " d=" +
        std::to_string(c.decision.d) + " nL=" +
        std::to_string(c.decision.n_link_distill) + " nE=" +
        std::to_string(c.decision.n_e2e_distill) + "): mean " +
        std::to_string(est.mean_rate) + " vs analytic " +
        std::to_string(analytic) + ", 3se " +
        std::to_string(3.0 * est.std_error);
    if (pass) {
      report.lines.push_back(line + " ok");
    } else {
      ++report.mc_failures;
      report.lines.push_back(line + " FAIL");
    }
  }
}

inline OracleCheckReport run_oracle_checks(int instances = 20,
                                           long long trials = 4000,
                                           std::uint64_t seed = 20240814ULL) {
  OracleCheckReport report;
  check_search_equivalence(report, instances, seed);
  check_mc_agreement(report, trials, seed);
  return report;
}

}  // namespace qrnscale
