#pragma once

// Planners for the chain-layout problem: maximize total span n_links * d
// subject to the end-to-end QoS floors. Two interchangeable methods: a
// pruned-but-exact grid search with local refinement on d, and a seeded
// genetic algorithm whose d gene snaps to the same refinement grid so both
// methods explore identical spaces.

#include "qrnscale/chain_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace qrnscale {

struct SearchBounds {
  int n_max = 1;
  double d_min = 0.0;
  double d_max = 0.0;
  double d_coarse_step = 0.05;
  double d_refine_step = 0.001;
  int n_link_distill_max = 0;
  int n_e2e_distill_max = 0;
};

inline void validate(const SearchBounds& b) {
  if (b.n_max < 1) throw std::invalid_argument("bounds: n_max must be >= 1");
  if (!(b.d_min >= 0.0)) throw std::invalid_argument("bounds: d_min must be >= 0");
  if (!(b.d_min <= b.d_max)) {
    throw std::invalid_argument("bounds: d_min must not exceed d_max");
  }
  if (!(b.d_coarse_step > 0.0) || !(b.d_refine_step > 0.0)) {
    throw std::invalid_argument("bounds: d steps must be positive");
  }
  if (b.d_refine_step > b.d_coarse_step) {
    throw std::invalid_argument("bounds: d_refine_step must not exceed d_coarse_step");
  }
  if (b.n_link_distill_max < 0 || b.n_e2e_distill_max < 0) {
    throw std::invalid_argument("bounds: distillation caps must be >= 0");
  }
}

// User-supplied partial bounds; anything unset is auto-derived from the
// instance. n_max_hard_cap limits the auto-derived chain length only.
struct BoundsOverrides {
  std::optional<int> n_max;
  std::optional<double> d_min;
  std::optional<double> d_max;
  std::optional<double> d_coarse_step;
  std::optional<double> d_refine_step;
  std::optional<int> n_link_distill_max;
  std::optional<int> n_e2e_distill_max;
  int n_max_hard_cap = 500;
};

// Optional fixed values for individual decision variables.
struct Pins {
  std::optional<int> n_links;
  std::optional<double> d;
  std::optional<int> n_link_distill;
  std::optional<int> n_e2e_distill;
};

enum class SearchMethod { exhaustive, genetic };

inline const char* to_string(SearchMethod method) {
  return method == SearchMethod::exhaustive ? "exhaustive" : "genetic";
}

// A feasible optimum plus how it was found. Searches that find nothing
// feasible return std::nullopt instead.
struct Solution {
  ChainDecision decision;
  EvaluationResult result;
  double objective_km = 0.0;
  SearchMethod method = SearchMethod::exhaustive;
  long long evaluations_used = 0;
  std::optional<std::uint64_t> seed;
};

struct GaConfig {
  int population_size = 64;
  int generations_max = 1000;
  double crossover_rate = 0.9;
  double mutation_rate = 0.15;  // per gene
  int tournament_size = 3;
  std::uint64_t seed = 1;
  int stall_generations = 100;  // stop after this many generations without improvement
  double d_sigma_km = 0.25;     // Gaussian step size for the d gene
};

inline void validate(const GaConfig& ga) {
  if (ga.population_size < 2) {
    throw std::invalid_argument("ga: population_size must be >= 2");
  }
  if (ga.generations_max < 1) {
    throw std::invalid_argument("ga: generations_max must be >= 1");
  }
  if (!(ga.crossover_rate >= 0.0 && ga.crossover_rate <= 1.0) ||
      !(ga.mutation_rate >= 0.0 && ga.mutation_rate <= 1.0)) {
    throw std::invalid_argument("ga: rates must lie in [0, 1]");
  }
  if (ga.tournament_size < 1) {
    throw std::invalid_argument("ga: tournament_size must be >= 1");
  }
  if (ga.stall_generations < 1) {
    throw std::invalid_argument("ga: stall_generations must be >= 1");
  }
  if (!(ga.d_sigma_km > 0.0)) {
    throw std::invalid_argument("ga: d_sigma_km must be positive");
  }
}

// Deterministic preference between two feasible candidates: larger span wins;
// spans within 1e-9 km count as tied and fall back to fewer links, then fewer
// total distillation rounds, then higher end-to-end fidelity, then shorter d.
// Shared by every search path (including the reference oracle) so that ties
// resolve identically everywhere.
inline bool better_candidate(const ChainDecision& a, const EvaluationResult& ra,
                             const ChainDecision& b, const EvaluationResult& rb) {
  if (std::abs(ra.objective_km - rb.objective_km) > 1e-9) {
    return ra.objective_km > rb.objective_km;
  }
  if (a.n_links != b.n_links) return a.n_links < b.n_links;
  const int rounds_a = a.n_link_distill + a.n_e2e_distill;
  const int rounds_b = b.n_link_distill + b.n_e2e_distill;
  if (rounds_a != rounds_b) return rounds_a < rounds_b;
  if (ra.e2e_fidelity != rb.e2e_fidelity) return ra.e2e_fidelity > rb.e2e_fidelity;
  return a.d < b.d;
}

namespace detail {

// Highest link fidelity reachable from f0 with at most cap purification
// rounds. The map can degrade fidelity when f0 starts above its attracting
// point, so this is a running maximum, not simply the last iterate.
inline Fidelity best_link_fidelity(Fidelity f0, const NoiseParams& noise,
                                   int cap) {
  Fidelity best = f0;
  Fidelity f = f0;
  for (int i = 0; i < cap; ++i) {
    if (f.value() < 0.5) break;
    f = distill_fidelity(f, noise);
    if (f > best) best = f;
  }
  return best;
}

// Whether at most cap purification rounds can lift fidelity f up to f_min.
// Once a round stops strictly improving, further rounds never help.
inline bool distillable_to(Fidelity f, Fidelity f_min, const NoiseParams& noise,
                           int cap) {
  Fidelity cur = f;
  for (int i = 0;; ++i) {
    if (cur >= f_min) return true;
    if (i == cap || cur.value() < 0.5) return false;
    const Fidelity next = distill_fidelity(cur, noise);
    if (next <= cur) return false;
    cur = next;
  }
}

// Smallest chain length whose swapped fidelity cannot reach f_min even from
// the best distillable link fidelity with the full end-to-end budget; search
// spaces beyond it are provably infeasible. Falls back to hard_cap.
inline int derive_n_max(const LinkConfig& link, const NoiseParams& noise,
                        const QosRequirement& qos, int link_cap, int e2e_cap,
                        int hard_cap) {
  const Fidelity f_link = best_link_fidelity(link.f0, noise, link_cap);
  for (int n = 1; n <= hard_cap; ++n) {
    const double swapped =
        swap_chain_fidelity_raw(f_link.value(), n, noise);
    if (swapped < Fidelity::kMin ||
        !distillable_to(Fidelity(swapped), qos.f_min, noise, e2e_cap)) {
      return n;
    }
  }
  return hard_cap;
}

// Inclusive uniform grid over [lo, hi]. The top index is chosen so the last
// point does not exceed hi beyond rounding slack, and hi itself survives the
// float division (e.g. hi/step landing at 999.999...9 still yields 1000).
class DistanceGrid {
 public:
  DistanceGrid(double lo, double hi, double step) : lo_(lo), step_(step) {
    if (hi <= lo) {
      count_ = 1;
      return;
    }
    long long k = std::llround((hi - lo) / step);
    if (lo + static_cast<double>(k) * step >
        hi + 1e-12 * std::max(1.0, std::abs(hi))) {
      --k;
    }
    count_ = std::max(k, 0LL) + 1;
  }

  static DistanceGrid single_point(double d) { return DistanceGrid(d, d, 1.0); }

  long long size() const noexcept { return count_; }
  double at(long long i) const noexcept {
    return lo_ + static_cast<double>(i) * step_;
  }

  // Greatest index whose point is <= d (with slack for the division), clamped
  // into range. Used both as the analytic pruning hint and for snapping.
  long long index_at_or_below(double d) const noexcept {
    const long long i =
        static_cast<long long>(std::floor((d - lo_) / step_ + 1e-9));
    return std::clamp(i, 0LL, count_ - 1);
  }

  long long index_nearest(double d) const noexcept {
    const long long i = std::llround((d - lo_) / step_);
    return std::clamp(i, 0LL, count_ - 1);
  }

 private:
  double lo_;
  double step_;
  long long count_ = 1;
};

}  // namespace detail

// Fills in any bounds the caller did not fix. Derivations: d_max from the
// zero-distillation rate floor, distillation caps from the factor >= 2 rate
// cost per round, n_max from the fidelity argument in detail::derive_n_max.
inline SearchBounds derive_bounds(const LinkConfig& link, const NoiseParams& noise,
                                  const QosRequirement& qos,
                                  const BoundsOverrides& overrides = {}) {
  if (link.r0 < qos.r_min) {
    throw std::invalid_argument(
        "QoS rate unachievable at zero distance: r_min " +
        std::to_string(qos.r_min) + " exceeds source rate " +
        std::to_string(link.r0));
  }
  SearchBounds b;
  b.d_min = overrides.d_min.value_or(0.0);
  b.d_max = overrides.d_max.value_or(link.l0 * std::log(link.r0 / qos.r_min));
  b.d_coarse_step = overrides.d_coarse_step.value_or(0.05);
  b.d_refine_step = overrides.d_refine_step.value_or(0.001);
  const int cap =
      static_cast<int>(std::floor(std::log2(link.r0 / qos.r_min)));
  b.n_link_distill_max = overrides.n_link_distill_max.value_or(cap);
  b.n_e2e_distill_max = overrides.n_e2e_distill_max.value_or(cap);
  b.n_max = overrides.n_max.value_or(
      detail::derive_n_max(link, noise, qos, b.n_link_distill_max,
                           b.n_e2e_distill_max, overrides.n_max_hard_cap));
  validate(b);
  return b;
}

namespace detail {

struct VarRanges {
  int n_lo, n_hi;    // n_links
  int nl_lo, nl_hi;  // n_link_distill
  int ne_lo, ne_hi;  // n_e2e_distill
};

inline VarRanges ranges_for(const SearchBounds& bounds, const Pins& pins) {
  VarRanges r{1, bounds.n_max, 0, bounds.n_link_distill_max,
              0, bounds.n_e2e_distill_max};
  if (pins.n_links) {
    if (*pins.n_links < 1 || *pins.n_links > bounds.n_max) {
      throw std::invalid_argument("pin n_links outside [1, n_max]");
    }
    r.n_lo = r.n_hi = *pins.n_links;
  }
  if (pins.n_link_distill) {
    if (*pins.n_link_distill < 0 ||
        *pins.n_link_distill > bounds.n_link_distill_max) {
      throw std::invalid_argument("pin n_link_distill outside [0, cap]");
    }
    r.nl_lo = r.nl_hi = *pins.n_link_distill;
  }
  if (pins.n_e2e_distill) {
    if (*pins.n_e2e_distill < 0 ||
        *pins.n_e2e_distill > bounds.n_e2e_distill_max) {
      throw std::invalid_argument("pin n_e2e_distill outside [0, cap]");
    }
    r.ne_lo = r.ne_hi = *pins.n_e2e_distill;
  }
  return r;
}

inline DistanceGrid grid_for(const SearchBounds& bounds, const Pins& pins,
                             double step) {
  if (pins.d) {
    const double slack = 1e-9 * std::max(1.0, std::abs(bounds.d_max));
    if (*pins.d < bounds.d_min - slack || *pins.d > bounds.d_max + slack) {
      throw std::invalid_argument("pin d outside [d_min, d_max]");
    }
    return DistanceGrid::single_point(*pins.d);
  }
  return DistanceGrid(bounds.d_min, bounds.d_max, step);
}

// Rate penalty (product of 2/p over every distillation round) for one
// (n_link_distill, n_e2e_distill, n_links) triple, or nullopt when the triple
// is fidelity-infeasible for every d: fidelity does not depend on d, so such
// triples can be skipped wholesale.
inline std::optional<double> triple_rate_penalty(int n_link_distill,
                                                 int n_e2e_distill, int n_links,
                                                 const LinkConfig& link,
                                                 const NoiseParams& noise,
                                                 const QosRequirement& qos) {
  try {
    const DistillationTrace link_trace =
        distill_n_rounds(n_link_distill, link.f0, noise);
    const double swapped = swap_chain_fidelity_raw(
        link_trace.final_fidelity().value(), n_links, noise);
    if (swapped < Fidelity::kMin) return std::nullopt;
    const DistillationTrace e2e_trace =
        distill_n_rounds(n_e2e_distill, Fidelity(swapped), noise);
    if (e2e_trace.final_fidelity() < qos.f_min) return std::nullopt;
    double penalty = 1.0;
    for (double p : link_trace.success_probs) penalty *= 2.0 / p;
    for (double p : e2e_trace.success_probs) penalty *= 2.0 / p;
    return penalty;
  } catch (const DistillationInfeasible&) {
    return std::nullopt;
  }
}

// Largest grid index that evaluates feasible for a fixed triple, or -1.
// Feasibility along d is a prefix (rate decreases with d, fidelity ignores
// d), so starting from the analytic rate-bound hint we walk down to the first
// feasible point, then up while feasibility holds. The up-walk also covers
// any off-by-one between the analytic bound and evaluated arithmetic.
template <typename EvalFn>
long long last_feasible_index(const DistanceGrid& grid, long long hint,
                              const EvalFn& feasible_at) {
  long long k = std::clamp(hint, 0LL, grid.size() - 1);
  while (k >= 0 && !feasible_at(k)) --k;
  if (k < 0) return -1;
  while (k + 1 < grid.size() && feasible_at(k + 1)) ++k;
  return k;
}

}  // namespace detail

// Exact search over the bounded grid. Phase one scans the coarse d grid with
// analytic rate-bound pruning per triple (results identical to a naive full
// scan); phase two re-walks d at the refinement step for every triple whose
// best coarse span could still contend with the incumbent, so the returned
// solution is optimal over the refinement grid. Deterministic for any thread
// count. Returns std::nullopt when no grid point is feasible.
inline std::optional<Solution> exhaustive_search(const LinkConfig& link,
                                                 const NoiseParams& noise,
                                                 const QosRequirement& qos,
                                                 const SearchBounds& bounds,
                                                 const Pins& pins = {},
                                                 int threads = 1) {
  validate(bounds);
  const detail::VarRanges vr = detail::ranges_for(bounds, pins);
  const detail::DistanceGrid coarse =
      detail::grid_for(bounds, pins, bounds.d_coarse_step);
  const detail::DistanceGrid refine =
      detail::grid_for(bounds, pins, bounds.d_refine_step);

  struct TripleBest {
    int n_link_distill, n_e2e_distill, n_links;
    long long coarse_idx;
    double objective;
  };

  // Flattened triple index space, lexicographic in (n_L, n_E, N).
  const long long nl_count = vr.nl_hi - vr.nl_lo + 1;
  const long long ne_count = vr.ne_hi - vr.ne_lo + 1;
  const long long n_count = vr.n_hi - vr.n_lo + 1;
  const long long total_triples = nl_count * ne_count * n_count;

  auto decode = [&](long long t) {
    ChainDecision dec;
    dec.n_link_distill = vr.nl_lo + static_cast<int>(t / (ne_count * n_count));
    dec.n_e2e_distill =
        vr.ne_lo + static_cast<int>((t / n_count) % ne_count);
    dec.n_links = vr.n_lo + static_cast<int>(t % n_count);
    return dec;
  };

  // Phase one: per-triple best coarse index, collected per worker chunk so
  // concatenation preserves the sequential triple order.
  const int worker_count = static_cast<int>(
      std::max<long long>(1, std::min<long long>(threads, total_triples)));
  std::vector<std::vector<TripleBest>> chunk_best(worker_count);
  std::vector<long long> chunk_evals(worker_count, 0);

  auto scan_chunk = [&](int w, long long t_begin, long long t_end) {
    long long evals = 0;
    for (long long t = t_begin; t < t_end; ++t) {
      ChainDecision dec = decode(t);
      const auto penalty = detail::triple_rate_penalty(
          dec.n_link_distill, dec.n_e2e_distill, dec.n_links, link, noise, qos);
      if (!penalty) continue;
      // Analytic prefix end: rate >= r_min needs d <= l0 * ln(r0/(r_min*pi)).
      const double d_bound =
          link.l0 * std::log(link.r0 / (qos.r_min * *penalty));
      const long long hint = coarse.index_at_or_below(d_bound);
      auto feasible_at = [&](long long k) {
        dec.d = coarse.at(k);
        ++evals;
        return evaluate(dec, link, noise, qos).feasible;
      };
      const long long k =
          detail::last_feasible_index(coarse, hint, feasible_at);
      if (k < 0) continue;
      chunk_best[w].push_back(
          {dec.n_link_distill, dec.n_e2e_distill, dec.n_links, k,
           static_cast<double>(dec.n_links) * coarse.at(k)});
    }
    chunk_evals[w] = evals;
  };

  if (worker_count == 1) {
    scan_chunk(0, 0, total_triples);
  } else {
    std::vector<std::thread> pool;
    const long long per = (total_triples + worker_count - 1) / worker_count;
    for (int w = 0; w < worker_count; ++w) {
      const long long b = w * per;
      const long long e = std::min(total_triples, b + per);
      pool.emplace_back(scan_chunk, w, b, e);
    }
    for (auto& th : pool) th.join();
  }

  long long evaluations = 0;
  for (long long c : chunk_evals) evaluations += c;

  std::vector<TripleBest> survivors;
  for (auto& chunk : chunk_best) {
    survivors.insert(survivors.end(), chunk.begin(), chunk.end());
  }
  if (survivors.empty()) return std::nullopt;

  double incumbent = 0.0;
  for (const TripleBest& tb : survivors) {
    incumbent = std::max(incumbent, tb.objective);
  }

  // Phase two: refine every triple that could still reach the incumbent. The
  // margin of one coarse plus one refine step over-approximates how far the
  // refined point can move past the coarse one.
  std::optional<ChainDecision> best_dec;
  std::optional<EvaluationResult> best_res;
  for (const TripleBest& tb : survivors) {
    const double reach = coarse.at(tb.coarse_idx) + bounds.d_coarse_step +
                         bounds.d_refine_step;
    if (static_cast<double>(tb.n_links) * reach < incumbent - 1e-9) continue;

    ChainDecision dec;
    dec.n_links = tb.n_links;
    dec.n_link_distill = tb.n_link_distill;
    dec.n_e2e_distill = tb.n_e2e_distill;

    EvaluationResult last_result;
    auto feasible_at = [&](long long k) {
      dec.d = refine.at(k);
      ++evaluations;
      EvaluationResult r = evaluate(dec, link, noise, qos);
      if (r.feasible) last_result = r;
      return r.feasible;
    };
    const long long start = refine.index_at_or_below(coarse.at(tb.coarse_idx));
    const long long k = detail::last_feasible_index(refine, start, feasible_at);
    if (k < 0) continue;  // cannot happen given a feasible coarse point
    dec.d = refine.at(k);
    if (!best_dec || better_candidate(dec, last_result, *best_dec, *best_res)) {
      best_dec = dec;
      best_res = std::move(last_result);
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

// How badly an infeasible evaluation misses the QoS floors; used only to rank
// infeasible individuals against each other. Precondition violations sit in
// their own worse bucket above any plain rate/fidelity miss.
inline double constraint_violation(const EvaluationResult& r,
                                   const QosRequirement& qos) {
  if (r.infeasibility_reason ==
      InfeasibilityReason::distill_precondition_violated) {
    return 2.0 + (0.5 - r.e2e_fidelity.value());
  }
  double v = 0.0;
  if (r.e2e_fidelity < qos.f_min) {
    v += qos.f_min.value() - r.e2e_fidelity.value();
  }
  if (r.e2e_rate < qos.r_min) {
    v += 0.01 * std::log(qos.r_min / std::max(r.e2e_rate, 1e-300));
  }
  return v;
}

struct GaGenerationStat {
  int generation;
  double best_objective_km;     // best-so-far at this generation
  ChainDecision best_decision;  // decision achieving it
};

struct GaSearchResult {
  std::optional<Solution> best;
  std::vector<GaGenerationStat> history;  // entries start at the first feasible generation
  int generations_run = 0;
  bool stalled = false;
  long long evaluations_used = 0;
};

// Seeded genetic search over the same bounded space as exhaustive_search.
// Genomes are (n_links, n_link_distill, n_e2e_distill, d-grid index); d
// mutations are Gaussian in km then snapped back onto the refinement grid.
// Selection is feasible-first (death penalty): any feasible individual beats
// any infeasible one, infeasible ones compare by constraint_violation.
// Fully deterministic for a fixed seed; a single RNG stream drives every draw.
inline GaSearchResult ga_search(const LinkConfig& link, const NoiseParams& noise,
                                const QosRequirement& qos,
                                const SearchBounds& bounds, const GaConfig& ga,
                                const Pins& pins = {}) {
  validate(bounds);
  validate(ga);
  const detail::VarRanges vr = detail::ranges_for(bounds, pins);
  const detail::DistanceGrid grid =
      detail::grid_for(bounds, pins, bounds.d_refine_step);

  struct Genome {
    int n_links, n_link_distill, n_e2e_distill;
    long long d_idx;
  };
  struct Individual {
    Genome genome;
    ChainDecision decision;
    EvaluationResult result;
    double violation = 0.0;
  };

  std::mt19937_64 rng(ga.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  long long evaluations = 0;
  auto make_individual = [&](const Genome& g) {
    Individual ind;
    ind.genome = g;
    ind.decision = {g.n_links, grid.at(g.d_idx), g.n_link_distill,
                    g.n_e2e_distill};
    ++evaluations;
    ind.result = evaluate(ind.decision, link, noise, qos);
    if (!ind.result.feasible) {
      ind.violation = constraint_violation(ind.result, qos);
    }
    return ind;
  };

  // a strictly fitter than b under the death-penalty ranking
  auto fitter = [](const Individual& a, const Individual& b) {
    if (a.result.feasible != b.result.feasible) return a.result.feasible;
    if (a.result.feasible) {
      return a.result.objective_km > b.result.objective_km;
    }
    return a.violation < b.violation;
  };

  auto rand_int = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  auto random_genome = [&] {
    Genome g;
    g.n_links = rand_int(vr.n_lo, vr.n_hi);
    g.n_link_distill = rand_int(vr.nl_lo, vr.nl_hi);
    g.n_e2e_distill = rand_int(vr.ne_lo, vr.ne_hi);
    g.d_idx = std::uniform_int_distribution<long long>(0, grid.size() - 1)(rng);
    return g;
  };

  // +/- step whose magnitude k has probability proportional to 2^-k
  auto mutate_int = [&](int value, int lo, int hi) {
    int step = 1;
    while (unit(rng) < 0.5) ++step;
    if (unit(rng) < 0.5) step = -step;
    return std::clamp(value + step, lo, hi);
  };

  std::normal_distribution<double> d_noise(0.0, ga.d_sigma_km);
  auto mutate_genome = [&](Genome& g) {
    if (unit(rng) < ga.mutation_rate) {
      g.n_links = mutate_int(g.n_links, vr.n_lo, vr.n_hi);
    }
    if (unit(rng) < ga.mutation_rate) {
      g.n_link_distill = mutate_int(g.n_link_distill, vr.nl_lo, vr.nl_hi);
    }
    if (unit(rng) < ga.mutation_rate) {
      g.n_e2e_distill = mutate_int(g.n_e2e_distill, vr.ne_lo, vr.ne_hi);
    }
    if (unit(rng) < ga.mutation_rate) {
      const double d = grid.at(g.d_idx) + d_noise(rng);
      g.d_idx = grid.index_nearest(d);
    }
  };

  std::vector<Individual> population;
  population.reserve(ga.population_size);
  for (int i = 0; i < ga.population_size; ++i) {
    population.push_back(make_individual(random_genome()));
  }

  auto tournament = [&]() -> const Individual& {
    int best = rand_int(0, ga.population_size - 1);
    for (int i = 1; i < ga.tournament_size; ++i) {
      const int challenger = rand_int(0, ga.population_size - 1);
      if (fitter(population[challenger], population[best])) best = challenger;
    }
    return population[best];
  };

  GaSearchResult out;
  std::optional<Individual> best_ever;
  int stall = 0;

  auto absorb_generation = [&](int generation) {
    for (const Individual& ind : population) {
      if (!ind.result.feasible) continue;
      if (!best_ever ||
          better_candidate(ind.decision, ind.result, best_ever->decision,
                           best_ever->result)) {
        if (best_ever &&
            ind.result.objective_km > best_ever->result.objective_km + 1e-12) {
          stall = 0;
        }
        if (!best_ever) stall = 0;
        best_ever = ind;
      }
    }
    if (best_ever) {
      out.history.push_back({generation, best_ever->result.objective_km,
                             best_ever->decision});
    }
  };

  absorb_generation(0);
  int generation = 0;
  while (generation < ga.generations_max) {
    if (best_ever && stall >= ga.stall_generations) {
      out.stalled = true;
      break;
    }
    ++generation;
    ++stall;
    std::vector<Individual> next;
    next.reserve(ga.population_size);
    for (int i = 0; i < ga.population_size; ++i) {
      Genome child;
      if (unit(rng) < ga.crossover_rate) {
        const Genome& p1 = tournament().genome;
        const Genome& p2 = tournament().genome;
        child.n_links = (unit(rng) < 0.5 ? p1 : p2).n_links;
        child.n_link_distill = (unit(rng) < 0.5 ? p1 : p2).n_link_distill;
        child.n_e2e_distill = (unit(rng) < 0.5 ? p1 : p2).n_e2e_distill;
        child.d_idx = (unit(rng) < 0.5 ? p1 : p2).d_idx;
      } else {
        child = tournament().genome;
      }
      mutate_genome(child);
      next.push_back(make_individual(child));
    }
    population = std::move(next);
    absorb_generation(generation);
  }

  out.generations_run = generation;
  out.evaluations_used = evaluations;
  if (best_ever) {
    Solution sol;
    sol.decision = best_ever->decision;
    sol.result = best_ever->result;
    sol.objective_km = sol.result.objective_km;
    sol.method = SearchMethod::genetic;
    sol.evaluations_used = evaluations;
    sol.seed = ga.seed;
    out.best = sol;
  }
  return out;
}

}  // namespace qrnscale
