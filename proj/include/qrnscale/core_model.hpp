#pragma once

// Analytic model of Werner-state entanglement links: fidelity after chained
// entanglement swapping with noisy gates/measurements, and the recurrence-2
// purification map (fidelity update + success probability) used for both
// link-level and end-to-end distillation.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrnscale {

// Raised when a distillation step would run on a pair below the 1/2 fidelity
// threshold where the map stops improving anything. round() is 1-based within
// a multi-round schedule, 0 when the offending value was passed in directly.
class DistillationInfeasible : public std::domain_error {
 public:
  DistillationInfeasible(double fidelity, int round)
      : std::domain_error("distillation requires input fidelity >= 0.5, got " +
                          std::to_string(fidelity) +
                          (round > 0 ? " entering round " + std::to_string(round)
                                     : std::string())),
        fidelity_(fidelity),
        round_(round) {}

  double fidelity() const noexcept { return fidelity_; }
  int round() const noexcept { return round_; }

 private:
  double fidelity_;
  int round_;
};

// Raised when the purification fixed-point iteration fails to settle within
// the iteration cap; carries the last iterate so callers can inspect it.
class FixedPointDivergence : public std::runtime_error {
 public:
  FixedPointDivergence(double last_iterate, int iterations)
      : std::runtime_error("distillation fixed point did not converge after " +
                           std::to_string(iterations) +
                           " iterations, last iterate " +
                           std::to_string(last_iterate)),
        last_iterate_(last_iterate) {}

  double last_iterate() const noexcept { return last_iterate_; }

 private:
  double last_iterate_;
};

// Fidelity of a Werner pair. Anything a chain of swaps or distillation rounds
// can produce lives in [0.25, 1]; the constructor enforces that so downstream
// code never has to re-check.
class Fidelity {
 public:
  static constexpr double kMin = 0.25;

  explicit Fidelity(double value) : value_(value) {
    if (!(value >= kMin && value <= 1.0)) {
      throw std::domain_error("fidelity " + std::to_string(value) +
                              " outside [0.25, 1]");
    }
  }

  double value() const noexcept { return value_; }

  friend auto operator<=>(const Fidelity&, const Fidelity&) = default;

 private:
  double value_;
};

// Device noise: two-qubit gate fidelity and measurement fidelity, both (0, 1].
// Default-constructed params describe perfect devices.
struct NoiseParams {
  double p2 = 1.0;
  double eta = 1.0;

  constexpr NoiseParams() = default;

  NoiseParams(double p2_in, double eta_in) : p2(p2_in), eta(eta_in) {
    if (!(p2 > 0.0 && p2 <= 1.0)) {
      throw std::domain_error("gate fidelity p2 must be in (0, 1], got " +
                              std::to_string(p2));
    }
    if (!(eta > 0.0 && eta <= 1.0)) {
      throw std::domain_error("measurement fidelity eta must be in (0, 1], got " +
                              std::to_string(eta));
    }
  }

  bool perfect() const noexcept { return p2 == 1.0 && eta == 1.0; }
};

// Round-by-round record of a distillation schedule. fidelities has one entry
// per state (input first, final last); success_probs has one entry per round,
// evaluated at that round's input fidelity.
struct DistillationTrace {
  std::vector<Fidelity> fidelities;
  std::vector<double> success_probs;

  int rounds() const noexcept { return static_cast<int>(success_probs.size()); }
  Fidelity final_fidelity() const { return fidelities.back(); }
};

// Werner weight -> fidelity, F = (3W + 1) / 4.
inline Fidelity werner_fidelity(double werner_weight) {
  if (!(werner_weight >= 0.0 && werner_weight <= 1.0)) {
    throw std::domain_error("Werner weight " + std::to_string(werner_weight) +
                            " outside [0, 1]");
  }
  return Fidelity((3.0 * werner_weight + 1.0) / 4.0);
}

namespace detail {

// Terms shared by the purification fidelity map and its success probability.
// Kept as one struct so the two stay consistent by construction.
struct DistillTerms {
  double a, b, c, d, e, h;
};

inline DistillTerms distill_terms(double f, const NoiseParams& noise) {
  const double miss = (1.0 - f) / 3.0;  // weight of each off-target component
  DistillTerms t;
  t.a = f * f + miss * miss;
  t.b = noise.eta * noise.eta + (1.0 - noise.eta) * (1.0 - noise.eta);
  t.c = f * miss + miss * miss;
  t.d = 2.0 * noise.eta * (1.0 - noise.eta);
  t.e = (1.0 - noise.p2 * noise.p2) / (8.0 * noise.p2 * noise.p2);
  t.h = f * f + (2.0 / 3.0) * f * (1.0 - f) + (5.0 / 9.0) * (1.0 - f) * (1.0 - f);
  return t;
}

}  // namespace detail

// Fidelity after connecting n_links identical links into one end-to-end pair
// via n_links - 1 noisy swaps. One link means zero swaps, which leaves the
// pair untouched, so the input is returned bit-exactly.
inline Fidelity swap_chain_fidelity(Fidelity f_link, int n_links,
                                    const NoiseParams& noise) {
  if (n_links < 1) {
    throw std::invalid_argument("swap_chain_fidelity: n_links must be >= 1, got " +
                                std::to_string(n_links));
  }
  if (n_links == 1) return f_link;
  const double gate = noise.p2 * (4.0 * noise.eta * noise.eta - 1.0) / 3.0;
  const double link = (4.0 * f_link.value() - 1.0) / 3.0;
  return Fidelity(0.25 + 0.75 * std::pow(gate, n_links - 1) *
                             std::pow(link, n_links));
}

// Heterogeneous variant: per-link fidelities may differ. With all entries
// equal this agrees with the homogeneous form up to floating round-off.
inline Fidelity swap_chain_fidelity(std::span<const Fidelity> link_fidelities,
                                    const NoiseParams& noise) {
  if (link_fidelities.empty()) {
    throw std::invalid_argument("swap_chain_fidelity: need at least one link");
  }
  if (link_fidelities.size() == 1) return link_fidelities.front();
  const double gate = noise.p2 * (4.0 * noise.eta * noise.eta - 1.0) / 3.0;
  double product = 1.0;
  for (const Fidelity& f : link_fidelities) {
    product *= (4.0 * f.value() - 1.0) / 3.0;
  }
  const int n = static_cast<int>(link_fidelities.size());
  return Fidelity(0.25 + 0.75 * std::pow(gate, n - 1) * product);
}

// One purification round on two copies at fidelity f_in with noisy devices.
// Only defined for f_in >= 0.5; below that the map no longer purifies.
inline Fidelity distill_fidelity(Fidelity f_in, const NoiseParams& noise) {
  const double f = f_in.value();
  if (f < 0.5) throw DistillationInfeasible(f, 0);
  const auto t = detail::distill_terms(f, noise);
  const double num = t.a * t.b + t.c * t.d + t.e;
  const double den = t.h * t.b + 4.0 * t.c * t.d + 4.0 * t.e;
  return Fidelity(num / den);
}

// Probability that the same round succeeds (both sides measure consistently).
inline double distill_success_prob(Fidelity f_in, const NoiseParams& noise) {
  const double f = f_in.value();
  if (f < 0.5) throw DistillationInfeasible(f, 0);
  const auto t = detail::distill_terms(f, noise);
  const double p =
      noise.p2 * noise.p2 * (t.h * t.b + 4.0 * t.c * t.d + 4.0 * t.e);
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::domain_error("distillation success probability " +
                            std::to_string(p) + " outside (0, 1]");
  }
  return p;
}

// n_rounds sequential purification rounds starting from f0. Throws
// DistillationInfeasible naming the first round whose input fell below 0.5.
inline DistillationTrace distill_n_rounds(int n_rounds, Fidelity f0,
                                          const NoiseParams& noise) {
  if (n_rounds < 0) {
    throw std::invalid_argument("distill_n_rounds: n_rounds must be >= 0, got " +
                                std::to_string(n_rounds));
  }
  DistillationTrace trace;
  trace.fidelities.reserve(static_cast<size_t>(n_rounds) + 1);
  trace.success_probs.reserve(static_cast<size_t>(n_rounds));
  trace.fidelities.push_back(f0);
  Fidelity f = f0;
  for (int round = 1; round <= n_rounds; ++round) {
    if (f.value() < 0.5) throw DistillationInfeasible(f.value(), round);
    trace.success_probs.push_back(distill_success_prob(f, noise));
    f = distill_fidelity(f, noise);
    trace.fidelities.push_back(f);
  }
  return trace;
}

// Iterates the purification map from f_start until successive values differ
// by less than tol, returning the attracting fidelity. For perfect devices
// that limit is 1; noisy devices settle strictly below 1.
inline Fidelity distill_fixed_point(Fidelity f_start, const NoiseParams& noise,
                                    double tol = 1e-12,
                                    int max_iterations = 10000) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("distill_fixed_point: tol must be positive");
  }
  if (max_iterations < 1) {
    throw std::invalid_argument("distill_fixed_point: need at least one iteration");
  }
  Fidelity f = f_start;
  for (int i = 0; i < max_iterations; ++i) {
    const Fidelity next = distill_fidelity(f, noise);
    if (std::abs(next.value() - f.value()) < tol) return next;
    f = next;
  }
  throw FixedPointDivergence(f.value(), max_iterations);
}

}  // namespace qrnscale
