#pragma once

// Full linear-chain pipeline: distill every elementary link, swap the links
// into one end-to-end pair, distill that pair, then check the result against
// rate and fidelity floors. All expectation formulas, no sampling.

#include "qrnscale/core_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qrnscale {

// Physical parameters of one elementary link. d is a default separation used
// by single-point helpers; evaluate() always takes d from the ChainDecision.
struct LinkConfig {
  Fidelity f0;  // heralded fidelity of a fresh link pair
  double r0;    // source rate at zero distance (pairs per unit time)
  double l0;    // fiber attenuation length, km
  double d;     // node separation, km

  LinkConfig(Fidelity f0_in, double r0_in, double l0_in, double d_in = 0.0)
      : f0(f0_in), r0(r0_in), l0(l0_in), d(d_in) {
    if (!(r0 > 0.0)) {
      throw std::domain_error("source rate r0 must be positive, got " +
                              std::to_string(r0));
    }
    if (!(l0 > 0.0)) {
      throw std::domain_error("attenuation length l0 must be positive, got " +
                              std::to_string(l0));
    }
    if (!(d >= 0.0)) {
      throw std::domain_error("separation d must be >= 0, got " +
                              std::to_string(d));
    }
  }
};

// Candidate chain layout: how many links, how far apart, and how many
// distillation rounds at each level. The repeater count is n_links - 1.
struct ChainDecision {
  int n_links = 1;
  double d = 0.0;  // node separation, km
  int n_link_distill = 0;
  int n_e2e_distill = 0;
};

inline void validate(const ChainDecision& decision) {
  if (decision.n_links < 1) {
    throw std::invalid_argument("decision: n_links must be >= 1, got " +
                                std::to_string(decision.n_links));
  }
  if (!(decision.d >= 0.0)) {
    throw std::invalid_argument("decision: d must be >= 0, got " +
                                std::to_string(decision.d));
  }
  if (decision.n_link_distill < 0 || decision.n_e2e_distill < 0) {
    throw std::invalid_argument("decision: distillation counts must be >= 0");
  }
}

// End-to-end quality-of-service floors.
struct QosRequirement {
  double r_min;    // minimum end-to-end rate
  Fidelity f_min;  // minimum end-to-end fidelity

  QosRequirement(double r_min_in, Fidelity f_min_in)
      : r_min(r_min_in), f_min(f_min_in) {
    if (!(r_min > 0.0)) {
      throw std::domain_error("r_min must be positive, got " +
                              std::to_string(r_min));
    }
  }
};

enum class InfeasibilityReason {
  none,
  rate_below_min,
  fidelity_below_min,
  distill_precondition_violated,
};

inline const char* to_string(InfeasibilityReason reason) {
  switch (reason) {
    case InfeasibilityReason::none: return "none";
    case InfeasibilityReason::rate_below_min: return "rate_below_min";
    case InfeasibilityReason::fidelity_below_min: return "fidelity_below_min";
    case InfeasibilityReason::distill_precondition_violated:
      return "distill_precondition_violated";
  }
  return "unknown";
}

// Everything evaluate() learns about one decision. When the distillation
// precondition breaks mid-pipeline, e2e_fidelity holds the last fidelity the
// pipeline produced (the value that fell below 0.5) and the rates past the
// failure point stay 0; stages that completed keep their fields.
struct EvaluationResult {
  bool feasible = false;
  InfeasibilityReason infeasibility_reason = InfeasibilityReason::none;
  Fidelity link_fidelity_after_distill{Fidelity::kMin};
  double link_rate_after_distill = 0.0;
  Fidelity e2e_fidelity{Fidelity::kMin};
  double e2e_rate = 0.0;
  double objective_km = 0.0;  // n_links * d
  DistillationTrace link_trace;
  DistillationTrace e2e_trace;
};

namespace detail {

// Rate surviving a distillation schedule: each round keeps one pair out of
// two attempts and succeeds with that round's probability, so the rate picks
// up a factor p/2 per round.
inline double rate_after_distill(double base_rate, const DistillationTrace& trace) {
  double penalty = 1.0;
  for (double p : trace.success_probs) penalty *= 2.0 / p;
  return base_rate / penalty;
}

// Swap composition without the Fidelity range guard. Extreme measurement
// noise (eta < 0.5) can push the closed form below the Werner floor of 0.25;
// callers map that onto fidelity infeasibility instead of throwing.
inline double swap_chain_fidelity_raw(double f_link, int n_links,
                                      const NoiseParams& noise) {
  if (n_links == 1) return f_link;
  const double gate = noise.p2 * (4.0 * noise.eta * noise.eta - 1.0) / 3.0;
  const double link = (4.0 * f_link - 1.0) / 3.0;
  return 0.25 + 0.75 * std::pow(gate, n_links - 1) * std::pow(link, n_links);
}

}  // namespace detail

// Link fidelity after n_link_distill purification rounds.
inline Fidelity link_fidelity(int n_link_distill, Fidelity f0,
                              const NoiseParams& noise) {
  return distill_n_rounds(n_link_distill, f0, noise).final_fidelity();
}

// Link pair rate after fiber attenuation over link.d and n_link_distill
// purification rounds.
inline double link_rate(const LinkConfig& link, int n_link_distill,
                        const NoiseParams& noise) {
  const DistillationTrace trace =
      distill_n_rounds(n_link_distill, link.f0, noise);
  return detail::rate_after_distill(link.r0 * std::exp(-link.d / link.l0),
                                    trace);
}

// End-to-end fidelity right after swapping, before any end-to-end
// distillation.
inline Fidelity e2e_initial_fidelity(const ChainDecision& decision, Fidelity f0,
                                     const NoiseParams& noise) {
  validate(decision);
  return swap_chain_fidelity(
      link_fidelity(decision.n_link_distill, f0, noise), decision.n_links,
      noise);
}

// Runs the whole pipeline for one decision and grades it against the QoS
// floors. Distillation-precondition failures and sub-floor swap outputs are
// reported as infeasibility, never thrown; only invalid-domain inputs throw.
inline EvaluationResult evaluate(const ChainDecision& decision,
                                 const LinkConfig& link,
                                 const NoiseParams& noise,
                                 const QosRequirement& qos) {
  validate(decision);
  EvaluationResult out;
  out.objective_km = static_cast<double>(decision.n_links) * decision.d;

  // Link level: distill each elementary link, rate uses decision.d.
  try {
    out.link_trace = distill_n_rounds(decision.n_link_distill, link.f0, noise);
  } catch (const DistillationInfeasible& err) {
    out.infeasibility_reason = InfeasibilityReason::distill_precondition_violated;
    out.e2e_fidelity = Fidelity(err.fidelity());
    return out;
  }
  out.link_fidelity_after_distill = out.link_trace.final_fidelity();
  out.link_rate_after_distill = detail::rate_after_distill(
      link.r0 * std::exp(-decision.d / link.l0), out.link_trace);

  // Swap the distilled links into one end-to-end pair.
  const double f_swapped = detail::swap_chain_fidelity_raw(
      out.link_fidelity_after_distill.value(), decision.n_links, noise);
  if (f_swapped < Fidelity::kMin) {
    // The state left the Werner range entirely; certainly below any floor.
    out.infeasibility_reason = InfeasibilityReason::fidelity_below_min;
    out.e2e_fidelity = Fidelity(Fidelity::kMin);
    out.e2e_rate = out.link_rate_after_distill;
    return out;
  }

  // End-to-end distillation on the swapped pair.
  try {
    out.e2e_trace =
        distill_n_rounds(decision.n_e2e_distill, Fidelity(f_swapped), noise);
  } catch (const DistillationInfeasible& err) {
    out.infeasibility_reason = InfeasibilityReason::distill_precondition_violated;
    out.e2e_fidelity = Fidelity(err.fidelity());
    return out;
  }
  out.e2e_fidelity = out.e2e_trace.final_fidelity();
  out.e2e_rate =
      detail::rate_after_distill(out.link_rate_after_distill, out.e2e_trace);

  if (out.e2e_rate < qos.r_min) {
    out.infeasibility_reason = InfeasibilityReason::rate_below_min;
  } else if (out.e2e_fidelity < qos.f_min) {
    out.infeasibility_reason = InfeasibilityReason::fidelity_below_min;
  } else {
    out.feasible = true;
  }
  return out;
}

}  // namespace qrnscale
