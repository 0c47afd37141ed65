#pragma once

// Random Δ-ordered protocols and host paths for surgery tests.

#include <random>
#include <string>
#include <vector>

#include "popproto/surgery.hpp"

namespace fixtures {

using namespace popproto;

/// States d1..dd then g1..g(L-d). Rule i is di, s -> o1, o2 with s, o1, o2
/// drawn from Γ and the later Δ states, so (d1..dd) is an ordering by
/// construction. `extra` further random rules on unused pairs.
inline Protocol random_ordered_protocol(std::mt19937_64& rng, std::size_t d, std::size_t L, int extra) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= d; ++i) names.push_back("d" + std::to_string(i));
  for (std::size_t i = 1; i + d <= L; ++i) names.push_back("g" + std::to_string(i));
  Protocol p(names);
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<StateIndex> allowed;
    for (StateIndex s = StateIndex(i + 1); s < L; ++s) allowed.push_back(s);
    auto pick = [&] { return allowed[rng() % allowed.size()]; };
    p.add_transition(Transition{StateIndex(i), pick(), pick(), pick()});
  }
  for (int k = 0; k < extra; ++k) {
    Transition t{StateIndex(rng() % L), StateIndex(rng() % L), StateIndex(rng() % L), StateIndex(rng() % L)};
    if (!p.rule_for(t.r1, t.r2)) p.add_transition(t);
  }
  return p;
}

/// Host path x => o. The origin holds cΔ with c_i = X + 2*noise on Δ plus
/// e = C2·cΔ and X background on every Γ state, enough partners for any
/// firing pattern that stays within T·cΔ. Then `noise` random applicable
/// steps, then τ1..τd in turn until each di is down to its target.
inline TransitionSequence staged_host(std::mt19937_64& rng, const Protocol& p, const DeltaOrdering& ord,
                                      const SurgeryMatrices& m, Count X, const IntVector& target, int noise) {
  IntVector c(ord.size(), std::int64_t(X) + 2 * noise);
  TransitionSequence host;
  host.origin = to_configuration(embed(p.num_states(), m.gamma, IntVector(m.gamma.size(), std::int64_t(X)))) +
                to_configuration(embed(p.num_states(), ord.delta, c)) + to_configuration(m.C2.apply(c));
  Configuration cur = host.origin;
  for (int k = 0; k < noise; ++k) {
    std::size_t rule = rng() % p.transitions().size();
    if (!is_applicable(cur, p.transition(rule))) continue;
    fire(cur, p.transition(rule));
    host.steps.push_back(rule);
  }
  for (std::size_t i = 0; i < ord.size(); ++i) {
    const Transition& t = p.transition(ord.rules[i]);
    while (std::int64_t(cur[ord.delta[i]]) > target[i] && is_applicable(cur, t)) {
      fire(cur, t);
      host.steps.push_back(ord.rules[i]);
    }
  }
  return host;
}

inline IntVector random_vector(std::mt19937_64& rng, std::size_t n, std::int64_t max) {
  IntVector v(n);
  for (auto& x : v) x = std::int64_t(rng() % std::uint64_t(max + 1));
  return v;
}

}  // namespace fixtures
