#pragma once

// Uniform random pairwise scheduler with parallel-time accounting.
//
// Two engines share the same semantics: `run_until` samples one interaction
// at a time (null interactions included), `run_accelerated` skips runs of
// null interactions by sampling their length from the exact geometric law.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "popproto/core.hpp"
#include "popproto/parallel.hpp"
#include "popproto/rng.hpp"

namespace popproto {

enum class StopReason { StopConditionMet, Silent, Budget };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::StopConditionMet: return "stop_condition";
    case StopReason::Silent: return "silent";
    case StopReason::Budget: return "budget";
  }
  return "?";
}

using ConfigPredicate = std::function<bool(const Configuration&)>;

/// Silence always terminates a run. On top of that a run may stop when a
/// predicate holds or when an interaction budget is spent, whichever is first.
struct StopCondition {
  ConfigPredicate predicate;
  std::optional<std::uint64_t> budget;

  static StopCondition silent_only() { return {}; }
  static StopCondition predicate_holds(ConfigPredicate p) { return {std::move(p), std::nullopt}; }
  static StopCondition interaction_budget(std::uint64_t limit) { return {nullptr, limit}; }

  /// Stops as soon as either condition would.
  friend StopCondition first_of(StopCondition a, StopCondition b) {
    StopCondition out;
    if (a.predicate && b.predicate)
      out.predicate = [pa = a.predicate, pb = b.predicate](const Configuration& c) {
        return pa(c) || pb(c);
      };
    else
      out.predicate = a.predicate ? a.predicate : b.predicate;
    if (a.budget && b.budget)
      out.budget = std::min(*a.budget, *b.budget);
    else
      out.budget = a.budget ? a.budget : b.budget;
    return out;
  }
};

/// Non-null path of a run plus configuration snapshots every `stride` steps.
struct RecordedPath {
  TransitionSequence path;
  std::size_t stride = 1;
  std::vector<std::pair<std::size_t, Configuration>> snapshots;
};

struct RunResult {
  Configuration final_config;
  std::uint64_t interactions = 0;
  Count n = 0;
  StopReason stop_reason = StopReason::Silent;
  std::optional<RecordedPath> recorded;

  /// interactions / n.
  double parallel_time() const { return double(interactions) / double(n); }
};

struct RunOptions {
  bool record = false;
  /// Defaults to 1 for n <= 10^4 and n above.
  std::optional<std::size_t> snapshot_stride;
};

/// Number of unordered agent pairs whose interaction is non-null.
inline u128 eligible_pairs(const Protocol& p, const Configuration& c) {
  u128 e = 0;
  for (const Transition& t : p.transitions()) {
    if (t.r1 == t.r2) {
      Count k = c[t.r1];
      e += u128(k) * (k ? k - 1 : 0) / 2;
    } else {
      e += u128(c[t.r1]) * c[t.r2];
    }
  }
  return e;
}

inline bool is_silent(const Protocol& p, const Configuration& c) {
  for (const Transition& t : p.transitions())
    if (is_applicable(c, t)) return false;
  return true;
}

namespace detail {

inline StateIndex agent_state(const Configuration& c, Count agent, std::optional<StateIndex> skip_one = {}) {
  // Agents are laid out state by state; `skip_one` removes one agent of that
  // state from the layout (the first agent already chosen).
  Count acc = 0;
  for (std::size_t s = 0; s < c.size(); ++s) {
    Count k = c[StateIndex(s)];
    if (skip_one && *skip_one == s) --k;
    acc += k;
    if (agent < acc) return StateIndex(s);
  }
  throw Error("agent index out of range");
}

inline std::size_t default_stride(Count n) { return n <= 10000 ? 1 : std::size_t(n); }

struct Recorder {
  std::optional<RecordedPath> rec;
  Recorder(const Configuration& origin, const RunOptions& opt) {
    if (!opt.record) return;
    rec.emplace();
    rec->path.origin = origin;
    rec->stride = std::max<std::size_t>(1, opt.snapshot_stride.value_or(default_stride(origin.total())));
    rec->snapshots.emplace_back(0, origin);
  }
  void push(std::size_t rule, const Configuration& after) {
    if (!rec) return;
    rec->path.steps.push_back(rule);
    if (rec->path.steps.size() % rec->stride == 0)
      rec->snapshots.emplace_back(rec->path.steps.size(), after);
  }
  void finish(const Configuration& final_config) {
    if (!rec) return;
    if (rec->snapshots.back().first != rec->path.steps.size())
      rec->snapshots.emplace_back(rec->path.steps.size(), final_config);
  }
};

}  // namespace detail

/// One interaction: an unordered pair of distinct agents is chosen uniformly
/// and δ is applied. Returns the rule index that fired, or nullopt for a null
/// interaction.
inline std::optional<std::size_t> step_in_place(const Protocol& p, Configuration& c, Rng& rng) {
  Count n = c.total();
  if (n < 2) throw PopulationTooSmall("need at least two agents");
  Count i = rng.below(n);
  Count j = rng.below(n - 1);
  StateIndex a = detail::agent_state(c, i);
  StateIndex b = detail::agent_state(c, j, a);
  auto rule = p.rule_for(a, b);
  if (rule) fire(c, p.transition(*rule));
  return rule;
}

inline std::pair<Configuration, std::optional<std::size_t>> step(const Protocol& p,
                                                                  const Configuration& c, Rng& rng) {
  Configuration next = c;
  auto rule = step_in_place(p, next, rng);
  return {std::move(next), rule};
}

inline RunResult run_until(const Protocol& p, const Configuration& start, const StopCondition& stop,
                           Rng& rng, const RunOptions& opt = {}) {
  if (start.total() < 2) throw PopulationTooSmall("need at least two agents");
  RunResult r;
  r.n = start.total();
  Configuration c = start;
  detail::Recorder rec(start, opt);
  bool silent = is_silent(p, c);
  for (;;) {
    if (stop.predicate && stop.predicate(c)) {
      r.stop_reason = StopReason::StopConditionMet;
      break;
    }
    if (silent) {
      r.stop_reason = StopReason::Silent;
      break;
    }
    if (stop.budget && r.interactions >= *stop.budget) {
      r.stop_reason = StopReason::Budget;
      break;
    }
    ++r.interactions;
    if (auto rule = step_in_place(p, c, rng)) {
      rec.push(*rule, c);
      silent = is_silent(p, c);
    }
  }
  rec.finish(c);
  r.final_config = std::move(c);
  r.recorded = std::move(rec.rec);
  return r;
}

/// Same process as `run_until`, skipping null interactions in bulk.
inline RunResult run_accelerated(const Protocol& p, const Configuration& start,
                                 const StopCondition& stop, Rng& rng, const RunOptions& opt = {}) {
  Count n = start.total();
  if (n < 2) throw PopulationTooSmall("need at least two agents");
  const auto& rules = p.transitions();
  const u128 total_pairs = u128(n) * (n - 1) / 2;

  RunResult r;
  r.n = n;
  Configuration c = start;
  detail::Recorder rec(start, opt);
  std::vector<u128> weight(rules.size());
  auto weigh = [&](const Transition& t) -> u128 {
    if (t.r1 == t.r2) {
      Count k = c[t.r1];
      return u128(k) * (k ? k - 1 : 0) / 2;
    }
    return u128(c[t.r1]) * c[t.r2];
  };
  u128 eligible = 0;
  for (std::size_t i = 0; i < rules.size(); ++i) eligible += weight[i] = weigh(rules[i]);

  for (;;) {
    if (stop.predicate && stop.predicate(c)) {
      r.stop_reason = StopReason::StopConditionMet;
      break;
    }
    if (eligible == 0) {
      r.stop_reason = StopReason::Silent;
      break;
    }
    if (stop.budget && r.interactions >= *stop.budget) {
      r.stop_reason = StopReason::Budget;
      break;
    }
    double prob = double(eligible) / double(total_pairs);
    std::uint64_t skipped = rng.geometric_failures(prob);
    if (stop.budget && (*stop.budget - r.interactions) <= skipped) {
      r.interactions = *stop.budget;
      r.stop_reason = StopReason::Budget;
      break;
    }
    r.interactions += skipped + 1;

    u128 pick = rng.below(eligible);
    std::size_t rule = 0;
    while (pick >= weight[rule]) pick -= weight[rule++];
    const Transition& t = rules[rule];
    fire(c, t);
    rec.push(rule, c);

    eligible = 0;
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const Transition& u = rules[i];
      if (u.has_input(t.r1) || u.has_input(t.r2) || u.has_input(t.p1) || u.has_input(t.p2))
        weight[i] = weigh(u);
      eligible += weight[i];
    }
  }
  rec.finish(c);
  r.final_config = std::move(c);
  r.recorded = std::move(rec.rec);
  return r;
}

struct TrialRecord {
  std::uint64_t seed = 0;
  RunResult result;
};

struct TimeStats {
  std::size_t trials = 0;
  double mean = 0, stddev = 0, min = 0, max = 0;
  std::vector<TrialRecord> records;
};

enum class Engine { Naive, Accelerated };

inline RunResult run(Engine engine, const Protocol& p, const Configuration& start,
                     const StopCondition& stop, Rng& rng, const RunOptions& opt = {}) {
  return engine == Engine::Naive ? run_until(p, start, stop, rng, opt)
                                 : run_accelerated(p, start, stop, rng, opt);
}

inline TimeStats summarize(std::vector<TrialRecord> records) {
  TimeStats s;
  s.trials = records.size();
  if (records.empty()) return s;
  s.min = s.max = records.front().result.parallel_time();
  double sum = 0;
  for (auto& r : records) {
    double t = r.result.parallel_time();
    sum += t;
    s.min = std::min(s.min, t);
    s.max = std::max(s.max, t);
  }
  s.mean = sum / double(s.trials);
  if (s.trials > 1) {
    double ss = 0;
    for (auto& r : records) ss += std::pow(r.result.parallel_time() - s.mean, 2);
    s.stddev = std::sqrt(ss / double(s.trials - 1));
  }
  // Keep the mean inside [min, max] despite rounding.
  s.mean = std::clamp(s.mean, s.min, s.max);
  s.records = std::move(records);
  return s;
}

/// Runs independently seeded trials (seed = derive_seed(base_seed, i)) and
/// aggregates parallel time.
inline TimeStats estimate_stabilization_time(const Protocol& p, const Configuration& input,
                                             const StopCondition& stop, std::size_t trials,
                                             std::uint64_t base_seed,
                                             Engine engine = Engine::Accelerated,
                                             unsigned workers = default_workers()) {
  if (trials == 0) throw DomainError("trials must be at least 1");
  std::vector<TrialRecord> records(trials);
  parallel_for(trials, workers, [&](std::size_t i) {
    std::uint64_t seed = derive_seed(base_seed, i);
    Rng rng(seed);
    records[i] = {seed, run(engine, p, input, stop, rng)};
  });
  return summarize(std::move(records));
}

}  // namespace popproto
