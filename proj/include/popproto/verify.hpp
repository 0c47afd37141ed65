#pragma once

// Exhaustive reachability on small populations: post(c), output stability
// under the function and voting conventions, stable computation/decision
// certification, and bottleneck detection on recorded paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "popproto/core.hpp"
#include "popproto/parallel.hpp"

namespace popproto {

struct ExploreLimits {
  std::size_t max_configs = 1'000'000;
  std::size_t max_edges = 10'000'000;
};

/// Configurations reachable from `origin`, in breadth-first discovery order.
struct ReachSet {
  using Node = std::uint32_t;
  struct Edge {
    std::uint32_t rule;
    Node target;
  };

  Configuration origin;
  std::vector<Configuration> members;
  std::vector<std::vector<Edge>> edges;  // empty when edges were not kept
  std::vector<Node> parent;
  std::vector<std::uint32_t> parent_rule;
  std::unordered_map<Configuration, Node, ConfigurationHash> index;
  std::size_t edge_count = 0;
  bool exhaustive = true;

  std::size_t size() const { return members.size(); }
  std::optional<Node> find(const Configuration& c) const {
    auto it = index.find(c);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const Configuration& c) const { return index.contains(c); }

  /// Rule indices of the discovery path origin -> members[node].
  std::vector<std::size_t> path_to(Node node) const {
    std::vector<std::size_t> rules;
    while (node != 0) {
      rules.push_back(parent_rule[node]);
      node = parent[node];
    }
    std::reverse(rules.begin(), rules.end());
    return rules;
  }
};

struct BudgetExceeded : Error {
  BudgetExceeded(std::shared_ptr<const ReachSet> partial, const std::string& what)
      : Error(what), partial(std::move(partial)) {}
  std::shared_ptr<const ReachSet> partial;
};

/// Breadth-first closure. Stops early (exhaustive = false) when a budget is
/// hit instead of throwing.
inline ReachSet explore(const Protocol& p, const Configuration& origin,
                        const ExploreLimits& limits = {}, bool keep_edges = true) {
  ReachSet r;
  r.origin = origin;
  r.members.push_back(origin);
  r.parent.push_back(0);
  r.parent_rule.push_back(0);
  r.index.emplace(origin, 0);
  if (keep_edges) r.edges.emplace_back();
  const auto& rules = p.transitions();
  for (std::size_t head = 0; head < r.members.size(); ++head) {
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const Configuration& c = r.members[head];
      if (!is_applicable(c, rules[k])) continue;
      if (r.edge_count >= limits.max_edges) {
        r.exhaustive = false;
        return r;
      }
      Configuration next = c;
      fire(next, rules[k]);
      auto [it, fresh] = r.index.try_emplace(std::move(next), ReachSet::Node(r.members.size()));
      if (fresh) {
        if (r.members.size() >= limits.max_configs) {
          r.index.erase(it);
          r.exhaustive = false;
          return r;
        }
        r.members.push_back(it->first);
        r.parent.push_back(ReachSet::Node(head));
        r.parent_rule.push_back(std::uint32_t(k));
        if (keep_edges) r.edges.emplace_back();
      }
      ++r.edge_count;
      if (keep_edges) r.edges[head].push_back({std::uint32_t(k), it->second});
    }
  }
  return r;
}

/// post(c). Throws BudgetExceeded (carrying the partial set) when the closure
/// does not fit in the limits.
inline ReachSet post(const Protocol& p, const Configuration& c, const ExploreLimits& limits = {},
                     bool keep_edges = true) {
  ReachSet r = explore(p, c, limits, keep_edges);
  if (!r.exhaustive) {
    auto partial = std::make_shared<ReachSet>(std::move(r));
    throw BudgetExceeded(partial, "reachability budget exceeded after " +
                                      std::to_string(partial->size()) + " configurations");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Output conventions

struct FunctionOutput {
  StateIndex y;
};

/// Unanimous vote; `voter1[s]` marks the 1-voters, every other state votes 0.
struct PredicateVote {
  std::vector<bool> voter1;
};

using OutputConvention = std::variant<FunctionOutput, PredicateVote>;

inline PredicateVote predicate_vote(const Protocol& p, const std::vector<StateIndex>& voters1) {
  PredicateVote v{std::vector<bool>(p.num_states(), false)};
  for (StateIndex s : voters1) v.voter1.at(s) = true;
  return v;
}

/// Voting convention if the protocol declares 1-voters, else its output state.
inline OutputConvention convention_of(const Protocol& p) {
  const Roles& r = p.roles();
  if (r.voters1) return predicate_vote(p, *r.voters1);
  if (r.output) return FunctionOutput{*r.output};
  throw RoleError("protocol declares neither an output state nor 1-voters");
}

inline constexpr std::int64_t kUndefinedOutput = -1;

/// c(y) for functions; 0/1 for a unanimous vote; kUndefinedOutput otherwise.
inline std::int64_t output_value(const OutputConvention& conv, const Configuration& c) {
  if (auto* f = std::get_if<FunctionOutput>(&conv)) return std::int64_t(c[f->y]);
  const auto& v = std::get<PredicateVote>(conv).voter1;
  if (c.empty()) return kUndefinedOutput;
  bool ones = false, zeros = false;
  for (std::size_t s = 0; s < c.size(); ++s) {
    if (c[StateIndex(s)] == 0) continue;
    (v[s] ? ones : zeros) = true;
  }
  if (ones && zeros) return kUndefinedOutput;
  return ones ? 1 : 0;
}

/// Per-node output plus the smallest and largest output reachable from it.
/// A node is stable iff its output is defined and lo == hi.
struct OutputAnalysis {
  std::vector<std::int64_t> out, lo, hi;
  bool stable(std::size_t node) const {
    return out[node] != kUndefinedOutput && lo[node] == hi[node];
  }
};

namespace detail {

// Tarjan's algorithm, iterative. Components come out sinks first.
inline std::vector<std::uint32_t> strongly_connected(const ReachSet& r, std::size_t& num_components) {
  const std::size_t n = r.size();
  constexpr std::uint32_t kUnset = UINT32_MAX;
  std::vector<std::uint32_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<std::uint32_t> stack;
  std::vector<std::pair<std::uint32_t, std::size_t>> call;
  std::uint32_t counter = 0;
  num_components = 0;
  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, 0});
    while (!call.empty()) {
      auto& [v, next] = call.back();
      if (next == 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
      }
      const auto& out = r.edges[v];
      bool descended = false;
      while (next < out.size()) {
        std::uint32_t w = out[next++].target;
        if (index[w] == kUnset) {
          call.push_back({w, 0});
          descended = true;
          break;
        }
        if (comp[w] == kUnset) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      std::uint32_t done = v;
      if (low[done] == index[done]) {
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          comp[w] = std::uint32_t(num_components);
        } while (w != done);
        ++num_components;
      }
      call.pop_back();
      if (!call.empty()) {
        std::uint32_t parent = call.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  return comp;
}

}  // namespace detail

/// Requires an exhaustive ReachSet with edges.
inline OutputAnalysis analyze_outputs(const ReachSet& r, const OutputConvention& conv) {
  if (r.edges.size() != r.size()) throw Error("output analysis needs a reach set with edges");
  const std::size_t n = r.size();
  OutputAnalysis a;
  a.out.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.out[i] = output_value(conv, r.members[i]);

  std::size_t num_comp = 0;
  auto comp = detail::strongly_connected(r, num_comp);
  std::vector<std::vector<std::uint32_t>> members(num_comp);
  for (std::uint32_t v = 0; v < n; ++v) members[comp[v]].push_back(v);
  std::vector<std::int64_t> clo(num_comp, INT64_MAX), chi(num_comp, INT64_MIN);
  // Sinks first, so successors of a component are final when it is visited.
  for (std::size_t k = 0; k < num_comp; ++k) {
    for (std::uint32_t v : members[k]) {
      clo[k] = std::min(clo[k], a.out[v]);
      chi[k] = std::max(chi[k], a.out[v]);
      for (const auto& e : r.edges[v]) {
        std::uint32_t c2 = comp[e.target];
        if (c2 == k) continue;
        clo[k] = std::min(clo[k], clo[c2]);
        chi[k] = std::max(chi[k], chi[c2]);
      }
    }
  }
  a.lo.resize(n);
  a.hi.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    a.lo[v] = clo[comp[v]];
    a.hi[v] = chi[comp[v]];
  }
  return a;
}

/// Memo of stability verdicts. Safe to share between threads.
class StabilityCache {
 public:
  std::optional<bool> lookup(const Configuration& c) const {
    std::lock_guard lock(mu_);
    auto it = map_.find(c);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  void store(const Configuration& c, bool stable) {
    std::lock_guard lock(mu_);
    map_.insert_or_assign(c, stable);
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<Configuration, bool, ConfigurationHash> map_;
};

/// True iff the output of c is defined and every configuration in post(c)
/// has the same output.
inline bool is_output_stable(const Protocol& p, const Configuration& c, const OutputConvention& conv,
                             const ExploreLimits& limits = {}, StabilityCache* cache = nullptr) {
  std::int64_t out = output_value(conv, c);
  if (out == kUndefinedOutput) return false;
  if (cache)
    if (auto hit = cache->lookup(c)) return *hit;
  ReachSet r = post(p, c, limits, false);
  bool stable = std::all_of(r.members.begin(), r.members.end(),
                            [&](const Configuration& m) { return output_value(conv, m) == out; });
  if (cache) {
    // Everything reachable from a stable configuration is stable too.
    if (stable)
      for (const auto& m : r.members) cache->store(m, true);
    else
      cache->store(c, false);
  }
  return stable;
}

// ---------------------------------------------------------------------------
// Certification

enum class Verdict { Pass, Fail, Inconclusive, Skipped };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    case Verdict::Skipped: return "skipped";
  }
  return "?";
}

using OutputAcceptor = std::function<bool(std::int64_t)>;

/// One initial configuration together with the outputs counted as correct.
struct VerifyCase {
  std::string label;
  Configuration initial;
  OutputAcceptor acceptable;
  std::string expected;  // human-readable form of `acceptable`
};

struct CaseResult {
  std::string label;
  std::string expected;
  Configuration initial;
  Verdict verdict = Verdict::Inconclusive;
  std::string note;
  std::size_t explored = 0;
  /// Distinct outputs of stable configurations reachable from the initial one.
  std::vector<std::int64_t> stable_outputs;
  /// For failures: a reachable configuration from which no correct stable
  /// configuration is reachable, and the rule path leading to it.
  std::optional<Configuration> witness;
  std::vector<std::string> witness_path;
};

struct VerificationReport {
  std::vector<CaseResult> cases;

  std::size_t count(Verdict v) const {
    return std::size_t(std::count_if(cases.begin(), cases.end(),
                                     [v](const CaseResult& c) { return c.verdict == v; }));
  }
  /// Skipped cases do not count against a pass; inconclusive ones do.
  bool all_pass() const { return count(Verdict::Fail) == 0 && count(Verdict::Inconclusive) == 0; }
};

/// For every c in post(initial), some correct stable configuration must be
/// reachable from c.
inline CaseResult check_case(const Protocol& p, const OutputConvention& conv, const VerifyCase& vc,
                             const ExploreLimits& limits = {}, StabilityCache* cache = nullptr) {
  CaseResult res;
  res.label = vc.label;
  res.expected = vc.expected;
  res.initial = vc.initial;
  if (vc.initial.empty()) {
    res.verdict = Verdict::Skipped;
    res.note = "empty population";
    return res;
  }
  ReachSet r = explore(p, vc.initial, limits, true);
  res.explored = r.size();
  if (!r.exhaustive) {
    res.verdict = Verdict::Inconclusive;
    res.note = "budget exceeded after " + std::to_string(r.size()) + " configurations";
    return res;
  }
  OutputAnalysis a = analyze_outputs(r, conv);
  const std::size_t n = r.size();

  // Reverse reachability from correct stable nodes.
  std::vector<std::vector<std::uint32_t>> rev(n);
  for (std::uint32_t v = 0; v < n; ++v)
    for (const auto& e : r.edges[v]) rev[e.target].push_back(v);
  std::vector<char> good(n, 0);
  std::deque<std::uint32_t> queue;
  for (std::uint32_t v = 0; v < n; ++v) {
    bool stable = a.stable(v);
    if (cache) cache->store(r.members[v], stable);
    if (stable) {
      res.stable_outputs.push_back(a.out[v]);
      if (vc.acceptable(a.out[v])) {
        good[v] = 1;
        queue.push_back(v);
      }
    }
  }
  std::sort(res.stable_outputs.begin(), res.stable_outputs.end());
  res.stable_outputs.erase(std::unique(res.stable_outputs.begin(), res.stable_outputs.end()),
                           res.stable_outputs.end());
  while (!queue.empty()) {
    std::uint32_t v = queue.front();
    queue.pop_front();
    for (std::uint32_t u : rev[v])
      if (!good[u]) {
        good[u] = 1;
        queue.push_back(u);
      }
  }
  // Nodes are in BFS order, so the first bad node has a shortest witness.
  for (std::uint32_t v = 0; v < n; ++v) {
    if (good[v]) continue;
    res.verdict = Verdict::Fail;
    res.witness = r.members[v];
    for (std::size_t rule : r.path_to(v)) res.witness_path.push_back(p.rule_string(rule));
    res.note = "no correct stable configuration reachable from " +
               format_configuration(p, r.members[v]);
    return res;
  }
  res.verdict = Verdict::Pass;
  return res;
}

inline VerificationReport check_cases(const Protocol& p, const OutputConvention& conv,
                                      const std::vector<VerifyCase>& cases,
                                      const ExploreLimits& limits = {},
                                      unsigned workers = default_workers(),
                                      StabilityCache* cache = nullptr) {
  VerificationReport rep;
  rep.cases.resize(cases.size());
  parallel_for(cases.size(), workers,
               [&](std::size_t i) { rep.cases[i] = check_case(p, conv, cases[i], limits, cache); });
  return rep;
}

namespace detail {

inline std::string vector_label(const std::vector<Count>& m) {
  std::string s = "(";
  for (std::size_t i = 0; i < m.size(); ++i) s += (i ? "," : "") + std::to_string(m[i]);
  return s + ")";
}

inline Configuration input_configuration(const Protocol& p, const std::vector<Count>& m) {
  const auto& inputs = p.roles().inputs;
  if (m.size() != inputs.size())
    throw DimensionMismatch("input vector has " + std::to_string(m.size()) + " entries, protocol has " +
                            std::to_string(inputs.size()) + " input states");
  Configuration c = p.empty_configuration();
  for (std::size_t i = 0; i < m.size(); ++i) c.add(inputs[i], m[i]);
  return c;
}

}  // namespace detail

using FunctionOracle = std::function<std::int64_t(const std::vector<Count>&)>;
using PredicateOracle = std::function<bool(const std::vector<Count>&)>;
using QuiescentRule = std::function<Count(const std::vector<Count>&)>;

/// Initial configurations hold m on the input states and q0(m) on the
/// quiescent state; the output convention is the protocol's output state.
inline VerificationReport check_stable_computation(const Protocol& p, const FunctionOracle& f,
                                                   const std::vector<std::vector<Count>>& inputs,
                                                   const QuiescentRule& q0,
                                                   const ExploreLimits& limits = {},
                                                   unsigned workers = default_workers()) {
  const Roles& roles = p.roles();
  if (!roles.output) throw RoleError("function protocol needs an output state");
  if (!roles.quiescent) throw RoleError("function protocol needs a quiescent state");
  std::vector<VerifyCase> cases;
  for (const auto& m : inputs) {
    Configuration c = detail::input_configuration(p, m);
    c.add(*roles.quiescent, q0(m));
    std::int64_t want = f(m);
    cases.push_back({detail::vector_label(m), std::move(c),
                     [want](std::int64_t y) { return y == want; }, std::to_string(want)});
  }
  return check_cases(p, FunctionOutput{*roles.output}, cases, limits, workers);
}

/// Initial configurations hold only the input states; the empty input is
/// skipped because the vote is undefined there.
inline VerificationReport check_stable_decision(const Protocol& p, const PredicateOracle& phi,
                                                const std::vector<std::vector<Count>>& inputs,
                                                const ExploreLimits& limits = {},
                                                unsigned workers = default_workers()) {
  const Roles& roles = p.roles();
  if (!roles.voters1) throw RoleError("predicate protocol needs a 1-voter set");
  std::vector<VerifyCase> cases;
  for (const auto& m : inputs) {
    std::int64_t want = phi(m) ? 1 : 0;
    cases.push_back({detail::vector_label(m), detail::input_configuration(p, m),
                     [want](std::int64_t v) { return v == want; }, std::to_string(want)});
  }
  return check_cases(p, predicate_vote(p, *roles.voters1), cases, limits, workers);
}

/// Every vector in {0..max_each}^k whose entries sum to at most max_total.
inline std::vector<std::vector<Count>> input_grid(std::size_t k, Count max_total,
                                                  std::optional<Count> max_each = std::nullopt) {
  std::vector<std::vector<Count>> out;
  std::vector<Count> m(k, 0);
  Count cap = max_each.value_or(max_total);
  std::function<void(std::size_t, Count)> rec = [&](std::size_t i, Count left) {
    if (i == k) {
      out.push_back(m);
      return;
    }
    for (Count v = 0; v <= std::min(left, cap); ++v) {
      m[i] = v;
      rec(i + 1, left - v);
    }
    m[i] = 0;
  };
  rec(0, max_total);
  return out;
}

inline nlohmann::json to_json(const Protocol& p, const VerificationReport& rep) {
  using nlohmann::json;
  json cases = json::array();
  for (const auto& c : rep.cases) {
    json j{{"input", c.label},
           {"initial", format_configuration(p, c.initial)},
           {"expected", c.expected},
           {"verdict", to_string(c.verdict)},
           {"explored", c.explored},
           {"stable_outputs", c.stable_outputs}};
    if (!c.note.empty()) j["note"] = c.note;
    if (c.witness) {
      j["witness"] = format_configuration(p, *c.witness);
      j["witness_path"] = c.witness_path;
    }
    cases.push_back(std::move(j));
  }
  return json{{"pass", rep.all_pass()},
              {"counts",
               {{"pass", rep.count(Verdict::Pass)},
                {"fail", rep.count(Verdict::Fail)},
                {"inconclusive", rep.count(Verdict::Inconclusive)},
                {"skipped", rep.count(Verdict::Skipped)}}},
              {"cases", std::move(cases)}};
}

// ---------------------------------------------------------------------------
// Bottlenecks

struct InvalidPath : InvalidAt {
  using InvalidAt::InvalidAt;
};

struct BottleneckHit {
  std::size_t step;
  std::size_t rule;
  Count count_r1, count_r2;
};

struct BottleneckReport {
  Count b = 0;
  std::vector<BottleneckHit> hits;
};

/// Steps whose rule fires while both of its input states have count <= b.
inline BottleneckReport find_bottlenecks(const Protocol& p, const TransitionSequence& path, Count b) {
  BottleneckReport rep{b, {}};
  Configuration c = path.origin;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const Transition& t = p.transition(path.steps[i]);
    if (!is_applicable(c, t)) throw InvalidPath(i, p.to_string(t) + " not applicable");
    Count k1 = c[t.r1], k2 = c[t.r2];
    if (k1 <= b && k2 <= b) rep.hits.push_back({i, path.steps[i], k1, k2});
    fire(c, t);
  }
  return rep;
}

enum class ThresholdForm {
  Lemma,     // (1/|Λ|) sqrt(n / (6 t))
  Corollary  // (1/(4|Λ|)) sqrt(n / t)
};

inline double bottleneck_threshold(double n, double t_n, double lam,
                                   ThresholdForm form = ThresholdForm::Lemma) {
  if (!(t_n > 0)) throw DomainError("time bound must be positive");
  if (!(lam > 0)) throw DomainError("state count must be positive");
  if (n < 0) throw DomainError("population size must be nonnegative");
  if (form == ThresholdForm::Lemma) return std::sqrt(n / (6 * t_n)) / lam;
  return std::sqrt(n / t_n) / (4 * lam);
}

}  // namespace popproto
