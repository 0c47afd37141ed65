#pragma once

// Protocols, configurations, and deterministic transition semantics.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "popproto/errors.hpp"

namespace popproto {

using StateIndex = std::uint32_t;
using Count = std::uint64_t;

/// A single rule r1,r2 -> p1,p2. Input and output pairs are unordered.
struct Transition {
  StateIndex r1 = 0, r2 = 0, p1 = 0, p2 = 0;

  bool is_null() const {
    return (r1 == p1 && r2 == p2) || (r1 == p2 && r2 == p1);
  }

  /// Net change to the count of `s` when this transition fires.
  int net(StateIndex s) const {
    return int(p1 == s) + int(p2 == s) - int(r1 == s) - int(r2 == s);
  }
  bool consumes(StateIndex s) const { return net(s) < 0; }
  bool produces(StateIndex s) const { return net(s) > 0; }
  bool has_input(StateIndex s) const { return r1 == s || r2 == s; }
  bool has_output(StateIndex s) const { return p1 == s || p2 == s; }

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Count vector over the states of one protocol. All arithmetic is checked:
/// counts never go negative and never wrap.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::size_t num_states) : counts_(num_states, 0) {}
  explicit Configuration(std::vector<Count> counts) : counts_(std::move(counts)) {
    for (Count c : counts_) total_ = checked_add(total_, c);
  }

  std::size_t size() const { return counts_.size(); }
  Count total() const { return total_; }
  Count operator[](StateIndex s) const { return counts_.at(s); }
  std::span<const Count> counts() const { return counts_; }
  bool empty() const { return total_ == 0; }

  void add(StateIndex s, Count k = 1) {
    counts_.at(s) = checked_add(counts_[s], k);
    total_ = checked_add(total_, k);
  }
  void remove(StateIndex s, Count k = 1) {
    if (counts_.at(s) < k)
      throw CountError("count of state " + std::to_string(s) + " would go negative");
    counts_[s] -= k;
    total_ -= k;
  }
  void set(StateIndex s, Count k) {
    Count old = counts_.at(s);
    total_ = checked_add(total_ - old, k);
    counts_[s] = k;
  }

  Configuration& operator+=(const Configuration& o) {
    same_shape(o);
    for (std::size_t i = 0; i < counts_.size(); ++i) add(StateIndex(i), o.counts_[i]);
    return *this;
  }
  Configuration& operator-=(const Configuration& o) {
    same_shape(o);
    for (std::size_t i = 0; i < counts_.size(); ++i) remove(StateIndex(i), o.counts_[i]);
    return *this;
  }
  friend Configuration operator+(Configuration a, const Configuration& b) { return a += b; }
  friend Configuration operator-(Configuration a, const Configuration& b) { return a -= b; }

  Configuration scaled(Count k) const {
    Configuration out(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      Count v = 0;
      if (__builtin_mul_overflow(counts_[i], k, &v)) throw CountError("count overflow");
      out.add(StateIndex(i), v);
    }
    return out;
  }

  /// Componentwise c <= o.
  bool leq(const Configuration& o) const {
    same_shape(o);
    for (std::size_t i = 0; i < counts_.size(); ++i)
      if (counts_[i] > o.counts_[i]) return false;
    return true;
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.counts_ == b.counts_;
  }
  friend bool operator<(const Configuration& a, const Configuration& b) {
    return a.counts_ < b.counts_;
  }

  std::size_t hash() const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull ^ counts_.size();
    for (Count c : counts_) {
      h ^= c + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 0xff51afd7ed558ccdull;
    }
    return std::size_t(h);
  }

 private:
  static Count checked_add(Count a, Count b) {
    Count r = 0;
    if (__builtin_add_overflow(a, b, &r)) throw CountError("count overflow");
    return r;
  }
  void same_shape(const Configuration& o) const {
    if (o.counts_.size() != counts_.size())
      throw CountError("configurations over different state sets");
  }

  std::vector<Count> counts_;
  Count total_ = 0;
};

struct ConfigurationHash {
  std::size_t operator()(const Configuration& c) const { return c.hash(); }
};

/// Role designations used by function, approximation, and predicate protocols.
struct Roles {
  std::vector<StateIndex> inputs;
  std::optional<StateIndex> output;
  std::optional<StateIndex> quiescent;
  std::optional<StateIndex> approx;
  std::optional<std::vector<StateIndex>> voters1;
};

/// A population protocol: named states and a symmetric deterministic
/// transition function. Only non-null rules are stored; every other pair
/// maps to itself.
class Protocol {
 public:
  Protocol() = default;
  explicit Protocol(std::vector<std::string> names) {
    for (auto& n : names) add_state(std::move(n));
  }

  StateIndex add_state(std::string name) {
    if (name.empty()) throw RoleError("empty state name");
    if (index_.contains(name)) throw RoleError("duplicate state name '" + name + "'");
    StateIndex id = StateIndex(names_.size());
    index_.emplace(name, id);
    names_.push_back(std::move(name));
    return id;
  }

  std::size_t num_states() const { return names_.size(); }
  const std::string& name(StateIndex s) const { return names_.at(s); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<StateIndex> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  StateIndex index(const std::string& name) const {
    auto s = find(name);
    if (!s) throw UnknownState("unknown state '" + name + "'");
    return *s;
  }

  /// Adds a rule. Null rules are accepted and ignored. Returns false if an
  /// identical rule was already present.
  bool add_transition(Transition t) {
    check_state(t.r1);
    check_state(t.r2);
    check_state(t.p1);
    check_state(t.p2);
    if (t.is_null()) return false;
    auto key = pair_key(t.r1, t.r2);
    if (auto it = rule_index_.find(key); it != rule_index_.end()) {
      const Transition& old = rules_[it->second];
      if (same_outputs(old, t)) return false;
      throw DuplicateTransition(0, "pair {" + name(t.r1) + "," + name(t.r2) +
                                       "} already maps to a different output");
    }
    rule_index_.emplace(key, rules_.size());
    rules_.push_back(t);
    return true;
  }
  bool add_transition(const std::string& r1, const std::string& r2, const std::string& p1,
                      const std::string& p2) {
    return add_transition(Transition{index(r1), index(r2), index(p1), index(p2)});
  }

  /// Non-null rules in insertion order.
  const std::vector<Transition>& transitions() const { return rules_; }
  const Transition& transition(std::size_t rule) const { return rules_.at(rule); }

  /// Index of the non-null rule for the unordered pair {a, b}, if any.
  std::optional<std::size_t> rule_for(StateIndex a, StateIndex b) const {
    auto it = rule_index_.find(pair_key(a, b));
    if (it == rule_index_.end()) return std::nullopt;
    return it->second;
  }

  /// δ(a, b), oriented so that the first output belongs to the agent in `a`
  /// whenever the rule was declared in that orientation.
  std::pair<StateIndex, StateIndex> delta(StateIndex a, StateIndex b) const {
    auto r = rule_for(a, b);
    if (!r) return {a, b};
    const Transition& t = rules_[*r];
    if (t.r1 == a && t.r2 == b) return {t.p1, t.p2};
    return {t.p2, t.p1};
  }

  const Roles& roles() const { return roles_; }
  void set_roles(Roles r) {
    roles_ = std::move(r);
    validate_roles();
  }

  std::string to_string(const Transition& t) const {
    return name(t.r1) + " " + name(t.r2) + " -> " + name(t.p1) + " " + name(t.p2);
  }
  std::string rule_string(std::size_t rule) const { return to_string(transition(rule)); }

  Configuration empty_configuration() const { return Configuration(num_states()); }

  /// Builds a configuration from (name, count) pairs.
  Configuration configuration(
      std::initializer_list<std::pair<std::string, Count>> counts) const {
    Configuration c(num_states());
    for (auto& [n, k] : counts) c.add(index(n), k);
    return c;
  }

  void validate_roles() const {
    auto in_inputs = [&](StateIndex s) {
      return std::find(roles_.inputs.begin(), roles_.inputs.end(), s) != roles_.inputs.end();
    };
    for (StateIndex s : roles_.inputs) check_state(s);
    for (std::size_t i = 0; i < roles_.inputs.size(); ++i)
      for (std::size_t j = i + 1; j < roles_.inputs.size(); ++j)
        if (roles_.inputs[i] == roles_.inputs[j]) throw RoleError("input state listed twice");
    if (roles_.output) check_state(*roles_.output);
    if (roles_.quiescent) {
      check_state(*roles_.quiescent);
      if (in_inputs(*roles_.quiescent)) throw RoleError("quiescent state is an input state");
    }
    if (roles_.approx) {
      StateIndex a = *roles_.approx;
      check_state(a);
      if (in_inputs(a) || a == roles_.output || a == roles_.quiescent)
        throw RoleError("approximation state overlaps inputs, output, or quiescent state");
    }
    if (roles_.voters1)
      for (StateIndex s : *roles_.voters1) check_state(s);
  }

  friend bool operator==(const Protocol& a, const Protocol& b) {
    if (a.names_ != b.names_ || a.rules_.size() != b.rules_.size()) return false;
    for (std::size_t i = 0; i < a.rules_.size(); ++i)
      if (!same_outputs(a.rules_[i], b.rules_[i]) ||
          pair_key(a.rules_[i].r1, a.rules_[i].r2) != pair_key(b.rules_[i].r1, b.rules_[i].r2))
        return false;
    auto& x = a.roles_;
    auto& y = b.roles_;
    return x.inputs == y.inputs && x.output == y.output && x.quiescent == y.quiescent &&
           x.approx == y.approx && x.voters1 == y.voters1;
  }

 private:
  static std::uint64_t pair_key(StateIndex a, StateIndex b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
  }
  static bool same_outputs(const Transition& a, const Transition& b) {
    // Outputs compared as multisets after aligning inputs.
    auto ka = std::minmax(a.p1, a.p2);
    auto kb = std::minmax(b.p1, b.p2);
    return ka == kb;
  }
  void check_state(StateIndex s) const {
    if (s >= names_.size()) throw UnknownState("state index out of range");
  }

  std::vector<std::string> names_;
  std::unordered_map<std::string, StateIndex> index_;
  std::vector<Transition> rules_;
  std::unordered_map<std::uint64_t, std::size_t> rule_index_;
  Roles roles_;
};

/// Ordered list of rule indices applied from `origin`.
struct TransitionSequence {
  Configuration origin;
  std::vector<std::size_t> steps;
};

inline bool is_applicable(const Configuration& c, const Transition& t) {
  if (t.r1 == t.r2) return c[t.r1] >= 2;
  return c[t.r1] >= 1 && c[t.r2] >= 1;
}

/// c - {r1,r2} + {p1,p2}.
inline Configuration apply_transition(const Configuration& c, const Transition& t) {
  if (!is_applicable(c, t)) throw NotApplicable("transition not applicable");
  Configuration out = c;
  out.remove(t.r1);
  out.remove(t.r2);
  out.add(t.p1);
  out.add(t.p2);
  return out;
}

/// In-place variant used on hot paths; the caller guarantees applicability.
inline void fire(Configuration& c, const Transition& t) {
  c.remove(t.r1);
  c.remove(t.r2);
  c.add(t.p1);
  c.add(t.p2);
}

inline Configuration execute_path(const Protocol& p, const Configuration& origin,
                                  std::span<const std::size_t> steps) {
  Configuration c = origin;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Transition& t = p.transition(steps[i]);
    if (!is_applicable(c, t)) throw InvalidAt(i, p.to_string(t) + " not applicable");
    fire(c, t);
  }
  return c;
}

inline Configuration execute_path(const Protocol& p, const TransitionSequence& seq) {
  return execute_path(p, seq.origin, seq.steps);
}

/// Human-readable multiset form, e.g. "{2*x, 1*q}" with zero counts omitted.
inline std::string format_configuration(const Protocol& p, const Configuration& c) {
  std::string s = "{";
  bool first = true;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[StateIndex(i)] == 0) continue;
    if (!first) s += ", ";
    first = false;
    s += std::to_string(c[StateIndex(i)]) + "*" + p.name(StateIndex(i));
  }
  return s + "}";
}

}  // namespace popproto
