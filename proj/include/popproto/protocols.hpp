#pragma once

// Builtin protocols and the two linear-function compilers.

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "popproto/core.hpp"
#include "popproto/linear.hpp"
#include "popproto/sim.hpp"
#include "popproto/verify.hpp"

namespace popproto {

enum class InstanceKind { ExactFunction, ApproxFunction, Predicate };

/// Correct outputs for one input: y in [lo, hi] (a vote for predicates).
struct Expected {
  std::int64_t lo = 0, hi = 0;
  bool exact() const { return lo == hi; }
  bool contains(std::int64_t y) const { return lo <= y && y <= hi; }
  std::string to_string() const {
    return exact() ? std::to_string(lo) : "[" + std::to_string(lo) + "," + std::to_string(hi) + "]";
  }
};

using InputVector = std::vector<Count>;

struct ProtocolInstance {
  std::string id;
  Protocol protocol;
  InstanceKind kind = InstanceKind::ExactFunction;
  std::size_t arity = 1;
  /// Least valid approximation count; 0 when there is no approximation state.
  Count a0 = 0;
  /// q0(m, a) <= q0_constant * (|m| + a) for every valid input.
  double q0_constant = 0;
  std::function<Count(const InputVector&, Count)> q0;
  /// Inputs outside the domain have no defined output.
  std::function<bool(const InputVector&)> domain;
  std::function<Expected(const InputVector&, Count)> expected;
  ConfigPredicate stabilized;

  bool approximates() const { return protocol.roles().approx.has_value(); }

  bool in_domain(const InputVector& m) const { return m.size() == arity && (!domain || domain(m)); }

  Count default_q0(const InputVector& m, Count a = 0) const { return q0 ? q0(m, a) : 0; }

  /// m on the input states, a on the approximation state, q0 (or the
  /// override) on the quiescent state, zero everywhere else.
  Configuration initial(const InputVector& m, Count a = 0,
                        std::optional<Count> q0_override = std::nullopt) const {
    const Roles& r = protocol.roles();
    if (m.size() != arity)
      throw DimensionMismatch(id + " takes " + std::to_string(arity) + " inputs, got " +
                              std::to_string(m.size()));
    if (domain && !domain(m)) throw DomainError("input " + detail::vector_label(m) + " outside the domain of " + id);
    Configuration c = detail::input_configuration(protocol, m);
    if (r.approx) {
      if (a < a0) throw DomainError(id + " needs a >= " + std::to_string(a0));
      c.add(*r.approx, a);
    } else if (a != 0) {
      throw DomainError(id + " has no approximation state");
    }
    Count q = q0_override.value_or(default_q0(m, a));
    if (q > 0) {
      if (!r.quiescent) throw DomainError(id + " has no quiescent state");
      c.add(*r.quiescent, q);
    }
    return c;
  }

  OutputConvention convention() const { return convention_of(protocol); }

  StopCondition stop_condition() const {
    return stabilized ? StopCondition::predicate_holds(stabilized) : StopCondition::silent_only();
  }
};

namespace detail {

inline Roles function_roles(const Protocol& p, std::vector<std::string> inputs, const std::string& out,
                            const std::string& q, std::optional<std::string> approx = std::nullopt) {
  Roles r;
  for (auto& s : inputs) r.inputs.push_back(p.index(s));
  r.output = p.index(out);
  r.quiescent = p.index(q);
  if (approx) r.approx = p.index(*approx);
  return r;
}

inline Roles predicate_roles(const Protocol& p, std::vector<std::string> inputs,
                             std::vector<std::string> voters1) {
  Roles r;
  for (auto& s : inputs) r.inputs.push_back(p.index(s));
  r.voters1.emplace();
  for (auto& s : voters1) r.voters1->push_back(p.index(s));
  return r;
}

/// True when every listed state has count zero.
inline ConfigPredicate all_zero(std::vector<StateIndex> states) {
  return [states = std::move(states)](const Configuration& c) {
    return std::all_of(states.begin(), states.end(), [&](StateIndex s) { return c[s] == 0; });
  };
}

inline Expected exact(std::int64_t v) { return {v, v}; }

inline bool unanimous(const Configuration& c, const std::vector<bool>& voter1) {
  bool ones = false, zeros = false;
  for (std::size_t s = 0; s < c.size(); ++s)
    if (c[StateIndex(s)] > 0) (voter1[s] ? ones : zeros) = true;
  return !(ones && zeros);
}

inline ProtocolInstance make_double() {
  Protocol p({"x", "q", "y"});
  p.add_transition("x", "q", "y", "y");
  p.set_roles(function_roles(p, {"x"}, "y", "q"));
  ProtocolInstance in;
  in.id = "double";
  in.kind = InstanceKind::ExactFunction;
  in.q0_constant = 1;
  in.q0 = [](const InputVector& m, Count) { return m[0]; };
  in.expected = [](const InputVector& m, Count) { return exact(2 * std::int64_t(m[0])); };
  in.stabilized = all_zero({p.index("x")});
  in.protocol = std::move(p);
  return in;
}

inline ProtocolInstance make_halve_slow() {
  Protocol p({"x", "q", "y"});
  p.add_transition("x", "x", "y", "q");
  p.set_roles(function_roles(p, {"x"}, "y", "q"));
  ProtocolInstance in;
  in.id = "halve_slow";
  in.q0 = [](const InputVector&, Count) { return Count(0); };
  in.expected = [](const InputVector& m, Count) { return exact(std::int64_t(m[0] / 2)); };
  StateIndex x = p.index("x");
  in.stabilized = [x](const Configuration& c) { return c[x] <= 1; };
  in.protocol = std::move(p);
  return in;
}

inline ProtocolInstance make_halve_fast() {
  Protocol p({"x", "a", "b", "y", "q"});
  p.add_transition("a", "x", "b", "y");
  p.add_transition("b", "x", "a", "q");
  p.set_roles(function_roles(p, {"x"}, "y", "q", "a"));
  ProtocolInstance in;
  in.id = "halve_fast";
  in.kind = InstanceKind::ApproxFunction;
  in.a0 = 1;
  in.q0 = [](const InputVector&, Count) { return Count(0); };
  in.expected = [](const InputVector& m, Count a) {
    std::int64_t h = std::int64_t(m[0] / 2);
    return Expected{h, h + std::int64_t(a)};
  };
  in.stabilized = all_zero({p.index("x")});
  in.protocol = std::move(p);
  return in;
}

inline ProtocolInstance make_subtract() {
  Protocol p({"x1", "x2", "q", "y"});
  p.add_transition("x1", "q", "y", "q");
  p.add_transition("x2", "y", "q", "q");
  p.set_roles(function_roles(p, {"x1", "x2"}, "y", "q"));
  ProtocolInstance in;
  in.id = "subtract";
  in.arity = 2;
  in.q0_constant = 1;
  in.q0 = [](const InputVector& m, Count) { return m[0]; };
  in.domain = [](const InputVector& m) { return m[0] >= m[1]; };
  in.expected = [](const InputVector& m, Count) { return exact(std::int64_t(m[0]) - std::int64_t(m[1])); };
  StateIndex x1 = p.index("x1"), x2 = p.index("x2"), y = p.index("y");
  in.stabilized = [=](const Configuration& c) { return c[x1] == 0 && (c[x2] == 0 || c[y] == 0); };
  in.protocol = std::move(p);
  return in;
}

inline ProtocolInstance make_predicate(std::string id, Protocol p, std::size_t arity,
                                       std::function<bool(const InputVector&)> phi,
                                       ConfigPredicate stabilized) {
  ProtocolInstance in;
  in.id = std::move(id);
  in.kind = InstanceKind::Predicate;
  in.arity = arity;
  in.expected = [phi = std::move(phi)](const InputVector& m, Count) { return exact(phi(m) ? 1 : 0); };
  in.stabilized = std::move(stabilized);
  in.protocol = std::move(p);
  return in;
}

inline ProtocolInstance make_majority() {
  Protocol p({"x1", "x2", "y", "n"});
  p.add_transition("x1", "x2", "y", "y");
  p.add_transition("x1", "n", "x1", "y");
  p.add_transition("x2", "y", "x2", "n");
  p.add_transition("y", "n", "y", "y");
  p.set_roles(predicate_roles(p, {"x1", "x2"}, {"x1", "y"}));
  // Unanimity already rules out every rule, so it coincides with silence.
  auto voters = predicate_vote(p, *p.roles().voters1).voter1;
  return make_predicate(
      "majority", std::move(p), 2, [](const InputVector& m) { return m[0] >= m[1]; },
      [voters](const Configuration& c) { return unanimous(c, voters); });
}

inline ProtocolInstance make_parity() {
  // x / z: active agents carrying odd / even parity; p1 / p0: passive followers.
  Protocol p({"x", "z", "p1", "p0"});
  p.add_transition("x", "x", "z", "p0");
  p.add_transition("x", "z", "x", "p1");
  p.add_transition("z", "z", "z", "p0");
  p.add_transition("x", "p0", "x", "p1");
  p.add_transition("z", "p1", "z", "p0");
  p.set_roles(predicate_roles(p, {"x"}, {"x", "p1"}));
  auto voters = predicate_vote(p, *p.roles().voters1).voter1;
  StateIndex x = p.index("x"), z = p.index("z");
  return make_predicate(
      "parity", std::move(p), 1, [](const InputVector& m) { return m[0] % 2 == 1; },
      [=](const Configuration& c) { return c[x] + c[z] == 1 && unanimous(c, voters); });
}

inline ProtocolInstance make_equality() {
  Protocol p({"x1", "x2", "e", "n"});
  p.add_transition("x1", "x2", "e", "e");
  p.add_transition("x1", "e", "x1", "n");
  p.add_transition("x2", "e", "x2", "n");
  p.add_transition("n", "e", "e", "e");
  p.set_roles(predicate_roles(p, {"x1", "x2"}, {"e"}));
  StateIndex x1 = p.index("x1"), x2 = p.index("x2"), e = p.index("e"), n = p.index("n");
  return make_predicate(
      "equality", std::move(p), 2, [](const InputVector& m) { return m[0] == m[1]; },
      [=](const Configuration& c) {
        return (c[x1] == 0 && c[x2] == 0 && c[n] == 0) || (c[e] == 0 && (c[x1] == 0 || c[x2] == 0));
      });
}

}  // namespace detail

inline std::vector<std::string> builtin_names() {
  return {"double", "halve_slow", "halve_fast", "subtract", "majority", "parity", "equality"};
}

inline ProtocolInstance builtin(const std::string& name) {
  if (name == "double") return detail::make_double();
  if (name == "halve_slow") return detail::make_halve_slow();
  if (name == "halve_fast") return detail::make_halve_fast();
  if (name == "subtract") return detail::make_subtract();
  if (name == "majority") return detail::make_majority();
  if (name == "parity") return detail::make_parity();
  if (name == "equality") return detail::make_equality();
  throw UnknownName("unknown builtin '" + name + "'");
}

// ---------------------------------------------------------------------------
// Compilers

namespace detail {

inline std::string coefficient_list(const std::vector<std::string>& parts) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? ";" : "") + parts[i];
  return s;
}

}  // namespace detail

/// f(m) = sum c_i m(i) with c_i in N, computed exactly.
inline ProtocolInstance compile_nlinear(const std::vector<std::int64_t>& c) {
  if (c.empty()) throw DomainError("need at least one coefficient");
  for (auto ci : c)
    if (ci < 0) throw NonNaturalCoefficient("coefficient " + std::to_string(ci) + " is not a natural number");
  const std::size_t k = c.size();
  Protocol p;
  std::vector<std::string> inputs;
  for (std::size_t i = 1; i <= k; ++i) {
    inputs.push_back("x" + std::to_string(i));
    p.add_state(inputs.back());
  }
  p.add_state("q");
  p.add_state("y");
  std::vector<StateIndex> transient;
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& x = inputs[i];
    transient.push_back(p.index(x));
    auto ci = c[i];
    if (ci == 0) {
      p.add_transition(x, "q", "q", "q");
    } else if (ci == 1) {
      p.add_transition(x, "q", "y", "q");
    } else if (ci == 2) {
      p.add_transition(x, "q", "y", "y");
    } else {
      std::string prev = x;
      for (std::int64_t j = 1; j <= ci - 2; ++j) {
        std::string next = x + "_p" + std::to_string(j);
        transient.push_back(p.add_state(next));
        p.add_transition(prev, "q", "y", next);
        prev = next;
      }
      p.add_transition(prev, "q", "y", "y");
    }
  }
  p.set_roles(detail::function_roles(p, inputs, "y", "q"));

  ProtocolInstance in;
  std::vector<std::string> parts;
  for (auto ci : c) parts.push_back(std::to_string(ci));
  in.id = "nlinear(" + detail::coefficient_list(parts) + ")";
  in.kind = InstanceKind::ExactFunction;
  in.arity = k;
  in.q0_constant = double(*std::max_element(c.begin(), c.end()) + 1);
  in.q0 = [c](const InputVector& m, Count) {
    Count q = 1;
    for (std::size_t i = 0; i < m.size(); ++i) q += Count(c[i]) * m[i];
    return q;
  };
  in.expected = [c](const InputVector& m, Count) {
    std::int64_t v = 0;
    for (std::size_t i = 0; i < m.size(); ++i) v += c[i] * std::int64_t(m[i]);
    return detail::exact(v);
  };
  in.stabilized = detail::all_zero(std::move(transient));
  in.protocol = std::move(p);
  return in;
}

/// f(m) = sum floor((p_i/r_i) m(i)), approximated with error at most k*a.
inline ProtocolInstance compile_qlinear_approx(const LinearSpec& spec) {
  const std::size_t k = spec.coefficients.size();
  if (k == 0) throw DomainError("need at least one coefficient");
  for (const auto& ci : spec.coefficients)
    if (ci < 0)
      throw NegativeCoefficient("coefficient " + std::to_string(ci.numerator()) + "/" +
                                std::to_string(ci.denominator()) + " is negative");

  Protocol p;
  std::vector<std::string> inputs;
  for (std::size_t i = 1; i <= k; ++i) {
    inputs.push_back("x" + std::to_string(i));
    p.add_state(inputs.back());
  }
  p.add_state("q");
  p.add_state("y");
  p.add_state("a");
  std::vector<StateIndex> transient;
  for (auto& x : inputs) transient.push_back(p.index(x));
  auto ensure = [&](const std::string& s) {
    if (auto f = p.find(s)) return *f;
    return p.add_state(s);
  };

  // Multiply x_i by p_i into y_i.
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& x = inputs[i];
    const std::string yi = "y" + std::to_string(i + 1);
    auto num = spec.coefficients[i].numerator();
    if (num == 0) {
      p.add_transition(x, "q", "q", "q");
      continue;
    }
    transient.push_back(ensure(yi));
    if (num == 1) {
      p.add_transition(x, "q", yi, "q");
    } else if (num == 2) {
      p.add_transition(x, "q", yi, yi);
    } else {
      std::string prev = x;
      for (std::int64_t j = 1; j <= num - 2; ++j) {
        std::string next = x + "_p" + std::to_string(j);
        transient.push_back(ensure(next));
        p.add_transition(prev, "q", yi, next);
        prev = next;
      }
      p.add_transition(prev, "q", yi, yi);
    }
  }

  // Split a into one copy per input along a binary tree of depth l.
  std::vector<std::string> division_start(k);
  if (k == 1) {
    division_start[0] = "a";
  } else {
    std::size_t l = 0;
    while ((std::size_t(1) << l) < k) ++l;
    std::vector<std::string> level{""};
    for (std::size_t depth = 0; depth < l; ++depth) {
      std::vector<std::string> next;
      for (const auto& bits : level) {
        std::string parent = bits.empty() ? "a" : "a_" + bits;
        std::string c0 = "a_" + bits + "0", c1 = "a_" + bits + "1";
        ensure(c0);
        ensure(c1);
        p.add_transition(parent, "q", c0, c1);
        next.push_back(bits + "0");
        next.push_back(bits + "1");
      }
      level = std::move(next);
    }
    for (std::size_t i = 0; i < k; ++i) {
      division_start[i] = "a" + std::to_string(i + 1) + "_1";
      ensure(division_start[i]);
      p.add_transition("a_" + level[i], "q", division_start[i], "q");
    }
  }

  // Divide y_i by r_i into y.
  for (std::size_t i = 0; i < k; ++i) {
    if (spec.coefficients[i].numerator() == 0) continue;
    const std::string yi = "y" + std::to_string(i + 1);
    auto r = spec.coefficients[i].denominator();
    if (r == 1) {
      p.add_transition(yi, "q", "y", "q");
      continue;
    }
    std::vector<std::string> cycle{division_start[i]};
    for (std::int64_t j = 2; j <= r; ++j) {
      cycle.push_back("a" + std::to_string(i + 1) + "_" + std::to_string(j));
      ensure(cycle.back());
    }
    p.add_transition(cycle[0], yi, cycle[1], "y");
    for (std::int64_t j = 1; j < r; ++j)
      p.add_transition(cycle[j], yi, cycle[(j + 1) % r], "q");
  }
  p.set_roles(detail::function_roles(p, inputs, "y", "q", "a"));

  ProtocolInstance in;
  std::vector<std::string> parts;
  std::int64_t pmax = 0;
  for (const auto& ci : spec.coefficients) {
    parts.push_back(std::to_string(ci.numerator()) + "/" + std::to_string(ci.denominator()));
    pmax = std::max(pmax, ci.numerator());
  }
  in.id = "qlinear(" + detail::coefficient_list(parts) + ")";
  in.kind = InstanceKind::ApproxFunction;
  in.arity = k;
  in.a0 = 1;
  in.q0_constant = double(std::max<std::int64_t>(4 * std::int64_t(k) + 1, 2 * pmax + 1));
  in.q0 = [spec, k](const InputVector& m, Count a) {
    Count sum_pm = 0, norm = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      sum_pm += Count(spec.coefficients[i].numerator()) * m[i];
      norm += m[i];
    }
    return 2 * (2 * Count(k) * a + sum_pm) + norm + a;
  };
  in.expected = [spec, k](const InputVector& m, Count a) {
    std::vector<std::int64_t> mm(m.begin(), m.end());
    std::int64_t f = spec.evaluate(mm);
    std::int64_t slack = std::int64_t(k) * std::int64_t(a);
    return Expected{std::max<std::int64_t>(0, f - slack), f + slack};
  };
  in.stabilized = detail::all_zero(std::move(transient));
  in.protocol = std::move(p);
  return in;
}

// ---------------------------------------------------------------------------
// Certification

/// Exhaustive check over every input in `inputs` that lies in the domain,
/// crossed with `a_values` for approximators (values below a0 are skipped).
inline VerificationReport certify(const ProtocolInstance& in, const std::vector<InputVector>& inputs,
                                  const std::vector<Count>& a_values = {}, const ExploreLimits& limits = {},
                                  unsigned workers = default_workers(),
                                  std::optional<Count> q0_override = std::nullopt) {
  std::vector<VerifyCase> cases;
  std::vector<Count> as = in.approximates() ? a_values : std::vector<Count>{0};
  for (const auto& m : inputs) {
    if (!in.in_domain(m)) continue;
    for (Count a : as) {
      if (in.approximates() && a < in.a0) continue;
      Expected want = in.expected(m, a);
      std::string label = detail::vector_label(m);
      if (in.approximates()) label += " a=" + std::to_string(a);
      cases.push_back({label, in.initial(m, a, q0_override), [want](std::int64_t y) { return want.contains(y); },
                       want.to_string()});
    }
  }
  return check_cases(in.protocol, in.convention(), cases, limits, workers);
}

}  // namespace popproto
