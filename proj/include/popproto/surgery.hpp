#pragma once

// Path surgery on Δ-ordered protocols: ordering search, the integer matrices
// that account for added/removed transitions, and the three constructive
// rewrites (eliminate Δ, produce e, push Δ) with execution cross-checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "popproto/core.hpp"

namespace popproto {

using IntVector = std::vector<std::int64_t>;

namespace detail {

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw CountError("matrix entry overflow");
  return r;
}
inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw CountError("matrix entry overflow");
  return r;
}

}  // namespace detail

/// Dense signed integer matrix with overflow-checked arithmetic.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), v_(rows * cols, 0) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::int64_t& operator()(std::size_t i, std::size_t j) { return v_.at(i * cols_ + j); }
  std::int64_t operator()(std::size_t i, std::size_t j) const { return v_.at(i * cols_ + j); }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DimensionMismatch("matrix product shape mismatch");
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        std::int64_t x = a(i, k);
        if (x == 0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j)
          out(i, j) = detail::checked_add(out(i, j), detail::checked_mul(x, b(k, j)));
      }
    return out;
  }
  friend Matrix operator+(Matrix a, const Matrix& b) {
    a.same_shape(b);
    for (std::size_t i = 0; i < a.v_.size(); ++i) a.v_[i] = detail::checked_add(a.v_[i], b.v_[i]);
    return a;
  }
  friend Matrix operator-(Matrix a, const Matrix& b) {
    a.same_shape(b);
    for (std::size_t i = 0; i < a.v_.size(); ++i)
      a.v_[i] = detail::checked_add(a.v_[i], detail::checked_mul(-1, b.v_[i]));
    return a;
  }
  Matrix operator-() const { return Matrix(rows_, cols_) - *this; }

  IntVector apply(const IntVector& x) const {
    if (x.size() != cols_) throw DimensionMismatch("matrix-vector shape mismatch");
    IntVector y(rows_, 0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j)
        y[i] = detail::checked_add(y[i], detail::checked_mul((*this)(i, j), x[j]));
    return y;
  }

  /// Rows picked by index, in the given order.
  Matrix select_rows(const std::vector<std::size_t>& rows) const {
    Matrix out(rows.size(), cols_);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(i, j) = (*this)(rows[i], j);
    return out;
  }

  std::int64_t max() const { return v_.empty() ? 0 : *std::max_element(v_.begin(), v_.end()); }
  std::int64_t amax() const {
    std::int64_t m = 0;
    for (auto x : v_) m = std::max(m, x < 0 ? -x : x);
    return m;
  }
  bool strictly_lower() const {
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i; j < cols_; ++j)
        if ((*this)(i, j) != 0) return false;
    return true;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

  nlohmann::json to_json() const {
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < rows_; ++i) {
      std::vector<std::int64_t> r(v_.begin() + std::ptrdiff_t(i * cols_),
                                  v_.begin() + std::ptrdiff_t((i + 1) * cols_));
      rows.push_back(r);
    }
    return rows;
  }

 private:
  void same_shape(const Matrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionMismatch("matrix shape mismatch");
  }
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::int64_t> v_;
};

// ---------------------------------------------------------------------------
// Δ-orderings

/// d1..dd with witness rules τ1..τd (indices into Protocol::transitions()).
struct DeltaOrdering {
  std::vector<StateIndex> delta;
  std::vector<std::size_t> rules;

  std::size_t size() const { return delta.size(); }
  std::optional<std::size_t> position(StateIndex s) const {
    auto it = std::find(delta.begin(), delta.end(), s);
    if (it == delta.end()) return std::nullopt;
    return std::size_t(it - delta.begin());
  }
};

/// The other input of a rule consuming `d`, oriented as d, s -> o, o'.
struct OrientedRule {
  StateIndex d, s, o1, o2;
};

inline std::optional<OrientedRule> orient(const Transition& t, StateIndex d) {
  if (t.r1 == d) return OrientedRule{d, t.r2, t.p1, t.p2};
  if (t.r2 == d) return OrientedRule{d, t.r1, t.p1, t.p2};
  return std::nullopt;
}

/// The ordering condition for placing `d` with rule `t` when `forbidden`
/// holds d1..di (including d itself).
inline bool rule_qualifies(const Transition& t, StateIndex d, const std::vector<bool>& forbidden) {
  auto o = orient(t, d);
  if (!o) return false;
  return !forbidden[o->s] && !forbidden[o->o1] && !forbidden[o->o2];
}

/// Independent check of the ordering condition.
inline bool is_valid_ordering(const Protocol& p, const DeltaOrdering& ord) {
  if (ord.delta.size() != ord.rules.size()) return false;
  std::vector<bool> forbidden(p.num_states(), false);
  for (std::size_t i = 0; i < ord.size(); ++i) {
    if (ord.delta[i] >= p.num_states() || forbidden[ord.delta[i]]) return false;
    forbidden[ord.delta[i]] = true;
    if (ord.rules[i] >= p.transitions().size()) return false;
    if (!rule_qualifies(p.transition(ord.rules[i]), ord.delta[i], forbidden)) return false;
  }
  return true;
}

/// Fills the ordering from the back: the last position must avoid all of Δ,
/// and each earlier position avoids only the states still unplaced. Being
/// placeable only gets easier as states are placed, so this greedy search
/// finds an ordering whenever one exists. Ties go to the highest state index
/// (placed latest) and the lowest rule index.
inline DeltaOrdering find_delta_ordering(const Protocol& p, const std::vector<StateIndex>& delta) {
  std::vector<bool> in_delta(p.num_states(), false);
  for (StateIndex s : delta) {
    if (s >= p.num_states()) throw UnknownState("state index out of range");
    if (in_delta[s]) throw DomainError("state listed twice in Δ");
    in_delta[s] = true;
  }
  std::vector<StateIndex> remaining = delta;
  std::sort(remaining.begin(), remaining.end());
  std::vector<StateIndex> rev_states;
  std::vector<std::size_t> rev_rules;
  // `in_delta` doubles as the forbidden set: unplaced states.
  while (!remaining.empty()) {
    bool placed = false;
    for (std::size_t r = remaining.size(); r-- > 0 && !placed;) {
      for (std::size_t k = 0; k < p.transitions().size(); ++k) {
        if (!rule_qualifies(p.transition(k), remaining[r], in_delta)) continue;
        rev_states.push_back(remaining[r]);
        rev_rules.push_back(k);
        in_delta[remaining[r]] = false;
        remaining.erase(remaining.begin() + std::ptrdiff_t(r));
        placed = true;
        break;
      }
    }
    if (!placed) {
      std::vector<std::string> names;
      for (StateIndex s : remaining) names.push_back(p.name(s));
      std::string list;
      for (auto& n : names) list += (list.empty() ? "" : ",") + n;
      throw NotOrderable(names, "no Δ-ordering: none of {" + list +
                                    "} has a rule consuming exactly it that avoids the others");
    }
  }
  DeltaOrdering ord;
  ord.delta.assign(rev_states.rbegin(), rev_states.rend());
  ord.rules.assign(rev_rules.rbegin(), rev_rules.rend());
  return ord;
}

// ---------------------------------------------------------------------------
// Matrices

inline constexpr std::size_t kMaxSurgeryDelta = 16;

/// Matrices indexed by position in the ordering (columns) and by Δ position,
/// Γ position, or full state index (rows), depending on the matrix.
struct SurgeryMatrices {
  std::size_t d = 0;
  std::vector<StateIndex> delta;  // in ordering order
  std::vector<StateIndex> gamma;  // Λ \ Δ in state-index order
  Matrix T1, T, S, G, C1, C2;
  Matrix T1t, Tt, Gt, Gprime, C3t, C2_delta, C2_gamma, C4t, D1t, D2t;
};

inline SurgeryMatrices build_matrices(const Protocol& p, const DeltaOrdering& ord) {
  const std::size_t d = ord.size();
  if (d > kMaxSurgeryDelta) throw DomainError("Δ larger than " + std::to_string(kMaxSurgeryDelta));
  const std::size_t L = p.num_states();
  SurgeryMatrices m;
  m.d = d;
  m.delta = ord.delta;
  std::vector<std::optional<std::size_t>> dpos(L);
  std::vector<std::optional<std::size_t>> gpos(L);
  for (std::size_t i = 0; i < d; ++i) dpos[ord.delta[i]] = i;
  for (StateIndex s = 0; s < L; ++s)
    if (!dpos[s]) {
      gpos[s] = m.gamma.size();
      m.gamma.push_back(s);
    }
  const std::size_t g = m.gamma.size();

  m.T1 = Matrix(d, d);
  m.T1t = Matrix(d, d);
  m.S = Matrix(L, d);
  m.G = Matrix(g, d);
  m.Gt = Matrix(g, d);
  m.Gprime = Matrix(L, d);
  for (std::size_t j = 0; j < d; ++j) {
    auto o = *orient(p.transition(ord.rules[j]), ord.delta[j]);
    m.S(o.s, j) += 1;
    for (StateIndex out : {o.o1, o.o2}) {
      if (dpos[out]) {
        m.T1(*dpos[out], j) += 1;
        m.T1t(*dpos[out], j) += 1;
      } else {
        m.G(*gpos[out], j) += 1;
        m.Gt(*gpos[out], j) += 1;
      }
      m.Gprime(out, j) += 1;
    }
    if (dpos[o.s])
      m.T1t(*dpos[o.s], j) -= 1;
    else
      m.Gt(*gpos[o.s], j) -= 1;
    m.Gprime(o.s, j) -= 1;
    m.Gprime(o.d, j) -= 1;
  }

  // Truncated Neumann sums; T1 is nilpotent of index <= d.
  auto neumann = [d](const Matrix& A) {
    Matrix sum = Matrix::identity(d), power = Matrix::identity(d);
    for (std::size_t i = 1; i < d; ++i) {
      power = power * A;
      sum = sum + power;
    }
    return sum;
  };
  m.T = neumann(m.T1);
  m.Tt = neumann(m.T1t);
  m.C1 = m.G * m.T;
  m.C2 = m.S * m.T;
  m.C3t = m.Gt * m.Tt;
  std::vector<std::size_t> drows(ord.delta.begin(), ord.delta.end());
  std::vector<std::size_t> grows(m.gamma.begin(), m.gamma.end());
  m.C2_delta = m.C2.select_rows(drows);
  m.C2_gamma = m.C2.select_rows(grows);
  m.C4t = m.C3t * m.C2_delta;
  m.D1t = m.C3t - m.C4t + m.C1 - m.C2_gamma;
  m.D2t = -m.C4t + m.C1 - m.C2_gamma;
  return m;
}

struct BoundCheck {
  std::string name;
  std::int64_t value;
  std::int64_t bound;
  bool strict;  // value < bound, else value <= bound
  bool holds() const { return strict ? value < bound : value <= bound; }
};

/// The stated size bounds of every matrix, evaluated on this instance.
inline std::vector<BoundCheck> matrix_bounds(const SurgeryMatrices& m) {
  const std::int64_t d = std::int64_t(m.d);
  const std::int64_t p2d = std::int64_t(1) << m.d;
  return {
      {"max(T)", m.T.max(), p2d, true},
      {"max(C1)", m.C1.max(), 2 * p2d, true},
      {"max(C2)", m.C2.max(), p2d, true},
      {"amax(C3~)", m.C3t.amax(), 2 * p2d, true},
      {"amax(D1~)", m.D1t.amax(), d * 4 * p2d * p2d, false},
      {"amax(D2~)", m.D2t.amax(), d * 4 * p2d * p2d, false},
  };
}

// ---------------------------------------------------------------------------
// Vector helpers

inline IntVector restrict_to(const Configuration& c, const std::vector<StateIndex>& states) {
  IntVector v;
  for (StateIndex s : states) v.push_back(std::int64_t(c[s]));
  return v;
}

/// Full-length signed vector with `v` placed on `states`.
inline IntVector embed(std::size_t num_states, const std::vector<StateIndex>& states, const IntVector& v) {
  if (v.size() != states.size()) throw DimensionMismatch("vector length does not match state list");
  IntVector out(num_states, 0);
  for (std::size_t i = 0; i < states.size(); ++i) out[states[i]] = v[i];
  return out;
}

inline IntVector signed_counts(const Configuration& c) {
  IntVector v;
  for (Count k : c.counts()) v.push_back(std::int64_t(k));
  return v;
}

inline IntVector operator+(IntVector a, const IntVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = detail::checked_add(a[i], b[i]);
  return a;
}
inline IntVector operator-(IntVector a, const IntVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = detail::checked_add(a[i], -b[i]);
  return a;
}

/// Throws CountError if any entry is negative.
inline Configuration to_configuration(const IntVector& v) {
  std::vector<Count> c;
  for (auto x : v) {
    if (x < 0) throw CountError("negative count in predicted configuration");
    c.push_back(Count(x));
  }
  return Configuration(std::move(c));
}

inline std::int64_t max_entry(const IntVector& v) {
  return v.empty() ? 0 : *std::max_element(v.begin(), v.end());
}

// ---------------------------------------------------------------------------
// Validity

struct PathValidity {
  bool valid = true;
  std::size_t index = 0;     // first failing step
  StateIndex state = 0;      // a state whose count is too small there
};

inline PathValidity verify_path_validity(const Protocol& p, const Configuration& origin,
                                         const std::vector<std::size_t>& steps) {
  Configuration c = origin;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Transition& t = p.transition(steps[i]);
    if (!is_applicable(c, t)) {
      StateIndex short_state = (t.r1 == t.r2 || c[t.r1] == 0) ? t.r1 : t.r2;
      return {false, i, short_state};
    }
    fire(c, t);
  }
  return {};
}

inline PathValidity verify_path_validity(const Protocol& p, const TransitionSequence& seq) {
  return verify_path_validity(p, seq.origin, seq.steps);
}

struct EditFailure : InvalidEdit {
  EditFailure(PathValidity v, const std::string& what) : InvalidEdit(what), validity(v) {}
  PathValidity validity;
};

// ---------------------------------------------------------------------------
// eliminate Δ

struct Elimination {
  IntVector c_delta;
  IntVector counts;               // T·cΔ, occurrences of each τi
  std::vector<IntVector> rounds;  // T1^(r-1)·cΔ
  Configuration e;                // C2·cΔ
  Configuration z;                // C1·cΔ on Γ, zero on Δ
  TransitionSequence path;        // from cΔ + e
  Configuration executed;
};

inline Elimination eliminate_delta(const Protocol& p, const DeltaOrdering& ord, const SurgeryMatrices& m,
                                   const IntVector& c_delta) {
  const std::size_t d = ord.size();
  if (c_delta.size() != d) throw DimensionMismatch("cΔ must have one entry per Δ state");
  for (auto x : c_delta)
    if (x < 0) throw DomainError("cΔ must be nonnegative");
  Elimination el;
  el.c_delta = c_delta;
  el.counts = m.T.apply(c_delta);
  el.e = to_configuration(m.C2.apply(c_delta));
  el.z = to_configuration(embed(p.num_states(), m.gamma, m.C1.apply(c_delta)));

  Configuration origin = to_configuration(embed(p.num_states(), ord.delta, c_delta)) + el.e;
  el.path.origin = origin;
  IntVector round = c_delta;
  for (std::size_t r = 0; r < d; ++r) {
    el.rounds.push_back(round);
    for (std::size_t i = 0; i < d; ++i)
      el.path.steps.insert(el.path.steps.end(), std::size_t(round[i]), ord.rules[i]);
    round = m.T1.apply(round);
  }
  el.executed = execute_path(p, el.path);
  return el;
}

// ---------------------------------------------------------------------------
// produce e

struct Production {
  IntVector o_delta, e_delta;
  IntVector c_tilde;              // oΔ − eΔ
  IntVector t_tilde;              // T~·c~, signed change in τi occurrences
  std::vector<std::size_t> removed_positions;
  Configuration buffer;
  std::int64_t lemma_buffer_entry = 0;  // d·2^(d+1)·max(b1, eΔ)
  std::int64_t lemma_b2 = 0;            // |Λ|·b1 + d·2^d·max(b1, eΔ)·|Λ|²
  TransitionSequence edited;            // from buffer + x
  IntVector predicted;                  // buffer + oΓ + C3~·c~ + eΔ
  Configuration executed;
  std::vector<std::string> warnings;
};

/// Rewrites `host` (x => o) so that it ends with exactly eΔ on Δ. Removals
/// take the last occurrences of each τi; additions are appended τ1 first.
/// `buffer` defaults to the lemma's constant vector.
inline Production produce_e(const Protocol& p, const DeltaOrdering& ord, const SurgeryMatrices& m,
                            const TransitionSequence& host, const IntVector& e_delta, std::int64_t b1,
                            std::optional<Configuration> buffer = std::nullopt) {
  const std::size_t d = ord.size();
  const std::int64_t L = std::int64_t(p.num_states());
  if (e_delta.size() != d) throw DimensionMismatch("eΔ must have one entry per Δ state");
  for (auto x : e_delta)
    if (x < 0) throw DomainError("eΔ must be nonnegative");
  Configuration o;
  try {
    o = execute_path(p, host);
  } catch (const InvalidAt& err) {
    throw InvalidAt(err.index, std::string("host path invalid: ") + err.what());
  }

  Production pr;
  pr.o_delta = restrict_to(o, ord.delta);
  pr.e_delta = e_delta;
  pr.c_tilde = pr.o_delta - e_delta;
  pr.t_tilde = m.Tt.apply(pr.c_tilde);
  std::int64_t scale = std::max(b1, max_entry(e_delta));
  pr.lemma_buffer_entry = detail::checked_mul(std::int64_t(d) << (d + 1), scale);
  pr.lemma_b2 = L * b1 + detail::checked_mul(detail::checked_mul(std::int64_t(d) << d, scale), L * L);
  for (auto x : pr.o_delta)
    if (x > b1) pr.warnings.push_back("oΔ exceeds b1");
  if (buffer) {
    if (buffer->size() != p.num_states()) throw DimensionMismatch("buffer over wrong state set");
    pr.buffer = *buffer;
    for (std::size_t s = 0; s < pr.buffer.size(); ++s)
      if (std::int64_t(pr.buffer[StateIndex(s)]) < pr.lemma_buffer_entry) {
        pr.warnings.push_back("buffer smaller than d*2^(d+1)*max(b1,eΔ) = " +
                              std::to_string(pr.lemma_buffer_entry));
        break;
      }
  } else {
    pr.buffer = Configuration(std::vector<Count>(p.num_states(), Count(pr.lemma_buffer_entry)));
  }

  // Removals: mark the last |t~(i)| occurrences of τi.
  std::vector<char> drop(host.steps.size(), 0);
  for (std::size_t i = 0; i < d; ++i) {
    if (pr.t_tilde[i] >= 0) continue;
    std::int64_t need = -pr.t_tilde[i];
    for (std::size_t k = host.steps.size(); k-- > 0 && need > 0;)
      if (host.steps[k] == ord.rules[i]) {
        drop[k] = 1;
        --need;
      }
    if (need > 0)
      throw InsufficientOccurrences(i, "host has too few occurrences of " + p.rule_string(ord.rules[i]) +
                                           " to remove " + std::to_string(-pr.t_tilde[i]));
  }
  pr.edited.origin = pr.buffer + host.origin;
  for (std::size_t k = 0; k < host.steps.size(); ++k) {
    if (drop[k])
      pr.removed_positions.push_back(k);
    else
      pr.edited.steps.push_back(host.steps[k]);
  }
  for (std::size_t i = 0; i < d; ++i)
    if (pr.t_tilde[i] > 0)
      pr.edited.steps.insert(pr.edited.steps.end(), std::size_t(pr.t_tilde[i]), ord.rules[i]);

  IntVector o_gamma_full = embed(p.num_states(), m.gamma, restrict_to(o, m.gamma));
  pr.predicted = signed_counts(pr.buffer) + o_gamma_full +
                 embed(p.num_states(), m.gamma, m.C3t.apply(pr.c_tilde)) +
                 embed(p.num_states(), ord.delta, e_delta);

  PathValidity v = verify_path_validity(p, pr.edited);
  if (!v.valid)
    throw EditFailure(v, "edited path invalid at step " + std::to_string(v.index) + " (" +
                             p.rule_string(pr.edited.steps[v.index]) + ", short of " +
                             p.name(v.state) + ")");
  pr.executed = execute_path(p, pr.edited);
  return pr;
}

// ---------------------------------------------------------------------------
// push Δ

struct B2Diagnostics {
  /// max(|Λ|b1 + d2^d·max(b1, d2^(d+1)(b1+b))·|Λ|², d²2^(2d+2)(b1+b))
  double statement_form = 0;
  /// max(|Λ|b1 + d2^d·max(b1, e2Δ)·|Λ|², (d²+1)2^(2d+1)(b1+b))
  double proof_form = 0;
};

inline B2Diagnostics b2_diagnostics(std::size_t num_states, std::size_t d, double b1, double b,
                                    double max_e2) {
  const double L = double(num_states), dd = double(d), p2 = std::ldexp(1.0, int(d));
  B2Diagnostics r;
  r.statement_form = std::max(L * b1 + dd * p2 * std::max(b1, dd * 2 * p2 * (b1 + b)) * L * L,
                              dd * dd * 4 * p2 * p2 * (b1 + b));
  r.proof_form = std::max(L * b1 + dd * p2 * std::max(b1, max_e2) * L * L,
                          (dd * dd + 1) * 2 * p2 * p2 * (b1 + b));
  return r;
}

struct Push {
  Configuration x, o;
  IntVector o_delta, d_delta, t_delta;
  Elimination elimination;        // on cΔ = dΔ + oΔ
  Production production;          // target e2Δ = eΔ + tΔ, second copy of x as buffer
  TransitionSequence full;        // from 2x + dΔ
  Configuration executed;
  /// 2oΓ + D1~·oΔ + D2~·dΔ − C3~·tΔ + tΔ
  IntVector predicted;
  /// The closed form as printed for the lemma, without the −C3~·tΔ term.
  IntVector predicted_printed;
  B2Diagnostics b2;
  std::vector<std::string> warnings;

  bool matches() const { return signed_counts(executed) == predicted; }
};

/// 2x + dΔ => final with final↾Δ = tΔ: produce e2Δ from one copy of x using
/// the other as buffer, replay the host on the buffer copy, then eliminate
/// dΔ + oΔ with the produced e.
inline Push push_delta(const Protocol& p, const DeltaOrdering& ord, const SurgeryMatrices& m,
                       const TransitionSequence& host, const IntVector& d_delta, const IntVector& t_delta,
                       std::int64_t b1, std::int64_t b = 0) {
  const std::size_t d = ord.size();
  const std::size_t L = p.num_states();
  if (d_delta.size() != d || t_delta.size() != d)
    throw DimensionMismatch("dΔ and tΔ must have one entry per Δ state");
  Push r;
  r.x = host.origin;
  r.o = execute_path(p, host);
  r.o_delta = restrict_to(r.o, ord.delta);
  r.d_delta = d_delta;
  r.t_delta = t_delta;

  r.elimination = eliminate_delta(p, ord, m, r.o_delta + d_delta);
  IntVector e_delta = restrict_to(r.elimination.e, ord.delta);
  IntVector e2 = e_delta + t_delta;
  r.b2 = b2_diagnostics(L, d, double(b1), double(b), double(max_entry(e2)));

  bool buffer_short = false;
  try {
    r.production = produce_e(p, ord, m, host, e2, b1, r.x);
  } catch (const EditFailure& err) {
    std::int64_t need = std::int64_t(d << (d + 1)) * std::max(b1, max_entry(e2));
    for (Count k : r.x.counts())
      if (std::int64_t(k) < need) buffer_short = true;
    if (buffer_short) throw BufferTooSmall(std::string("x is too small to serve as buffer: ") + err.what());
    throw;
  }
  r.warnings = r.production.warnings;

  r.full.origin = r.x.scaled(2) + to_configuration(embed(L, ord.delta, d_delta));
  r.full.steps = r.production.edited.steps;
  r.full.steps.insert(r.full.steps.end(), host.steps.begin(), host.steps.end());
  r.full.steps.insert(r.full.steps.end(), r.elimination.path.steps.begin(),
                      r.elimination.path.steps.end());
  PathValidity v = verify_path_validity(p, r.full);
  if (!v.valid)
    throw EditFailure(v, "composed path invalid at step " + std::to_string(v.index) + " (" +
                             p.rule_string(r.full.steps[v.index]) + ", short of " + p.name(v.state) + ")");
  r.executed = execute_path(p, r.full);

  IntVector o_gamma = restrict_to(r.o, m.gamma);
  IntVector twice(o_gamma.size());
  for (std::size_t i = 0; i < twice.size(); ++i) twice[i] = 2 * o_gamma[i];
  IntVector gamma_part = twice + m.D1t.apply(r.o_delta) + m.D2t.apply(d_delta);
  r.predicted_printed = embed(L, m.gamma, gamma_part) + embed(L, ord.delta, t_delta);
  r.predicted = embed(L, m.gamma, gamma_part - m.C3t.apply(t_delta)) + embed(L, ord.delta, t_delta);
  return r;
}

// ---------------------------------------------------------------------------
// JSON traces

namespace detail {

inline nlohmann::json names_of(const Protocol& p, const std::vector<StateIndex>& states) {
  auto j = nlohmann::json::array();
  for (StateIndex s : states) j.push_back(p.name(s));
  return j;
}

inline nlohmann::json counts_json(const Protocol& p, const Configuration& c) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t s = 0; s < c.size(); ++s)
    if (c[StateIndex(s)]) j[p.name(StateIndex(s))] = c[StateIndex(s)];
  return j;
}

inline nlohmann::json counts_json(const Protocol& p, const IntVector& v) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t s = 0; s < v.size(); ++s)
    if (v[s]) j[p.name(StateIndex(s))] = v[s];
  return j;
}

inline nlohmann::json rule_list(const Protocol& p, const std::vector<std::size_t>& steps) {
  auto j = nlohmann::json::array();
  for (auto k : steps) j.push_back(p.rule_string(k));
  return j;
}

}  // namespace detail

inline nlohmann::json to_json(const Protocol& p, const DeltaOrdering& ord) {
  auto rules = nlohmann::json::array();
  for (auto k : ord.rules) rules.push_back(p.rule_string(k));
  return {{"delta", detail::names_of(p, ord.delta)}, {"rules", rules}};
}

inline nlohmann::json to_json(const Protocol& p, const SurgeryMatrices& m) {
  auto bounds = nlohmann::json::array();
  for (const auto& b : matrix_bounds(m))
    bounds.push_back({{"name", b.name}, {"value", b.value}, {"bound", b.bound}, {"strict", b.strict},
                      {"holds", b.holds()}});
  return {{"delta", detail::names_of(p, m.delta)},
          {"gamma", detail::names_of(p, m.gamma)},
          {"T1", m.T1.to_json()},
          {"T", m.T.to_json()},
          {"S", m.S.to_json()},
          {"G", m.G.to_json()},
          {"C1", m.C1.to_json()},
          {"C2", m.C2.to_json()},
          {"T1_tilde", m.T1t.to_json()},
          {"T_tilde", m.Tt.to_json()},
          {"G_tilde", m.Gt.to_json()},
          {"C3_tilde", m.C3t.to_json()},
          {"C4_tilde", m.C4t.to_json()},
          {"D1_tilde", m.D1t.to_json()},
          {"D2_tilde", m.D2t.to_json()},
          {"bounds", bounds}};
}

inline nlohmann::json to_json(const Protocol& p, const Elimination& el) {
  return {{"c_delta", el.c_delta},
          {"transition_counts", el.counts},
          {"rounds", el.rounds},
          {"e", detail::counts_json(p, el.e)},
          {"z_predicted", detail::counts_json(p, el.z)},
          {"z_executed", detail::counts_json(p, el.executed)},
          {"path_length", el.path.steps.size()},
          {"matches", el.executed == el.z}};
}

inline nlohmann::json to_json(const Protocol& p, const DeltaOrdering& ord, const Production& pr) {
  auto edits = nlohmann::json::array();
  for (std::size_t i = 0; i < ord.size(); ++i)
    if (pr.t_tilde[i] != 0) edits.push_back({{"rule", p.rule_string(ord.rules[i])}, {"change", pr.t_tilde[i]}});
  return {{"o_delta", pr.o_delta},
          {"e_delta", pr.e_delta},
          {"c_tilde", pr.c_tilde},
          {"t_tilde", pr.t_tilde},
          {"edits", edits},
          {"removed_positions", pr.removed_positions},
          {"buffer", detail::counts_json(p, pr.buffer)},
          {"lemma_buffer_entry", pr.lemma_buffer_entry},
          {"lemma_b2", pr.lemma_b2},
          {"predicted", detail::counts_json(p, pr.predicted)},
          {"executed", detail::counts_json(p, pr.executed)},
          {"matches", signed_counts(pr.executed) == pr.predicted},
          {"warnings", pr.warnings}};
}

inline nlohmann::json to_json(const Protocol& p, const DeltaOrdering& ord, const Push& r) {
  return {{"x", detail::counts_json(p, r.x)},
          {"o", detail::counts_json(p, r.o)},
          {"d_delta", r.d_delta},
          {"t_delta", r.t_delta},
          {"elimination", to_json(p, r.elimination)},
          {"production", to_json(p, ord, r.production)},
          {"path_length", r.full.steps.size()},
          {"predicted", detail::counts_json(p, r.predicted)},
          {"predicted_printed_form", detail::counts_json(p, r.predicted_printed)},
          {"executed", detail::counts_json(p, r.executed)},
          {"matches", r.matches()},
          {"b2_statement_form", r.b2.statement_form},
          {"b2_proof_form", r.b2.proof_form},
          {"warnings", r.warnings}};
}

}  // namespace popproto
