#pragma once

// Semilinear sets, α-density, linear-function classification, and finite
// window checks for eventual affineness / constancy. All arithmetic exact.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/rational.hpp>

#include "json.hpp"
#include "popproto/core.hpp"

namespace popproto {

using Rational = boost::rational<std::int64_t>;
using Vec = std::vector<std::int64_t>;

// ---------------------------------------------------------------------------
// Periodic cosets

/// {base + n1*p1 + ... + nl*pl | ni in N}.
struct PeriodicCoset {
  Vec base;
  std::vector<Vec> periods;

  PeriodicCoset() = default;
  PeriodicCoset(Vec b, std::vector<Vec> ps) : base(std::move(b)), periods(std::move(ps)) {
    for (auto x : base)
      if (x < 0) throw DomainError("coset base must be nonnegative");
    for (const auto& p : periods) {
      if (p.size() != base.size()) throw DimensionMismatch("period dimension differs from base");
      for (auto x : p)
        if (x < 0) throw DomainError("coset periods must be nonnegative");
    }
  }
  std::size_t dim() const { return base.size(); }
};

namespace detail {

inline bool coset_search(const std::vector<const Vec*>& periods, std::size_t i, Vec& rest) {
  if (std::all_of(rest.begin(), rest.end(), [](std::int64_t x) { return x == 0; })) return true;
  if (i == periods.size()) return false;
  // Any positive coordinate left must be reachable by a remaining period.
  for (std::size_t j = 0; j < rest.size(); ++j) {
    if (rest[j] == 0) continue;
    bool covered = false;
    for (std::size_t k = i; k < periods.size() && !covered; ++k) covered = (*periods[k])[j] > 0;
    if (!covered) return false;
  }
  const Vec& p = *periods[i];
  std::int64_t bound = INT64_MAX;
  for (std::size_t j = 0; j < p.size(); ++j)
    if (p[j] > 0) bound = std::min(bound, rest[j] / p[j]);
  for (std::int64_t n = bound; n >= 0; --n) {
    for (std::size_t j = 0; j < p.size(); ++j) rest[j] -= n * p[j];
    bool ok = coset_search(periods, i + 1, rest);
    for (std::size_t j = 0; j < p.size(); ++j) rest[j] += n * p[j];
    if (ok) return true;
  }
  return false;
}

inline std::int64_t l1(const Vec& v) { return std::accumulate(v.begin(), v.end(), std::int64_t(0)); }

}  // namespace detail

/// Exact membership by depth-first search over period multiplicities, periods
/// taken by decreasing L1 norm, each multiplicity capped by the componentwise
/// quotient of what is left.
inline bool coset_member(const PeriodicCoset& P, const Vec& v) {
  if (v.size() != P.dim()) throw DimensionMismatch("vector dimension differs from coset");
  Vec rest(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    rest[j] = v[j] - P.base[j];
    if (rest[j] < 0) return false;
  }
  std::vector<const Vec*> periods;
  for (const auto& p : P.periods)
    if (detail::l1(p) > 0) periods.push_back(&p);
  std::stable_sort(periods.begin(), periods.end(),
                   [](const Vec* a, const Vec* b) { return detail::l1(*a) > detail::l1(*b); });
  return detail::coset_search(periods, 0, rest);
}

/// Finite union of periodic cosets of a common dimension.
struct SemilinearSet {
  std::vector<PeriodicCoset> cosets;
};

inline bool semilinear_member(const SemilinearSet& S, const Vec& v) {
  for (const auto& P : S.cosets) {
    if (P.dim() != S.cosets.front().dim()) throw DimensionMismatch("cosets of different dimension");
    if (coset_member(P, v)) return true;
  }
  return false;
}

inline nlohmann::json to_json(const SemilinearSet& S) {
  auto j = nlohmann::json::array();
  for (const auto& P : S.cosets) j.push_back({{"base", P.base}, {"periods", P.periods}});
  return j;
}

inline SemilinearSet semilinear_from_json(const nlohmann::json& j) {
  SemilinearSet S;
  for (const auto& c : j) S.cosets.emplace_back(c.at("base").get<Vec>(), c.at("periods").get<std::vector<Vec>>());
  return S;
}

// ---------------------------------------------------------------------------
// Density

/// Every positive coordinate is at least alpha times the total.
inline bool is_alpha_dense(const std::vector<Count>& c, Rational alpha) {
  if (alpha <= 0 || alpha > 1) throw DomainError("alpha must lie in (0, 1]");
  unsigned __int128 total = 0;
  for (Count x : c) total += x;
  for (Count x : c) {
    if (x == 0) continue;
    // x >= (num/den) * total  <=>  x * den >= num * total
    if ((unsigned __int128)x * std::uint64_t(alpha.denominator()) <
        (unsigned __int128)std::uint64_t(alpha.numerator()) * total)
      return false;
  }
  return true;
}

inline bool is_alpha_dense(const Configuration& c, Rational alpha) {
  return is_alpha_dense(std::vector<Count>(c.counts().begin(), c.counts().end()), alpha);
}

// ---------------------------------------------------------------------------
// Linear functions

/// f(m) = sum_i floor(c_i * m(i)), floor taken toward zero.
struct LinearSpec {
  std::vector<Rational> coefficients;

  std::int64_t evaluate(const std::vector<std::int64_t>& m) const {
    if (m.size() != coefficients.size()) throw DimensionMismatch("input dimension differs from spec");
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Rational& c = coefficients[i];
      sum += c.numerator() * m[i] / c.denominator();  // C++ division truncates toward zero
    }
    return sum;
  }
};

/// Parses "4,1,2" or "2/3,1/2" into a spec.
inline LinearSpec parse_linear_spec(const std::string& text) {
  LinearSpec spec;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    std::string tok = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    auto slash = tok.find('/');
    try {
      std::size_t used = 0;
      std::int64_t num = std::stoll(tok.substr(0, slash), &used);
      if (used != (slash == std::string::npos ? tok.size() : slash)) throw std::invalid_argument(tok);
      std::int64_t den = 1;
      if (slash != std::string::npos) {
        std::string d = tok.substr(slash + 1);
        den = std::stoll(d, &used);
        if (used != d.size()) throw std::invalid_argument(tok);
      }
      if (den == 0) throw DomainError("zero denominator in '" + tok + "'");
      spec.coefficients.emplace_back(num, den);
    } catch (const std::logic_error&) {
      throw DomainError("bad coefficient '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return spec;
}

enum class LinearKind { NLinear, QNonnegLinear, HasNegative, NonIntegerOnly };

inline const char* to_string(LinearKind k) {
  switch (k) {
    case LinearKind::NLinear: return "N-linear";
    case LinearKind::QNonnegLinear: return "Q>=0-linear";
    case LinearKind::HasNegative: return "has-negative";
    case LinearKind::NonIntegerOnly: return "non-integer-only";
  }
  return "?";
}

struct LinearClass {
  LinearKind kind;
  bool integer;      // every coefficient is an integer
  bool nonnegative;  // every coefficient is >= 0
};

/// NonIntegerOnly is never returned on its own: a nonnegative spec with a
/// non-integer coefficient is QNonnegLinear with integer = false.
inline LinearClass classify_linear(const LinearSpec& spec) {
  bool integer = true, nonneg = true;
  for (const auto& c : spec.coefficients) {
    integer = integer && c.denominator() == 1;
    nonneg = nonneg && c >= 0;
  }
  LinearKind kind = !nonneg ? LinearKind::HasNegative : integer ? LinearKind::NLinear : LinearKind::QNonnegLinear;
  return {kind, integer, nonneg};
}

// ---------------------------------------------------------------------------
// Window checks

using IntOracle = std::function<std::int64_t(const Vec&)>;
using BitOracle = std::function<bool(const Vec&)>;

/// Evidence over [n0, n0+W]^k only.
struct AffineFit {
  std::int64_t b = 0;
  Vec c;
  bool natural_coefficients = true;  // all c_i >= 0
  std::int64_t n0 = 0, window = 0;
};

struct AffineCounterexample {
  Vec m;
  Vec v;  // empty when the second differences held but the fit did not
  std::int64_t n0 = 0, window = 0;
};

using AffineResult = std::variant<AffineFit, AffineCounterexample>;

namespace detail {

/// Calls fn on every point of [lo, lo+W]^k in lexicographic order until it
/// returns false.
inline void for_each_point(std::size_t k, std::int64_t lo, std::int64_t W,
                           const std::function<bool(const Vec&)>& fn) {
  Vec m(k, lo);
  for (;;) {
    if (!fn(m)) return;
    std::size_t i = k;
    while (i > 0) {
      --i;
      if (m[i] < lo + W) {
        ++m[i];
        break;
      }
      m[i] = lo;
      if (i == 0) return;
    }
    if (k == 0) return;
  }
}

}  // namespace detail

/// Tests f(m+v) − f(m) = f(m+2v) − f(m+v) for m in the window and nonzero
/// v in {0,1}^k, then fits b + sum c_i m_i from the corner and checks the fit
/// on the whole window.
inline AffineResult check_eventually_affine_window(const IntOracle& f, std::size_t k, std::int64_t n0,
                                                   std::int64_t W) {
  if (W < 1) throw DomainError("window must be at least 1");
  if (k < 1 || k > 4) throw DomainError("window checks support 1 to 4 inputs");
  std::optional<AffineCounterexample> bad;
  detail::for_each_point(k, n0, W, [&](const Vec& m) {
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
      Vec v(k), m1 = m, m2 = m;
      for (std::size_t i = 0; i < k; ++i) {
        v[i] = (mask >> i) & 1;
        m1[i] += v[i];
        m2[i] += 2 * v[i];
      }
      if (f(m1) - f(m) != f(m2) - f(m1)) {
        bad = AffineCounterexample{m, v, n0, W};
        return false;
      }
    }
    return true;
  });
  if (bad) return *bad;

  AffineFit fit;
  fit.n0 = n0;
  fit.window = W;
  Vec corner(k, n0);
  std::int64_t f0 = f(corner);
  fit.b = f0;
  for (std::size_t i = 0; i < k; ++i) {
    Vec u = corner;
    ++u[i];
    fit.c.push_back(f(u) - f0);
    fit.b -= fit.c.back() * n0;
    fit.natural_coefficients = fit.natural_coefficients && fit.c.back() >= 0;
  }
  detail::for_each_point(k, n0, W, [&](const Vec& m) {
    std::int64_t want = fit.b;
    for (std::size_t i = 0; i < k; ++i) want += fit.c[i] * m[i];
    if (f(m) != want) {
      bad = AffineCounterexample{m, {}, n0, W};
      return false;
    }
    return true;
  });
  if (bad) return *bad;
  return fit;
}

struct ConstantOnWindow {
  bool value;
  std::int64_t m0 = 0, window = 0;
};

struct ConstantCounterexample {
  Vec m, m_prime;
  std::int64_t m0 = 0, window = 0;
};

using ConstantResult = std::variant<ConstantOnWindow, ConstantCounterexample>;

/// Evaluates phi on [m0, m0+W]^k in lexicographic order; reports the first
/// point against the first point disagreeing with it.
inline ConstantResult check_eventually_constant_window(const BitOracle& phi, std::size_t k, std::int64_t m0,
                                                       std::int64_t W) {
  if (W < 1) throw DomainError("window must be at least 1");
  if (k < 1) throw DomainError("need at least one input");
  Vec first(k, m0);
  bool ref = phi(first);
  std::optional<Vec> other;
  detail::for_each_point(k, m0, W, [&](const Vec& m) {
    if (phi(m) != ref) {
      other = m;
      return false;
    }
    return true;
  });
  if (other) return ConstantCounterexample{first, *other, m0, W};
  return ConstantOnWindow{ref, m0, W};
}

}  // namespace popproto
