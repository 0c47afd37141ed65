#pragma once

// Least-squares fits for scaling experiments.

#include <cmath>
#include <vector>

#include <boost/math/statistics/linear_regression.hpp>

#include "popproto/errors.hpp"

namespace popproto {

struct LinearFit {
  double intercept = 0, slope = 0, r_squared = 0;
};

/// y ≈ intercept + slope * x.
inline LinearFit fit_linear(std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("x and y differ in length");
  if (x.size() < 3) throw DomainError("need at least three points for a fit");
  auto [c0, c1, r2] = boost::math::statistics::simple_ordinary_least_squares_with_R_squared(x, y);
  return {c0, c1, r2};
}

/// y ≈ intercept + slope * ln(n).
inline LinearFit fit_log(const std::vector<double>& n, const std::vector<double>& y) {
  std::vector<double> ln;
  for (double v : n) ln.push_back(std::log(v));
  return fit_linear(std::move(ln), y);
}

}  // namespace popproto
