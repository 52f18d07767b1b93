#pragma once

#include "cn/math.hpp"

namespace cn {

// Evaluation grid for numeric CDF inversion, in standardized outcome units.
struct InversionGrid {
  double lo = -1.0;
  double hi = 1.0;
  int points = 1024;

  Vector values() const;
  double cell_width() const { return (hi - lo) / (points - 1); }
};

struct GridQuantile {
  double value = 0.0;
  // Set when the level never crosses the curve on the grid; the nearer grid
  // endpoint is returned in that case.
  bool saturated = false;
};

// Infimum upward crossing of `level` on the tabulated curve, refined by
// linear interpolation inside the bracketing cell. The curve need not be
// monotone; the result is still nondecreasing in `level`, which keeps
// derived intervals nested.
GridQuantile invert_on_grid(const Vector& grid, const Vector& curve, double level);

// Monotone rectification by running maximum.
Vector running_max(const Vector& v);

// Level of z on a piecewise-linear curve through (z_at_level[i], levels[i]).
// z_at_level must be nondecreasing (rectify first); z outside the curve's
// span returns the end level. Exact on the knots.
double level_at(const Vector& z_at_level, const Vector& levels, double z);

}  // namespace cn
