#pragma once

#include "cn/math.hpp"

namespace cn {

// Central interval at a nominal coverage level. `rectified` records that the
// produced bounds violated monotonicity and were swapped.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool rectified = false;

  bool covers(double y) const { return lower <= y && y <= upper; }
  double width() const { return upper - lower; }
};

// A conditional law of a scalar outcome given a feature vector, the common
// face of trained models and analytic references. Quantities are in original
// (unstandardized) units. The batched entry points exist because grid-backed
// implementations answer many levels for one x far cheaper than one at a
// time; the defaults just loop.
class ConditionalDistribution {
public:
  virtual ~ConditionalDistribution() = default;

  virtual double cdf(double z, const Vector& x) const = 0;
  virtual double quantile(double q, const Vector& x) const = 0;

  virtual Vector quantiles(const Vector& qs, const Vector& x) const;
  virtual Vector cdfs(const Vector& zs, const Vector& x) const;

  double median(const Vector& x) const { return quantile(0.5, x); }

  // Equal-tail interval: quantiles at (1-nominal)/2 and 1-(1-nominal)/2.
  Interval interval(double nominal, const Vector& x) const;
};

}  // namespace cn
