#include "cn/math.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "cn/errors.hpp"

namespace cn {

double binary_cross_entropy(double b, double p) {
  return -b * std::log(p) - (1.0 - b) * std::log(1.0 - p);
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

double clamp_probability(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

double logit(double p) {
  p = clamp_probability(p);
  return std::log(p / (1.0 - p));
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

namespace {

// Acklam's rational approximation to the probit function.
double probit_estimate(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - lo) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("normal_quantile: probability must lie strictly inside (0,1)");
  }
  double x = probit_estimate(p);
  // One Halley step against the exact CDF removes the approximation bias.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

double bivariate_normal_cdf(double h, double k, double rho) {
  if (!(rho > -1.0 && rho < 1.0)) {
    throw ConfigError("bivariate_normal_cdf: correlation must lie strictly inside (-1,1)");
  }
  if (rho == 0.0) {
    return normal_cdf(h) * normal_cdf(k);
  }
  // Phi2(h,k;rho) = Phi(h)Phi(k) + 1/(2*pi) * Int_0^rho exp(-(h^2+k^2-2hkr)/(2(1-r^2))) / sqrt(1-r^2) dr
  // integrated with 24-point Gauss-Legendre, which is accurate to ~1e-14 here.
  static constexpr double nodes[] = {
      0.0640568928626056, 0.1911188674736163, 0.3150426796961634, 0.4337935076260451,
      0.5454214713888396, 0.6480936519369755, 0.7401241915785544, 0.8200019859739029,
      0.8864155270044011, 0.9382745520027328, 0.9747285559713095, 0.9951872199970213};
  static constexpr double weights[] = {
      0.1279381953467522, 0.1258374563468283, 0.1216704729278034, 0.1155056680537256,
      0.1074442701159656, 0.0976186521041139, 0.0861901615319533, 0.0733464814110803,
      0.0592985849154368, 0.0442774388174198, 0.0285313886289337, 0.0123412297999872};
  const double half = rho / 2.0;
  double acc = 0.0;
  for (int i = 0; i < 12; ++i) {
    for (const double sign : {-1.0, 1.0}) {
      const double r = half + sign * half * nodes[i];
      const double omr2 = 1.0 - r * r;
      acc += weights[i] * std::exp(-(h * h + k * k - 2.0 * h * k * r) / (2.0 * omr2)) /
             std::sqrt(omr2);
    }
  }
  acc *= half / (2.0 * M_PI);
  const double value = normal_cdf(h) * normal_cdf(k) + acc;
  return std::clamp(value, 0.0, 1.0);
}

double weibull_cdf(double z, double lambda, double k) {
  if (lambda <= 0.0 || k <= 0.0) {
    throw ConfigError("weibull_cdf: scale and shape must be positive");
  }
  if (z <= 0.0) {
    return 0.0;
  }
  return 1.0 - std::exp(-std::pow(z / lambda, k));
}

double weibull_quantile(double q, double lambda, double k) {
  if (lambda <= 0.0 || k <= 0.0) {
    throw ConfigError("weibull_quantile: scale and shape must be positive");
  }
  if (!(q > 0.0 && q < 1.0)) {
    throw ConfigError("weibull_quantile: probability must lie strictly inside (0,1)");
  }
  return lambda * std::pow(-std::log1p(-q), 1.0 / k);
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace cn
