#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

namespace cn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Probability floor used whenever a CDF value is consumed as a probability.
// Keeps logs and logits finite without visibly distorting interior values.
inline constexpr double kProbFloor = 1e-6;

// Bernoulli cross entropy of probability p against indicator b, elementwise.
// p must already be clamped away from {0,1}.
double binary_cross_entropy(double b, double p);

// sigma(x) = 1 / (1 + exp(-x)), numerically stable for large |x|.
double sigmoid(double x);
Matrix sigmoid(const Matrix& x);

// Inverse of sigmoid. Arguments are clamped to [kProbFloor, 1-kProbFloor].
double logit(double p);

double clamp_probability(double p);

// Standard normal CDF.
double normal_cdf(double z);

// Inverse standard normal CDF via rational approximation plus one Halley
// refinement; accurate to ~1e-15 on (0,1). Out-of-range input throws.
double normal_quantile(double p);

// P(Z1 <= h, Z2 <= k) for standard bivariate normal with correlation rho,
// evaluated by Gauss-Legendre quadrature of the Drezner-Wesolowsky form.
double bivariate_normal_cdf(double h, double k, double rho);

// Weibull(scale lambda, shape k) distribution functions. z < 0 has mass zero.
double weibull_cdf(double z, double lambda, double k);
double weibull_quantile(double q, double lambda, double k);

// FNV-1a over raw bytes; used for parameter fingerprints in tests and for
// deriving per-query seeds from feature vectors.
std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t seed = 14695981039346656037ull);

}  // namespace cn
