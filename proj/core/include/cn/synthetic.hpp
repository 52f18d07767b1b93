#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cn/dataset.hpp"
#include "cn/distribution.hpp"
#include "cn/model.hpp"
#include "cn/rng.hpp"

namespace cn {

// Data-generating families with analytic ground truth. Features carry the
// generating parameters, so every oracle below reads its law directly off
// the feature vector and needs no fitted state.
enum class Family {
  // One feature x on an equally spaced grid over [-0.5, 0.5];
  // Y ~ N(sin(4 pi x), (0.5 + 0.3 sin(4 pi x))^2).
  sine1d,
  // x = [mu, sigma], mu ~ N(0, variance 4), sigma ~ U(0.5, 2.5); Y ~ N(mu, sigma^2).
  hetero_gaussian,
  // x = [lambda, k], lambda ~ U(0.5, 2), k ~ U(1, 5); Y ~ Weibull(lambda, k).
  weibull,
  // x = [mu1, mu2, s1, s2], mu ~ N(0, variance 2), s ~ U(1, 2); (Y1, Y2)
  // bivariate normal with correlation 0.5. Two outcome columns.
  bivariate_gaussian,
  // x = [kappa1, kappa2] ~ U(0.5, 2)^2; psi_j ~ von Mises(0, kappa_j);
  // Y = midpoint of the two unit-circle points. Two outcome columns.
  von_mises_circular,
};

Family family_from_name(const std::string& name);
const char* family_name(Family family);
Eigen::Index default_n(Family family);
Eigen::Index outcome_width(Family family);

struct SyntheticSpec {
  Family family = Family::hetero_gaussian;
  Eigen::Index n = 0;  // 0 selects the family default
  std::uint64_t seed = 0;
};

struct GeneratedData {
  Matrix features;  // original units
  Matrix outcomes;
};

GeneratedData gen_sine1d(Eigen::Index n, std::uint64_t seed);
GeneratedData gen_hetero_gaussian(Eigen::Index n, std::uint64_t seed);
GeneratedData gen_weibull(Eigen::Index n, std::uint64_t seed);
GeneratedData gen_bivariate_gaussian(Eigen::Index n, std::uint64_t seed);
GeneratedData gen_von_mises_circular(Eigen::Index n, std::uint64_t seed);
GeneratedData generate(const SyntheticSpec& spec);

// Analytic conditional law read off the feature vector. cdf and quantile
// are exact inverses; median and optimal_interval come with the base class.
class OracleDistribution : public ConditionalDistribution {
public:
  using Fn = std::function<double(double, const Vector&)>;

  OracleDistribution(Fn cdf, Fn quantile) : cdf_(std::move(cdf)), quantile_(std::move(quantile)) {}

  double cdf(double z, const Vector& x) const override { return cdf_(z, x); }
  double quantile(double q, const Vector& x) const override { return quantile_(q, x); }

private:
  Fn cdf_;
  Fn quantile_;
};

// Ground truth for the scalar-outcome families (and the chain links of the
// bivariate family via the link oracles below). Throws for families without
// a closed-form conditional law.
OracleDistribution scalar_oracle(Family family);

// Y1 | x and Y2 | (x, y1) of the bivariate family; the link-2 oracle expects
// the feature vector [x, y1].
OracleDistribution bivariate_link1_oracle();
OracleDistribution bivariate_link2_oracle();

// One outcome draw at a fixed feature vector, scalar families only.
double sample_outcome(Family family, const Vector& x_raw, RandomStream& rng);

// von Mises(0, kappa) draw by Best-Fisher rejection; throws after 10^4
// rejected proposals (cannot happen for kappa in the supported range).
double von_mises_sample(double kappa, RandomStream& rng);

// Joint law of a two-outcome family at one feature vector.
class JointOracle {
public:
  virtual ~JointOracle() = default;
  virtual double joint_cdf(double z1, double z2, const Vector& x) const = 0;
};

std::unique_ptr<JointOracle> bivariate_joint_oracle();
// Monte-Carlo approximation with `draws` cached samples per distinct x.
std::unique_ptr<JointOracle> von_mises_joint_oracle(Eigen::Index draws = 1000000);

// Named, checkpoint-reconstructible quantile oracle for oracle-f training.
FixedF oracle_fixed_f(Family family);
// Reattaches the quantile function of a loaded oracle fixed f by its name.
void rebind_oracle(TrainedCnModel& model);

// Goodness-of-fit versus training-set size, one row per (n, variant) cell.
// Each n gets fresh train/test draws shared by every variant; gof is scored
// on the from-g view against bins from that cell's training outcomes.
struct ConvergenceCell {
  Eigen::Index n = 0;
  Variant variant = Variant::cn_full;
  double gof = 0.0;
};

std::vector<ConvergenceCell> gof_vs_n_study(Family family,
                                            const std::vector<Eigen::Index>& n_grid,
                                            const std::vector<Variant>& variants,
                                            const TrainingConfig& base_cfg,
                                            Eigen::Index n_test, std::uint64_t seed);

}  // namespace cn
