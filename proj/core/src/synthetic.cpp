#include "cn/synthetic.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "cn/errors.hpp"
#include "cn/metrics.hpp"

namespace cn {

namespace {

constexpr double kBivariateRho = 0.5;

double sine_mean(double x) { return std::sin(4.0 * M_PI * x); }
double sine_sd(double x) { return 0.5 + 0.3 * std::sin(4.0 * M_PI * x); }

void require_n(Eigen::Index n) {
  if (n < 2) {
    throw ConfigError("generator: need at least two samples");
  }
}

}  // namespace

Family family_from_name(const std::string& name) {
  if (name == "sine1d") return Family::sine1d;
  if (name == "hetero_gaussian") return Family::hetero_gaussian;
  if (name == "weibull") return Family::weibull;
  if (name == "bivariate_gaussian") return Family::bivariate_gaussian;
  if (name == "von_mises_circular") return Family::von_mises_circular;
  throw ConfigError("unknown family '" + name + "'");
}

const char* family_name(Family family) {
  switch (family) {
    case Family::sine1d: return "sine1d";
    case Family::hetero_gaussian: return "hetero_gaussian";
    case Family::weibull: return "weibull";
    case Family::bivariate_gaussian: return "bivariate_gaussian";
    case Family::von_mises_circular: return "von_mises_circular";
  }
  throw ConfigError("unknown family");
}

Eigen::Index default_n(Family family) {
  switch (family) {
    case Family::sine1d: return 100;
    case Family::hetero_gaussian: return 1000;
    case Family::weibull: return 1000;
    case Family::bivariate_gaussian: return 2000;
    case Family::von_mises_circular: return 5000;
  }
  return 1000;
}

Eigen::Index outcome_width(Family family) {
  switch (family) {
    case Family::bivariate_gaussian:
    case Family::von_mises_circular:
      return 2;
    default:
      return 1;
  }
}

GeneratedData gen_sine1d(Eigen::Index n, std::uint64_t seed) {
  require_n(n);
  RandomStream rng(seed);
  GeneratedData data;
  data.features.resize(n, 1);
  data.outcomes.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = -0.5 + static_cast<double>(i) / static_cast<double>(n - 1);
    data.features(i, 0) = x;
    data.outcomes(i, 0) = rng.normal(sine_mean(x), sine_sd(x));
  }
  return data;
}

GeneratedData gen_hetero_gaussian(Eigen::Index n, std::uint64_t seed) {
  require_n(n);
  RandomStream rng(seed);
  GeneratedData data;
  data.features.resize(n, 2);
  data.outcomes.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = rng.normal(0.0, 2.0);
    const double sigma = rng.uniform(0.5, 2.5);
    data.features(i, 0) = mu;
    data.features(i, 1) = sigma;
    data.outcomes(i, 0) = rng.normal(mu, sigma);
  }
  return data;
}

GeneratedData gen_weibull(Eigen::Index n, std::uint64_t seed) {
  require_n(n);
  RandomStream rng(seed);
  GeneratedData data;
  data.features.resize(n, 2);
  data.outcomes.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lambda = rng.uniform(0.5, 2.0);
    const double k = rng.uniform(1.0, 5.0);
    data.features(i, 0) = lambda;
    data.features(i, 1) = k;
    // Inverse transform keeps the draw exactly on the analytic quantile path.
    data.outcomes(i, 0) = weibull_quantile(rng.uniform(), lambda, k);
  }
  return data;
}

GeneratedData gen_bivariate_gaussian(Eigen::Index n, std::uint64_t seed) {
  require_n(n);
  RandomStream rng(seed);
  GeneratedData data;
  data.features.resize(n, 4);
  data.outcomes.resize(n, 2);
  const double rho = kBivariateRho;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu1 = rng.normal(0.0, std::sqrt(2.0));
    const double mu2 = rng.normal(0.0, std::sqrt(2.0));
    const double s1 = rng.uniform(1.0, 2.0);
    const double s2 = rng.uniform(1.0, 2.0);
    const double e1 = rng.normal();
    const double e2 = rng.normal();
    data.features(i, 0) = mu1;
    data.features(i, 1) = mu2;
    data.features(i, 2) = s1;
    data.features(i, 3) = s2;
    data.outcomes(i, 0) = mu1 + s1 * e1;
    data.outcomes(i, 1) = mu2 + s2 * (rho * e1 + std::sqrt(1.0 - rho * rho) * e2);
  }
  return data;
}

double von_mises_sample(double kappa, RandomStream& rng) {
  if (!(kappa > 0.0)) {
    throw ConfigError("von mises: concentration must be positive");
  }
  // Best & Fisher wrapped-Cauchy envelope.
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double u1 = rng.uniform();
    const double zc = std::cos(M_PI * u1);
    const double fc = (1.0 + r * zc) / (r + zc);
    const double c = kappa * (r - fc);
    const double u2 = rng.uniform();
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double u3 = rng.uniform();
      const double angle = std::acos(fc);
      return u3 < 0.5 ? -angle : angle;
    }
  }
  throw NumericError("von mises: rejection sampler exceeded its proposal budget");
}

GeneratedData gen_von_mises_circular(Eigen::Index n, std::uint64_t seed) {
  require_n(n);
  RandomStream rng(seed);
  GeneratedData data;
  data.features.resize(n, 2);
  data.outcomes.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double kappa1 = rng.uniform(0.5, 2.0);
    const double kappa2 = rng.uniform(0.5, 2.0);
    const double psi1 = von_mises_sample(kappa1, rng);
    const double psi2 = von_mises_sample(kappa2, rng);
    data.features(i, 0) = kappa1;
    data.features(i, 1) = kappa2;
    data.outcomes(i, 0) = (std::cos(psi1) + std::cos(psi2)) / 2.0;
    data.outcomes(i, 1) = (std::sin(psi1) + std::sin(psi2)) / 2.0;
  }
  return data;
}

GeneratedData generate(const SyntheticSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : default_n(spec.family);
  switch (spec.family) {
    case Family::sine1d: return gen_sine1d(n, spec.seed);
    case Family::hetero_gaussian: return gen_hetero_gaussian(n, spec.seed);
    case Family::weibull: return gen_weibull(n, spec.seed);
    case Family::bivariate_gaussian: return gen_bivariate_gaussian(n, spec.seed);
    case Family::von_mises_circular: return gen_von_mises_circular(n, spec.seed);
  }
  throw ConfigError("unknown family");
}

OracleDistribution scalar_oracle(Family family) {
  switch (family) {
    case Family::sine1d:
      return OracleDistribution(
          [](double z, const Vector& x) {
            return normal_cdf((z - sine_mean(x(0))) / sine_sd(x(0)));
          },
          [](double q, const Vector& x) {
            return sine_mean(x(0)) + sine_sd(x(0)) * normal_quantile(q);
          });
    case Family::hetero_gaussian:
      return OracleDistribution(
          [](double z, const Vector& x) { return normal_cdf((z - x(0)) / x(1)); },
          [](double q, const Vector& x) { return x(0) + x(1) * normal_quantile(q); });
    case Family::weibull:
      return OracleDistribution(
          [](double z, const Vector& x) { return weibull_cdf(z, x(0), x(1)); },
          [](double q, const Vector& x) { return weibull_quantile(q, x(0), x(1)); });
    default:
      throw ConfigError("family has no scalar conditional oracle");
  }
}

OracleDistribution bivariate_link1_oracle() {
  return OracleDistribution(
      [](double z, const Vector& x) { return normal_cdf((z - x(0)) / x(2)); },
      [](double q, const Vector& x) { return x(0) + x(2) * normal_quantile(q); });
}

OracleDistribution bivariate_link2_oracle() {
  const double rho = kBivariateRho;
  auto moments = [rho](const Vector& x) {
    const double mu1 = x(0), mu2 = x(1), s1 = x(2), s2 = x(3), y1 = x(4);
    const double mean = mu2 + rho * s2 / s1 * (y1 - mu1);
    const double sd = s2 * std::sqrt(1.0 - rho * rho);
    return std::pair<double, double>{mean, sd};
  };
  return OracleDistribution(
      [moments](double z, const Vector& x) {
        const auto [mean, sd] = moments(x);
        return normal_cdf((z - mean) / sd);
      },
      [moments](double q, const Vector& x) {
        const auto [mean, sd] = moments(x);
        return mean + sd * normal_quantile(q);
      });
}

double sample_outcome(Family family, const Vector& x_raw, RandomStream& rng) {
  switch (family) {
    case Family::sine1d:
      return rng.normal(sine_mean(x_raw(0)), sine_sd(x_raw(0)));
    case Family::hetero_gaussian:
      return rng.normal(x_raw(0), x_raw(1));
    case Family::weibull:
      return weibull_quantile(rng.uniform(), x_raw(0), x_raw(1));
    default:
      throw ConfigError("family has no scalar conditional sampler");
  }
}

namespace {

class BivariateJointOracle : public JointOracle {
public:
  double joint_cdf(double z1, double z2, const Vector& x) const override {
    const double h = (z1 - x(0)) / x(2);
    const double k = (z2 - x(1)) / x(3);
    return bivariate_normal_cdf(h, k, kBivariateRho);
  }
};

class VonMisesMonteCarloOracle : public JointOracle {
public:
  explicit VonMisesMonteCarloOracle(Eigen::Index draws) : draws_(draws) {}

  double joint_cdf(double z1, double z2, const Vector& x) const override {
    const Matrix& samples = draws_for(x);
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      hits += (samples(i, 0) <= z1 && samples(i, 1) <= z2) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.rows());
  }

private:
  const Matrix& draws_for(const Vector& x) const {
    const std::pair<double, double> key{x(0), x(1)};
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      return it->second;
    }
    // Deterministic per x: the seed comes from the concentration bits.
    RandomStream rng(fnv1a(x.data(), 2 * sizeof(double)));
    Matrix samples(draws_, 2);
    for (Eigen::Index i = 0; i < draws_; ++i) {
      const double psi1 = von_mises_sample(x(0), rng);
      const double psi2 = von_mises_sample(x(1), rng);
      samples(i, 0) = (std::cos(psi1) + std::cos(psi2)) / 2.0;
      samples(i, 1) = (std::sin(psi1) + std::sin(psi2)) / 2.0;
    }
    return cache_.emplace(key, std::move(samples)).first->second;
  }

  Eigen::Index draws_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<double, double>, Matrix> cache_;
};

}  // namespace

std::unique_ptr<JointOracle> bivariate_joint_oracle() {
  return std::make_unique<BivariateJointOracle>();
}

std::unique_ptr<JointOracle> von_mises_joint_oracle(Eigen::Index draws) {
  if (draws < 1) {
    throw ConfigError("von mises oracle: need at least one draw");
  }
  return std::make_unique<VonMisesMonteCarloOracle>(draws);
}

FixedF oracle_fixed_f(Family family) {
  const OracleDistribution oracle = scalar_oracle(family);
  return FixedF::make_oracle(
      [oracle](double q, const Vector& x_raw) { return oracle.quantile(q, x_raw); },
      family_name(family));
}

void rebind_oracle(TrainedCnModel& model) {
  if (!model.fixed_f.has_value() || model.fixed_f->kind != FixedF::Kind::oracle ||
      model.fixed_f->quantile) {
    return;
  }
  const std::string& name = model.fixed_f->oracle_name;
  if (name == "bivariate_gaussian_link1") {
    const OracleDistribution oracle = bivariate_link1_oracle();
    model.fixed_f->quantile = [oracle](double q, const Vector& x) { return oracle.quantile(q, x); };
    return;
  }
  if (name == "bivariate_gaussian_link2") {
    const OracleDistribution oracle = bivariate_link2_oracle();
    model.fixed_f->quantile = [oracle](double q, const Vector& x) { return oracle.quantile(q, x); };
    return;
  }
  const OracleDistribution oracle = scalar_oracle(family_from_name(name));
  model.fixed_f->quantile = [oracle](double q, const Vector& x) { return oracle.quantile(q, x); };
}

std::vector<ConvergenceCell> gof_vs_n_study(Family family,
                                            const std::vector<Eigen::Index>& n_grid,
                                            const std::vector<Variant>& variants,
                                            const TrainingConfig& base_cfg,
                                            Eigen::Index n_test, std::uint64_t seed) {
  if (n_grid.empty() || variants.empty()) {
    throw ConfigError("convergence study: need at least one n and one variant");
  }
  if (outcome_width(family) != 1) {
    throw ConfigError("convergence study: scalar-outcome families only");
  }
  if (n_test < 2) {
    throw ConfigError("convergence study: test size must be at least two");
  }
  std::vector<ConvergenceCell> cells;
  for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
    const Eigen::Index n = n_grid[ni];
    SyntheticSpec train_spec{family, n, derive_seed(seed, 1000 + ni)};
    SyntheticSpec test_spec{family, n_test, derive_seed(seed, 2000 + ni)};
    const GeneratedData train_data = generate(train_spec);
    const GeneratedData test_data = generate(test_spec);

    Matrix features(n + n_test, train_data.features.cols());
    features << train_data.features, test_data.features;
    Matrix outcomes(n + n_test, 1);
    outcomes << train_data.outcomes, test_data.outcomes;
    std::vector<Eigen::Index> train_rows(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> test_rows(static_cast<std::size_t>(n_test));
    for (Eigen::Index i = 0; i < n; ++i) train_rows[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index i = 0; i < n_test; ++i) test_rows[static_cast<std::size_t>(i)] = n + i;
    const LabeledDataset data = LabeledDataset::standardized_presplit(
        features, outcomes, std::move(train_rows), std::move(test_rows));

    const GofBins bins = GofBins::from_training(data.train_outcomes_raw().col(0));
    const Matrix x_test = data.test_features_raw();
    const Vector y_test = data.test_outcomes_raw().col(0);
    const CalibrationConfig cal = CalibrationConfig::defaults();

    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      TrainingConfig cfg = base_cfg;
      cfg.variant = variants[vi];
      cfg.seed = derive_seed(seed, 16 * ni + vi);
      std::optional<FixedF> fixed;
      if (cfg.variant == Variant::t_g_oracle_f) {
        fixed = oracle_fixed_f(family);
      }
      const TrainedCnModel model = train(data, cfg, std::move(fixed));
      const auto view = model.distribution(Source::from_g);
      const MetricReport report = evaluate_distribution(view, x_test, y_test, bins, cal);
      cells.push_back({n, cfg.variant, report.gof_hat});
    }
  }
  return cells;
}

}  // namespace cn
