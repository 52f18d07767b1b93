#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <doctest.h>

#include "cn/errors.hpp"
#include "cn/math.hpp"
#include "cn/synthetic.hpp"

using namespace cn;

namespace {

double ks_statistic(std::vector<double> draws, const std::function<double(double)>& cdf) {
  std::sort(draws.begin(), draws.end());
  const auto n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double fi = cdf(draws[i]);
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - fi));
    d = std::max(d, std::abs(static_cast<double>(i) / n - fi));
  }
  return d;
}

const Family kScalarFamilies[] = {Family::sine1d, Family::hetero_gaussian, Family::weibull};

}  // namespace

TEST_CASE("family naming, defaults, widths") {
  const Family all[] = {Family::sine1d, Family::hetero_gaussian, Family::weibull,
                        Family::bivariate_gaussian, Family::von_mises_circular};
  for (Family f : all) {
    CHECK(family_from_name(family_name(f)) == f);
  }
  CHECK_THROWS_AS(family_from_name("cauchy"), ConfigError);

  CHECK(default_n(Family::sine1d) == 100);
  CHECK(default_n(Family::hetero_gaussian) == 1000);
  CHECK(default_n(Family::weibull) == 1000);
  CHECK(default_n(Family::bivariate_gaussian) == 2000);
  CHECK(default_n(Family::von_mises_circular) == 5000);

  CHECK(outcome_width(Family::sine1d) == 1);
  CHECK(outcome_width(Family::hetero_gaussian) == 1);
  CHECK(outcome_width(Family::weibull) == 1);
  CHECK(outcome_width(Family::bivariate_gaussian) == 2);
  CHECK(outcome_width(Family::von_mises_circular) == 2);

  // n = 0 selects the family default.
  const GeneratedData d = generate({Family::sine1d, 0, 1});
  CHECK(d.features.rows() == 100);
  CHECK_THROWS_AS(generate({Family::sine1d, 1, 1}), ConfigError);
}

TEST_CASE("generators are deterministic in the seed") {
  const Family all[] = {Family::sine1d, Family::hetero_gaussian, Family::weibull,
                        Family::bivariate_gaussian, Family::von_mises_circular};
  for (Family f : all) {
    const GeneratedData a = generate({f, 64, 42});
    const GeneratedData b = generate({f, 64, 42});
    const GeneratedData c = generate({f, 64, 43});
    CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.outcomes - b.outcomes).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.outcomes - c.outcomes).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("feature laws match their documentation") {
  SUBCASE("sine1d features are an equally spaced grid") {
    const GeneratedData d = gen_sine1d(100, 3);
    CHECK(d.features(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(d.features(99, 0) == doctest::Approx(0.5).epsilon(1e-12));
    for (Eigen::Index i = 1; i < 100; ++i) {
      CHECK(d.features(i, 0) - d.features(i - 1, 0) ==
            doctest::Approx(1.0 / 99.0).epsilon(1e-9));
    }
  }

  SUBCASE("hetero gaussian parameter ranges") {
    const GeneratedData d = gen_hetero_gaussian(20000, 5);
    CHECK(std::abs(d.features.col(0).mean()) < 0.06);
    const double sd = std::sqrt((d.features.col(0).array() - d.features.col(0).mean())
                                    .square()
                                    .mean());
    CHECK(sd == doctest::Approx(2.0).epsilon(0.03));
    CHECK(d.features.col(1).minCoeff() >= 0.5);
    CHECK(d.features.col(1).maxCoeff() <= 2.5);
    CHECK(d.features.col(1).mean() == doctest::Approx(1.5).epsilon(0.02));
  }

  SUBCASE("weibull parameter ranges") {
    const GeneratedData d = gen_weibull(20000, 7);
    CHECK(d.features.col(0).minCoeff() >= 0.5);
    CHECK(d.features.col(0).maxCoeff() <= 2.0);
    CHECK(d.features.col(1).minCoeff() >= 1.0);
    CHECK(d.features.col(1).maxCoeff() <= 5.0);
    CHECK(d.outcomes.minCoeff() > 0.0);  // Weibull support
  }

  SUBCASE("von mises outcomes live in the unit square") {
    const GeneratedData d = gen_von_mises_circular(5000, 9);
    CHECK(d.outcomes.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(d.features.minCoeff() >= 0.5);
    CHECK(d.features.maxCoeff() <= 2.0);
  }

  SUBCASE("bivariate standardized residual correlation is one half") {
    const GeneratedData d = gen_bivariate_gaussian(20000, 11);
    const auto n = d.outcomes.rows();
    Vector u1(n), u2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      u1(i) = (d.outcomes(i, 0) - d.features(i, 0)) / d.features(i, 2);
      u2(i) = (d.outcomes(i, 1) - d.features(i, 1)) / d.features(i, 3);
    }
    const double c = (u1.array() - u1.mean()).matrix().dot((u2.array() - u2.mean()).matrix()) /
                     std::sqrt((u1.array() - u1.mean()).square().sum() *
                               (u2.array() - u2.mean()).square().sum());
    CHECK(c == doctest::Approx(0.5).epsilon(0.06));
  }
}

TEST_CASE("scalar oracles invert exactly") {
  for (Family f : kScalarFamilies) {
    const OracleDistribution oracle = scalar_oracle(f);
    const GeneratedData d = generate({f, 16, 13});
    for (Eigen::Index r = 0; r < 3; ++r) {
      const Vector x = d.features.row(r).transpose();
      for (int i = 1; i <= 19; ++i) {
        const double q = 0.05 * i;
        CHECK(oracle.cdf(oracle.quantile(q, x), x) == doctest::Approx(q).epsilon(1e-9));
      }
    }
  }
  CHECK_THROWS_AS(scalar_oracle(Family::bivariate_gaussian), ConfigError);
  CHECK_THROWS_AS(scalar_oracle(Family::von_mises_circular), ConfigError);
}

TEST_CASE("conditional samplers agree with their oracles") {
  // Kolmogorov-Smirnov against the analytic conditional law at one x. The
  // 1% critical value at 1e5 draws is about 0.0052; the bound leaves slack.
  for (Family f : kScalarFamilies) {
    const OracleDistribution oracle = scalar_oracle(f);
    const GeneratedData d = generate({f, 8, 17});
    const Vector x = d.features.row(4).transpose();
    RandomStream rng(1000 + static_cast<std::uint64_t>(f));
    std::vector<double> draws(100000);
    for (double& v : draws) {
      v = sample_outcome(f, x, rng);
    }
    const double ks = ks_statistic(draws, [&](double z) { return oracle.cdf(z, x); });
    CHECK(ks < 0.01);
  }
  RandomStream rng(3);
  CHECK_THROWS_AS(sample_outcome(Family::bivariate_gaussian, Vector::Zero(4), rng), ConfigError);
}

TEST_CASE("von mises sampler matches Bessel moments") {
  // E[cos psi] = I1(kappa)/I0(kappa) and E[cos 2 psi] = I2/I0; E[sin psi] = 0.
  const double kappa = 1.5;
  RandomStream rng(19);
  const int n = 200000;
  double c1 = 0.0, c2 = 0.0, s1 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double psi = von_mises_sample(kappa, rng);
    CHECK(std::abs(psi) <= M_PI);
    c1 += std::cos(psi);
    c2 += std::cos(2.0 * psi);
    s1 += std::sin(psi);
  }
  c1 /= n;
  c2 /= n;
  s1 /= n;
  const double i0 = std::cyl_bessel_i(0.0, kappa);
  CHECK(c1 == doctest::Approx(std::cyl_bessel_i(1.0, kappa) / i0).epsilon(0.02));
  CHECK(c2 == doctest::Approx(std::cyl_bessel_i(2.0, kappa) / i0).epsilon(0.05));
  CHECK(std::abs(s1) < 0.01);

  CHECK_THROWS_AS(von_mises_sample(0.0, rng), ConfigError);
}

TEST_CASE("bivariate link oracles compose into the joint law") {
  const auto joint = bivariate_joint_oracle();
  const OracleDistribution link1 = bivariate_link1_oracle();
  const OracleDistribution link2 = bivariate_link2_oracle();
  Vector x(4);
  x << 0.3, -0.2, 1.2, 1.6;

  SUBCASE("joint cdf is the standardized bivariate normal") {
    for (double z1 : {-1.0, 0.3, 2.0}) {
      for (double z2 : {-0.5, 1.0}) {
        const double expected =
            bivariate_normal_cdf((z1 - x(0)) / x(2), (z2 - x(1)) / x(3), 0.5);
        CHECK(joint->joint_cdf(z1, z2, x) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }

  SUBCASE("marginalizing the links reproduces the joint cdf") {
    // P(Y1 <= z1, Y2 <= z2) = E[ 1(Y1 <= z1) * P(Y2 <= z2 | Y1) ], estimated
    // with link-1 quantile draws on a uniform stream.
    const double z1 = 0.5, z2 = 0.1;
    RandomStream rng(23);
    const int n = 200000;
    double acc = 0.0;
    Vector x5(5);
    x5.head(4) = x;
    for (int i = 0; i < n; ++i) {
      const double y1 = link1.quantile(rng.uniform(), x);
      if (y1 <= z1) {
        x5(4) = y1;
        acc += link2.cdf(z2, x5);
      }
    }
    acc /= n;
    CHECK(acc == doctest::Approx(joint->joint_cdf(z1, z2, x)).epsilon(0.02));
  }

  SUBCASE("link oracles invert exactly") {
    Vector x5(5);
    x5 << 0.3, -0.2, 1.2, 1.6, 0.9;
    for (int i = 1; i <= 9; ++i) {
      const double q = 0.1 * i;
      CHECK(link1.cdf(link1.quantile(q, x), x) == doctest::Approx(q).epsilon(1e-10));
      CHECK(link2.cdf(link2.quantile(q, x5), x5) == doctest::Approx(q).epsilon(1e-10));
    }
  }
}

TEST_CASE("monte carlo joint oracle for the circular family") {
  const auto oracle = von_mises_joint_oracle(20000);
  Vector x(2);
  x << 0.8, 1.4;
  // Outcomes live in [-1,1]^2, so the unit corner catches everything.
  CHECK(oracle->joint_cdf(1.0, 1.0, x) == 1.0);
  CHECK(oracle->joint_cdf(-1.5, 0.0, x) == 0.0);
  const double mid = oracle->joint_cdf(0.2, 0.1, x);
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
  // Cached draws are seeded from x, so a fresh oracle answers identically.
  const auto again = von_mises_joint_oracle(20000);
  CHECK(again->joint_cdf(0.2, 0.1, x) == mid);
  CHECK_THROWS_AS(von_mises_joint_oracle(0), ConfigError);
}

TEST_CASE("named oracle f stand-ins") {
  for (Family f : kScalarFamilies) {
    const FixedF fixed = oracle_fixed_f(f);
    CHECK(fixed.kind == FixedF::Kind::oracle);
    CHECK(fixed.oracle_name == family_name(f));
    const OracleDistribution oracle = scalar_oracle(f);
    const GeneratedData d = generate({f, 8, 29});
    const Vector x = d.features.row(2).transpose();
    CHECK(fixed.quantile(0.3, x) == oracle.quantile(0.3, x));
  }
  CHECK_THROWS_AS(oracle_fixed_f(Family::bivariate_gaussian), ConfigError);
}

TEST_CASE("rebinding a loaded oracle by name") {
  auto probe = [](const std::string& name, const Vector& x, double expected) {
    TrainedCnModel m;
    FixedF fixed;
    fixed.kind = FixedF::Kind::oracle;
    fixed.oracle_name = name;
    m.fixed_f = fixed;
    REQUIRE_FALSE(static_cast<bool>(m.fixed_f->quantile));
    rebind_oracle(m);
    REQUIRE(static_cast<bool>(m.fixed_f->quantile));
    CHECK(m.fixed_f->quantile(0.5, x) == doctest::Approx(expected).epsilon(1e-12));
  };

  Vector xh(2);
  xh << 0.7, 1.3;
  probe("hetero_gaussian", xh, 0.7);  // median of N(0.7, 1.3^2)

  Vector x4(4);
  x4 << 0.3, -0.2, 1.2, 1.6;
  probe("bivariate_gaussian_link1", x4, 0.3);

  Vector x5(5);
  x5 << 0.3, -0.2, 1.2, 1.6, 0.9;
  // Median of the conditional: mu2 + rho s2/s1 (y1 - mu1).
  probe("bivariate_gaussian_link2", x5, -0.2 + 0.5 * (1.6 / 1.2) * (0.9 - 0.3));

  // A bound oracle is left alone.
  TrainedCnModel m;
  m.fixed_f = oracle_fixed_f(Family::weibull);
  rebind_oracle(m);
  CHECK(m.fixed_f->oracle_name == "weibull");

  // An unknown name cannot be rebound.
  TrainedCnModel broken;
  FixedF fixed;
  fixed.kind = FixedF::Kind::oracle;
  fixed.oracle_name = "lost";
  broken.fixed_f = fixed;
  CHECK_THROWS_AS(rebind_oracle(broken), ConfigError);
}

TEST_CASE("convergence study shape and determinism") {
  TrainingConfig cfg;
  cfg.pretrain_iters = 120;
  cfg.joint_iters = 120;
  cfg.batch_size = 32;
  cfg.g_hidden = {10, 8};
  cfg.f_hidden = {10, 8, 6};

  const std::vector<Eigen::Index> n_grid = {60, 120};
  const std::vector<Variant> variants = {Variant::t_g_oracle_f, Variant::cn_full};
  const auto cells = gof_vs_n_study(Family::sine1d, n_grid, variants, cfg, 150, 31);

  REQUIRE(cells.size() == 4);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CHECK(cells[i].n == n_grid[i / 2]);
    CHECK(cells[i].variant == variants[i % 2]);
    CHECK(std::isfinite(cells[i].gof));
    CHECK(cells[i].gof < 0.0);          // log probabilities
    CHECK(cells[i].gof >= std::log(1e-10));  // never below the bin floor
  }

  const auto again = gof_vs_n_study(Family::sine1d, n_grid, variants, cfg, 150, 31);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CHECK(cells[i].gof == again[i].gof);
  }
}
