#include <cmath>
#include <numbers>

#include <doctest.h>

#include "cn/errors.hpp"
#include "cn/math.hpp"
#include "cn/metrics.hpp"
#include "cn/rng.hpp"

using namespace cn;

namespace {

// Conditional N(x_0 + shift, sigma^2): closed-form cdf and quantiles, so
// every metric has a known target.
class GaussianStub : public ConditionalDistribution {
public:
  GaussianStub(double shift, double sigma) : shift_(shift), sigma_(sigma) {}

  double cdf(double z, const Vector& x) const override {
    return normal_cdf((z - x(0) - shift_) / sigma_);
  }
  double quantile(double q, const Vector& x) const override {
    return x(0) + shift_ + sigma_ * normal_quantile(q);
  }

private:
  double shift_, sigma_;
};

// CDF identically one: all mass collapses below the first bin edge.
class MassBelowStub : public ConditionalDistribution {
public:
  double cdf(double, const Vector&) const override { return 1.0; }
  double quantile(double, const Vector& x) const override { return x(0); }
};

struct TestDraw {
  Matrix x;
  Vector y;
};

TestDraw gaussian_draw(Eigen::Index n, std::uint64_t seed) {
  RandomStream rng(seed);
  TestDraw d;
  d.x.resize(n, 1);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.x(i, 0) = rng.normal();
    d.y(i) = d.x(i, 0) + rng.normal();
  }
  return d;
}

Interval around(double center, double half) { return {center - half, center + half, false}; }

}  // namespace

TEST_CASE("default calibration protocol") {
  const CalibrationConfig cfg = CalibrationConfig::defaults();
  REQUIRE(cfg.levels.size() == 8);
  CHECK(cfg.levels(0) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(cfg.levels(7) == doctest::Approx(0.98).epsilon(1e-12));
  for (int j = 1; j < 8; ++j) {
    CHECK(cfg.levels(j) - cfg.levels(j - 1) == doctest::Approx(0.96 / 7.0).epsilon(1e-12));
  }
  CHECK(cfg.weights.size() == 8);
  CHECK(cfg.weights.minCoeff() == 1.0);
  CHECK(cfg.weights.maxCoeff() == 1.0);
  CHECK_NOTHROW(cfg.validate());

  CalibrationConfig bad = cfg;
  bad.levels(0) = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.weights = Vector::Ones(3);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.weights(2) = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cal_hat sums weighted coverage gaps over the level count") {
  Vector y(4);
  y << 0.0, 1.0, 2.0, 3.0;
  CalibrationConfig cfg;
  cfg.levels.resize(2);
  cfg.levels << 0.5, 0.9;
  cfg.weights = Vector::Ones(2);

  // Level one covers a single outcome (gap 0.25), level two covers three
  // (gap 0.15).
  std::vector<Interval> narrow = {around(0.0, 0.1), around(0.0, 0.1), around(0.0, 0.1),
                                  around(0.0, 0.1)};
  std::vector<Interval> wide = {around(1.0, 1.5), around(1.0, 1.5), around(1.0, 1.5),
                                around(1.0, 1.5)};
  const std::vector<std::vector<Interval>> per_level = {narrow, wide};

  CHECK(cal_hat(per_level, y, cfg) == doctest::Approx(100.0 * (0.25 + 0.15) / 2.0).epsilon(1e-12));

  // Weights scale each gap, the divisor stays the level count.
  cfg.weights << 2.0, 1.0;
  CHECK(cal_hat(per_level, y, cfg) ==
        doctest::Approx(100.0 * (2.0 * 0.25 + 0.15) / 2.0).epsilon(1e-12));

  CHECK_THROWS_AS(cal_hat({narrow}, y, cfg), ConfigError);
}

TEST_CASE("coverage counts closed bounds") {
  Vector y(3);
  y << 0.0, 0.5, 2.0;
  const std::vector<Interval> ivs = {around(0.5, 0.5), around(0.5, 0.5), around(0.5, 0.5)};
  // 0.0 sits exactly on the lower bound and counts; 2.0 is outside.
  CHECK(coverage_at(ivs, y) == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(coverage_at({}, Vector()), ConfigError);
}

TEST_CASE("gof bins come from training percentiles") {
  SUBCASE("exact percentiles on 101 points") {
    Vector y(101);
    for (int i = 0; i <= 100; ++i) {
      y(i) = static_cast<double>(i);
    }
    const GofBins bins = GofBins::from_training(y);
    REQUIRE(bins.edges.size() == 9);
    CHECK(bins.bin_count() == 10);
    CHECK(bins.edges(0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(bins.edges(8) == doctest::Approx(95.0).epsilon(1e-12));
    CHECK(bins.edges(1) == doctest::Approx(16.25).epsilon(1e-12));

    // Half-open bins, outer bins unbounded.
    CHECK(bins.bin_of(4.999) == 0);
    CHECK(bins.bin_of(5.0) == 1);
    CHECK(bins.bin_of(94.999) == 8);
    CHECK(bins.bin_of(95.0) == 9);
    CHECK(bins.bin_of(1e9) == 9);
    CHECK(bins.bin_of(-1e9) == 0);
  }

  SUBCASE("interpolated percentiles on four points") {
    Vector y(4);
    y << 0.0, 1.0, 2.0, 3.0;
    const GofBins bins = GofBins::from_training(y);
    CHECK(bins.edges(0) == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(bins.edges(8) == doctest::Approx(2.85).epsilon(1e-12));
  }

  SUBCASE("degenerate training outcomes are rejected") {
    CHECK_THROWS_AS(GofBins::from_training(Vector::Ones(50)), DataError);
    Vector one(1);
    one << 2.0;
    CHECK_THROWS_AS(GofBins::from_training(one), DataError);
  }
}

TEST_CASE("gof of uniform bin probabilities is -log 10") {
  Vector y(6);
  y << -5.0, 0.1, 0.4, 0.6, 0.9, 7.0;
  Vector train(101);
  for (int i = 0; i <= 100; ++i) {
    train(i) = static_cast<double>(i) / 100.0;
  }
  const GofBins bins = GofBins::from_training(train);
  const Matrix probs = Matrix::Constant(6, 10, 0.1);
  CHECK(gof_hat(probs, y, bins) == doctest::Approx(-std::log(10.0)).epsilon(1e-12));

  CHECK_THROWS_AS(gof_hat(probs, Vector::Zero(3), bins), ConfigError);
  CHECK_THROWS_AS(gof_hat(Matrix::Constant(6, 4, 0.25), y, bins), ConfigError);
}

TEST_CASE("empty bins are floored, not zeroed") {
  Vector train(101);
  for (int i = 0; i <= 100; ++i) {
    train(i) = static_cast<double>(i);
  }
  const GofBins bins = GofBins::from_training(train);
  const MassBelowStub stub;
  const Matrix x = Matrix::Zero(1, 1);
  const Matrix probs = bin_probabilities(stub, x, bins);
  REQUIRE(probs.cols() == 10);
  // All mass lands in the first bin; the rest hold the floor, renormalized.
  CHECK(probs.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(probs(0, 0) == doctest::Approx(1.0 / (1.0 + 9e-10)));
  for (int b = 1; b < 10; ++b) {
    CHECK(probs(0, b) == doctest::Approx(1e-10 / (1.0 + 9e-10)));
  }
  // An outcome realized in an empty bin scores the floor, staying finite.
  Vector y(1);
  y << 200.0;
  CHECK(gof_hat(probs, y, bins) == doctest::Approx(std::log(1e-10)).epsilon(1e-6));
}

TEST_CASE("mean absolute error") {
  Vector a(3), b(3);
  a << 0.0, 2.0, -1.0;
  b << 1.0, 2.0, 1.0;
  CHECK(mae(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(mae(a, Vector::Zero(2)), ConfigError);
}

TEST_CASE("evaluating the true distribution") {
  const GaussianStub truth(0.0, 1.0);
  const TestDraw d = gaussian_draw(4000, 17);
  Vector train(2000);
  {
    RandomStream rng(18);
    for (Eigen::Index i = 0; i < train.size(); ++i) {
      train(i) = rng.normal() + rng.normal();
    }
  }
  const GofBins bins = GofBins::from_training(train);
  const CalibrationConfig cal = CalibrationConfig::defaults();

  Vector medians(d.x.rows());
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    medians(i) = d.x(i, 0);
  }
  const MetricReport report = evaluate_distribution(truth, d.x, d.y, bins, cal, &medians);

  CHECK(report.n_test == 4000);
  // The truth is calibrated: gaps are pure sampling noise, O(1/sqrt(n)).
  CHECK(report.cal_hat < 2.5);
  CHECK(report.coverage90 > 87.0);
  CHECK(report.coverage90 < 93.0);
  // The predicted median is the analytic median.
  CHECK(report.mae < 1e-9);

  SUBCASE("sharpness widths are the exact normal interval widths") {
    REQUIRE(report.sharpness.size() == 8);
    for (std::size_t j = 0; j < 8; ++j) {
      const SharpnessPoint& pt = report.sharpness[j];
      CHECK(pt.nominal == cal.levels(static_cast<Eigen::Index>(j)));
      const double expected = 2.0 * normal_quantile(0.5 + pt.nominal / 2.0);
      CHECK(pt.median_width == doctest::Approx(expected).epsilon(1e-9));
      CHECK(std::abs(pt.empirical_coverage - 100.0 * pt.nominal) < 3.0);
    }
  }

  SUBCASE("errors in location or spread lower the bin score") {
    const GaussianStub shifted(0.5, 1.0);
    const GaussianStub inflated(0.0, 2.0);
    const double truth_gof = report.gof_hat;
    CHECK(truth_gof > evaluate_distribution(shifted, d.x, d.y, bins, cal).gof_hat);
    CHECK(truth_gof > evaluate_distribution(inflated, d.x, d.y, bins, cal).gof_hat);
    CHECK(truth_gof > -std::log(10.0));
  }

  SUBCASE("without a reference the observed outcomes stand in") {
    const MetricReport plain = evaluate_distribution(truth, d.x, d.y, bins, cal);
    // Mean |median - y| = E|N(0,1)| = sqrt(2/pi).
    CHECK(plain.mae == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(0.06));
  }

  SUBCASE("misaligned reference is rejected") {
    Vector bad(3);
    bad << 0, 0, 0;
    CHECK_THROWS_AS(evaluate_distribution(truth, d.x, d.y, bins, cal, &bad), ConfigError);
  }
}

TEST_CASE("calibration error shrinks with the test size for the truth") {
  const GaussianStub truth(0.0, 1.0);
  Vector train(500);
  {
    RandomStream rng(23);
    for (Eigen::Index i = 0; i < train.size(); ++i) {
      train(i) = rng.normal() + rng.normal();
    }
  }
  const GofBins bins = GofBins::from_training(train);
  const CalibrationConfig cal = CalibrationConfig::defaults();

  const TestDraw small = gaussian_draw(250, 29);
  const TestDraw large = gaussian_draw(16000, 31);
  const double cal_small = evaluate_distribution(truth, small.x, small.y, bins, cal).cal_hat;
  const double cal_large = evaluate_distribution(truth, large.x, large.y, bins, cal).cal_hat;
  CHECK(cal_large < cal_small);
  CHECK(cal_large < 1.0);
}

TEST_CASE("metric record round trip and table shapes") {
  const GaussianStub truth(0.0, 1.0);
  const TestDraw d = gaussian_draw(400, 37);
  Vector train(400);
  {
    RandomStream rng(38);
    for (Eigen::Index i = 0; i < train.size(); ++i) {
      train(i) = rng.normal() + rng.normal();
    }
  }
  const GofBins bins = GofBins::from_training(train);
  const MetricReport report =
      evaluate_distribution(truth, d.x, d.y, bins, CalibrationConfig::defaults());

  const std::string text = metric_record(report);
  const MetricReport parsed = metric_record_parse(text);
  CHECK(parsed.cal_hat == report.cal_hat);
  CHECK(parsed.coverage90 == report.coverage90);
  CHECK(parsed.gof_hat == report.gof_hat);
  CHECK(parsed.mae == report.mae);
  CHECK(parsed.n_test == report.n_test);

  const csv::Table sharp = sharpness_table(report);
  CHECK(sharp.header == std::vector<std::string>{"nominal", "empirical_coverage", "median_width"});
  CHECK(sharp.rows.size() == 8);

  const csv::Table calib = calibration_table(report);
  CHECK(calib.header == std::vector<std::string>{"nominal", "empirical_coverage", "gap"});
  CHECK(calib.rows.size() == 8);
  // gap column is nominal percent minus empirical coverage.
  const double nominal_pct = 100.0 * report.sharpness[0].nominal;
  CHECK(csv::parse_double(calib.rows[0][2], "test") ==
        doctest::Approx(nominal_pct - report.sharpness[0].empirical_coverage).epsilon(1e-12));
}
