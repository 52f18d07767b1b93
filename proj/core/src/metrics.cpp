#include "cn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cn/errors.hpp"

namespace cn {

namespace {

constexpr double kBinFloor = 1e-10;

double percentile(Vector sorted, double q) {
  const Eigen::Index n = sorted.size();
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted(lo) + frac * (sorted(hi) - sorted(lo));
}

}  // namespace

CalibrationConfig CalibrationConfig::defaults() {
  CalibrationConfig cfg;
  cfg.levels.resize(8);
  for (int j = 0; j < 8; ++j) {
    cfg.levels(j) = 0.02 + static_cast<double>(j) * (0.98 - 0.02) / 7.0;
  }
  cfg.weights = Vector::Ones(8);
  return cfg;
}

void CalibrationConfig::validate() const {
  if (levels.size() == 0 || levels.size() != weights.size()) {
    throw ConfigError("calibration: levels and weights must align and be non-empty");
  }
  for (Eigen::Index j = 0; j < levels.size(); ++j) {
    if (!(levels(j) > 0.0 && levels(j) < 1.0)) {
      throw ConfigError("calibration: levels must lie strictly inside (0,1)");
    }
    if (weights(j) < 0.0) {
      throw ConfigError("calibration: weights must be non-negative");
    }
  }
}

GofBins GofBins::from_training(const Vector& y_train_raw) {
  if (y_train_raw.size() < 2) {
    throw DataError("gof bins: need at least two training outcomes");
  }
  Vector sorted = y_train_raw;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const double lo = percentile(sorted, 0.05);
  const double hi = percentile(sorted, 0.95);
  if (!(lo < hi)) {
    throw DataError("gof bins: training outcome spread is degenerate");
  }
  GofBins bins;
  bins.edges.resize(9);
  for (int j = 0; j < 9; ++j) {
    bins.edges(j) = lo + static_cast<double>(j) * (hi - lo) / 8.0;
  }
  return bins;
}

int GofBins::bin_of(double y) const {
  int b = 0;
  while (b < edges.size() && y >= edges(b)) {
    ++b;
  }
  return b;
}

double coverage_at(const std::vector<Interval>& intervals, const Vector& outcomes) {
  if (static_cast<Eigen::Index>(intervals.size()) != outcomes.size() || outcomes.size() == 0) {
    throw ConfigError("coverage: intervals and outcomes must align and be non-empty");
  }
  Eigen::Index covered = 0;
  for (Eigen::Index i = 0; i < outcomes.size(); ++i) {
    covered += intervals[static_cast<std::size_t>(i)].covers(outcomes(i)) ? 1 : 0;
  }
  return 100.0 * static_cast<double>(covered) / static_cast<double>(outcomes.size());
}

double cal_hat(const std::vector<std::vector<Interval>>& intervals_per_level,
               const Vector& outcomes, const CalibrationConfig& cfg) {
  cfg.validate();
  if (static_cast<Eigen::Index>(intervals_per_level.size()) != cfg.levels.size()) {
    throw ConfigError("cal_hat: one interval set per level required");
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < cfg.levels.size(); ++j) {
    const double cov = coverage_at(intervals_per_level[static_cast<std::size_t>(j)], outcomes) / 100.0;
    acc += cfg.weights(j) * std::abs(cfg.levels(j) - cov);
  }
  // The sum divides by the level count even under non-unit weights.
  return 100.0 * acc / static_cast<double>(cfg.levels.size());
}

Matrix bin_probabilities(const ConditionalDistribution& dist, const Matrix& x_rows,
                         const GofBins& bins) {
  const int nb = bins.bin_count();
  Matrix probs(x_rows.rows(), nb);
  for (Eigen::Index i = 0; i < x_rows.rows(); ++i) {
    const Vector cdf_at_edges = dist.cdfs(bins.edges, x_rows.row(i).transpose());
    double prev = 0.0;
    double total = 0.0;
    for (int b = 0; b < nb; ++b) {
      const double cur = b < nb - 1 ? cdf_at_edges(b) : 1.0;
      const double mass = std::max(cur - prev, kBinFloor);
      probs(i, b) = mass;
      total += mass;
      prev = cur;
    }
    probs.row(i) /= total;
  }
  return probs;
}

double gof_hat(const Matrix& bin_probs, const Vector& outcomes, const GofBins& bins) {
  if (bin_probs.rows() != outcomes.size() || outcomes.size() == 0) {
    throw ConfigError("gof_hat: probabilities and outcomes must align and be non-empty");
  }
  if (bin_probs.cols() != bins.bin_count()) {
    throw ConfigError("gof_hat: probability columns must match the bin count");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < outcomes.size(); ++i) {
    acc += std::log(bin_probs(i, bins.bin_of(outcomes(i))));
  }
  return acc / static_cast<double>(outcomes.size());
}

double mae(const Vector& predicted, const Vector& reference) {
  if (predicted.size() != reference.size() || predicted.size() == 0) {
    throw ConfigError("mae: vectors must align and be non-empty");
  }
  return (predicted - reference).array().abs().mean();
}

std::vector<SharpnessPoint> sharpness_curve(
    const std::vector<std::vector<Interval>>& intervals_per_level, const Vector& outcomes,
    const Vector& levels) {
  if (static_cast<Eigen::Index>(intervals_per_level.size()) != levels.size()) {
    throw ConfigError("sharpness: one interval set per level required");
  }
  std::vector<SharpnessPoint> curve;
  curve.reserve(static_cast<std::size_t>(levels.size()));
  for (Eigen::Index j = 0; j < levels.size(); ++j) {
    const auto& intervals = intervals_per_level[static_cast<std::size_t>(j)];
    std::vector<double> widths;
    widths.reserve(intervals.size());
    for (const Interval& iv : intervals) {
      widths.push_back(iv.width());
    }
    std::sort(widths.begin(), widths.end());
    const std::size_t n = widths.size();
    const double median_width =
        n % 2 == 1 ? widths[n / 2] : 0.5 * (widths[n / 2 - 1] + widths[n / 2]);
    curve.push_back({levels(j), coverage_at(intervals, outcomes), median_width});
  }
  return curve;
}

MetricReport evaluate_distribution(const ConditionalDistribution& dist, const Matrix& x_test_raw,
                                   const Vector& y_test_raw, const GofBins& bins,
                                   const CalibrationConfig& cal_cfg,
                                   const Vector* median_reference) {
  cal_cfg.validate();
  const Eigen::Index n = x_test_raw.rows();
  if (y_test_raw.size() != n || n == 0) {
    throw ConfigError("evaluate: test features and outcomes must align and be non-empty");
  }
  if (median_reference != nullptr && median_reference->size() != n) {
    throw ConfigError("evaluate: median reference must align with the test set");
  }
  const Eigen::Index n_levels = cal_cfg.levels.size();

  // One batched quantile request per row: bounds for every calibration
  // level, bounds for the 90% interval, and the median.
  Vector qs(2 * n_levels + 3);
  for (Eigen::Index j = 0; j < n_levels; ++j) {
    qs(2 * j) = (1.0 - cal_cfg.levels(j)) / 2.0;
    qs(2 * j + 1) = 1.0 - qs(2 * j);
  }
  qs(2 * n_levels) = 0.05;
  qs(2 * n_levels + 1) = 0.95;
  qs(2 * n_levels + 2) = 0.5;

  std::vector<std::vector<Interval>> per_level(static_cast<std::size_t>(n_levels));
  for (auto& v : per_level) {
    v.reserve(static_cast<std::size_t>(n));
  }
  std::vector<Interval> ninety;
  ninety.reserve(static_cast<std::size_t>(n));
  Vector medians(n);

  auto make_interval = [](double lo, double hi) {
    Interval iv{lo, hi, false};
    if (iv.lower > iv.upper) {
      std::swap(iv.lower, iv.upper);
      iv.rectified = true;
    }
    return iv;
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector bounds = dist.quantiles(qs, x_test_raw.row(i).transpose());
    for (Eigen::Index j = 0; j < n_levels; ++j) {
      per_level[static_cast<std::size_t>(j)].push_back(
          make_interval(bounds(2 * j), bounds(2 * j + 1)));
    }
    ninety.push_back(make_interval(bounds(2 * n_levels), bounds(2 * n_levels + 1)));
    medians(i) = bounds(2 * n_levels + 2);
  }

  MetricReport report;
  report.n_test = n;
  report.cal_hat = cal_hat(per_level, y_test_raw, cal_cfg);
  report.coverage90 = coverage_at(ninety, y_test_raw);
  report.gof_hat = gof_hat(bin_probabilities(dist, x_test_raw, bins), y_test_raw, bins);
  report.mae = mae(medians, median_reference != nullptr ? *median_reference : y_test_raw);
  report.sharpness = sharpness_curve(per_level, y_test_raw, cal_cfg.levels);
  return report;
}

std::string metric_record(const MetricReport& report) {
  std::ostringstream out;
  out << "cal_hat=" << csv::format_double(report.cal_hat) << '\n';
  out << "coverage90=" << csv::format_double(report.coverage90) << '\n';
  out << "gof_hat=" << csv::format_double(report.gof_hat) << '\n';
  out << "mae=" << csv::format_double(report.mae) << '\n';
  out << "n_test=" << report.n_test << '\n';
  return out.str();
}

MetricReport metric_record_parse(const std::string& text) {
  MetricReport report;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      continue;
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "cal_hat") {
      report.cal_hat = csv::parse_double(value, "metric record");
    } else if (key == "coverage90") {
      report.coverage90 = csv::parse_double(value, "metric record");
    } else if (key == "gof_hat") {
      report.gof_hat = csv::parse_double(value, "metric record");
    } else if (key == "mae") {
      report.mae = csv::parse_double(value, "metric record");
    } else if (key == "n_test") {
      report.n_test = static_cast<Eigen::Index>(csv::parse_double(value, "metric record"));
    }
  }
  return report;
}

csv::Table sharpness_table(const MetricReport& report) {
  csv::Table table;
  table.header = {"nominal", "empirical_coverage", "median_width"};
  for (const SharpnessPoint& pt : report.sharpness) {
    table.rows.push_back({csv::format_double(pt.nominal),
                          csv::format_double(pt.empirical_coverage),
                          csv::format_double(pt.median_width)});
  }
  return table;
}

csv::Table calibration_table(const MetricReport& report) {
  csv::Table table;
  table.header = {"nominal", "empirical_coverage", "gap"};
  for (const SharpnessPoint& pt : report.sharpness) {
    const double nominal_pct = 100.0 * pt.nominal;
    table.rows.push_back({csv::format_double(pt.nominal),
                          csv::format_double(pt.empirical_coverage),
                          csv::format_double(nominal_pct - pt.empirical_coverage)});
  }
  return table;
}

}  // namespace cn
