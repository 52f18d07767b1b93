#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cn/csv.hpp"
#include "cn/distribution.hpp"

namespace cn {

// Nominal coverage levels checked by the calibration error, with one weight
// per level. The default follows the evaluation protocol used throughout:
// eight equally spaced levels from 0.02 to 0.98, unit weights.
struct CalibrationConfig {
  Vector levels;
  Vector weights;

  static CalibrationConfig defaults();
  void validate() const;
};

// Ten outcome bins for the goodness-of-fit score. edges holds the nine
// interior boundaries: the first is the 5th percentile of the training
// outcomes, the last the 95th, the rest equally spaced between them. Bins
// are half-open [a_{j-1}, a_j); the outer bins run to the infinities.
struct GofBins {
  Vector edges;

  static GofBins from_training(const Vector& y_train_raw);
  int bin_of(double y) const;
  int bin_count() const { return static_cast<int>(edges.size()) + 1; }
};

struct SharpnessPoint {
  double nominal = 0.0;
  double empirical_coverage = 0.0;  // percent
  double median_width = 0.0;        // outcome units
};

struct MetricReport {
  double cal_hat = 0.0;     // percent, lower is better
  double coverage90 = 0.0;  // percent covered by the nominal-90% interval
  double gof_hat = 0.0;     // mean log probability of the realized bin
  double mae = 0.0;         // mean absolute error of the predicted medians
  Eigen::Index n_test = 0;
  std::vector<SharpnessPoint> sharpness;  // one row per calibration level
};

// Mean weighted absolute gap between nominal and empirical coverage, in
// percent. intervals_per_level[j] pairs with cfg.levels[j]; the sum of gaps
// is divided by the number of levels regardless of the weights.
double cal_hat(const std::vector<std::vector<Interval>>& intervals_per_level,
               const Vector& outcomes, const CalibrationConfig& cfg);

// Percent of outcomes inside their interval (closed bounds).
double coverage_at(const std::vector<Interval>& intervals, const Vector& outcomes);

// Per-sample bin probabilities under the distribution: CDF differences at
// the bin edges, floored at 1e-10 and renormalized to sum one.
Matrix bin_probabilities(const ConditionalDistribution& dist, const Matrix& x_rows,
                         const GofBins& bins);

// Mean log probability assigned to each outcome's realized bin.
double gof_hat(const Matrix& bin_probs, const Vector& outcomes, const GofBins& bins);

double mae(const Vector& predicted, const Vector& reference);

// (nominal, empirical coverage, median width) per level.
std::vector<SharpnessPoint> sharpness_curve(
    const std::vector<std::vector<Interval>>& intervals_per_level, const Vector& outcomes,
    const Vector& levels);

// Full evaluation of one distribution on a test set (original units).
// median_reference supplies the targets for the MAE (analytic conditional
// medians in synthetic runs); without it the observed outcomes serve.
MetricReport evaluate_distribution(const ConditionalDistribution& dist, const Matrix& x_test_raw,
                                   const Vector& y_test_raw, const GofBins& bins,
                                   const CalibrationConfig& cal_cfg,
                                   const Vector* median_reference = nullptr);

// One metric per key=value line.
std::string metric_record(const MetricReport& report);
MetricReport metric_record_parse(const std::string& text);

csv::Table sharpness_table(const MetricReport& report);
// nominal, empirical coverage, and their gap per level.
csv::Table calibration_table(const MetricReport& report);

}  // namespace cn
