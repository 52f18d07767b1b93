#pragma once

#include <cstdint>
#include <vector>

#include "cn/math.hpp"

namespace cn {

// Feature/outcome container used by training and evaluation. Rows are
// samples. The stored matrices are standardized: per-column mean and sd are
// estimated on the training split only (sd with the n-1 denominator) and
// applied to every row, so test rows never leak into the statistics.
//
// Outcomes may have several columns (sequential multi-outcome models); the
// common case is one. A constant outcome column is rejected. A constant
// feature column standardizes to zeros rather than failing.
class LabeledDataset {
public:
  // Splits [0, n) with a seeded shuffle; round(train_fraction * n) rows train.
  static LabeledDataset standardized(const Matrix& features_raw, const Matrix& outcomes_raw,
                                     double train_fraction, std::uint64_t split_seed);

  // Caller-chosen split; indices must partition a subset of [0, n).
  static LabeledDataset standardized_presplit(const Matrix& features_raw,
                                              const Matrix& outcomes_raw,
                                              std::vector<Eigen::Index> train_rows,
                                              std::vector<Eigen::Index> test_rows);

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index feature_width() const { return features.cols(); }
  Eigen::Index outcome_width() const { return outcomes.cols(); }

  Matrix train_features() const { return gather(features, train_rows); }
  Matrix test_features() const { return gather(features, test_rows); }
  Matrix train_outcomes() const { return gather(outcomes, train_rows); }
  Matrix test_outcomes() const { return gather(outcomes, test_rows); }

  Matrix train_features_raw() const { return destandardize_features(train_features()); }
  Matrix test_features_raw() const { return destandardize_features(test_features()); }
  Matrix train_outcomes_raw() const { return destandardize_outcomes(train_outcomes()); }
  Matrix test_outcomes_raw() const { return destandardize_outcomes(test_outcomes()); }

  Matrix destandardize_features(Matrix std_rows) const;
  Matrix destandardize_outcomes(Matrix std_rows) const;

  static Matrix gather(const Matrix& source, const std::vector<Eigen::Index>& rows);

  Matrix features;  // standardized, n x p
  Matrix outcomes;  // standardized, n x m
  Vector feature_mean, feature_sd;
  Vector outcome_mean, outcome_sd;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;

  // Split bookkeeping so a checkpoint can re-derive the same split later.
  double train_fraction = 1.0;
  std::uint64_t split_seed = 0;
};

}  // namespace cn
