#include "cn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cn/errors.hpp"

namespace cn {

namespace {

constexpr double kConstantColumnTol = 1e-12;

void column_stats(const Matrix& values, const std::vector<Eigen::Index>& rows, Vector& mean,
                  Vector& sd, bool reject_constant, const char* what) {
  const auto cols = values.cols();
  mean = Vector::Zero(cols);
  sd = Vector::Ones(cols);
  const auto n = static_cast<double>(rows.size());
  for (Eigen::Index c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (const Eigen::Index r : rows) {
      acc += values(r, c);
    }
    const double mu = acc / n;
    double ss = 0.0;
    for (const Eigen::Index r : rows) {
      const double d = values(r, c) - mu;
      ss += d * d;
    }
    const double var = rows.size() > 1 ? ss / (n - 1.0) : 0.0;
    const double s = std::sqrt(var);
    mean(c) = mu;
    if (s <= kConstantColumnTol) {
      if (reject_constant) {
        throw DataError(std::string(what) + " column " + std::to_string(c + 1) +
                        " is constant on the training split");
      }
      sd(c) = 1.0;
    } else {
      sd(c) = s;
    }
  }
}

Matrix standardize(const Matrix& values, const Vector& mean, const Vector& sd) {
  Matrix out = values;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    out.col(c) = (out.col(c).array() - mean(c)) / sd(c);
  }
  return out;
}

}  // namespace

LabeledDataset LabeledDataset::standardized(const Matrix& features_raw, const Matrix& outcomes_raw,
                                            double train_fraction, std::uint64_t split_seed) {
  const Eigen::Index n = features_raw.rows();
  if (n < 2) {
    throw DataError("dataset: need at least two rows to split");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("dataset: train fraction must lie strictly inside (0,1)");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 engine(split_seed);
  std::shuffle(order.begin(), order.end(), engine);
  auto n_train = static_cast<Eigen::Index>(std::lround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<Eigen::Index>(n_train, 1, n - 1);
  std::vector<Eigen::Index> train(order.begin(), order.begin() + n_train);
  std::vector<Eigen::Index> test(order.begin() + n_train, order.end());
  LabeledDataset data =
      standardized_presplit(features_raw, outcomes_raw, std::move(train), std::move(test));
  data.train_fraction = train_fraction;
  data.split_seed = split_seed;
  return data;
}

LabeledDataset LabeledDataset::standardized_presplit(const Matrix& features_raw,
                                                     const Matrix& outcomes_raw,
                                                     std::vector<Eigen::Index> train_rows,
                                                     std::vector<Eigen::Index> test_rows) {
  const Eigen::Index n = features_raw.rows();
  if (outcomes_raw.rows() != n) {
    throw DataError("dataset: feature and outcome row counts differ");
  }
  if (features_raw.cols() < 1 || outcomes_raw.cols() < 1) {
    throw DataError("dataset: need at least one feature and one outcome column");
  }
  if (train_rows.empty()) {
    throw DataError("dataset: training split is empty");
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  const auto claim = [&](const std::vector<Eigen::Index>& rows) {
    for (const Eigen::Index r : rows) {
      if (r < 0 || r >= n) {
        throw DataError("dataset: split index out of range");
      }
      if (seen[static_cast<std::size_t>(r)]++) {
        throw DataError("dataset: row " + std::to_string(r) + " appears twice in the split");
      }
    }
  };
  claim(train_rows);
  claim(test_rows);
  LabeledDataset data;
  column_stats(features_raw, train_rows, data.feature_mean, data.feature_sd, false, "feature");
  column_stats(outcomes_raw, train_rows, data.outcome_mean, data.outcome_sd, true, "outcome");
  data.features = standardize(features_raw, data.feature_mean, data.feature_sd);
  data.outcomes = standardize(outcomes_raw, data.outcome_mean, data.outcome_sd);
  data.train_rows = std::move(train_rows);
  data.test_rows = std::move(test_rows);
  return data;
}

Matrix LabeledDataset::gather(const Matrix& source, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
  }
  return out;
}

Matrix LabeledDataset::destandardize_features(Matrix std_rows) const {
  for (Eigen::Index c = 0; c < std_rows.cols(); ++c) {
    std_rows.col(c) = std_rows.col(c).array() * feature_sd(c) + feature_mean(c);
  }
  return std_rows;
}

Matrix LabeledDataset::destandardize_outcomes(Matrix std_rows) const {
  for (Eigen::Index c = 0; c < std_rows.cols(); ++c) {
    std_rows.col(c) = std_rows.col(c).array() * outcome_sd(c) + outcome_mean(c);
  }
  return std_rows;
}

}  // namespace cn
