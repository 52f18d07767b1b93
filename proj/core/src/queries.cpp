#include <algorithm>
#include <cmath>

#include "cn/errors.hpp"
#include "cn/model.hpp"

namespace cn {

Vector InversionGrid::values() const {
  if (points < 2 || !(lo < hi)) {
    throw ConfigError("inversion grid: need lo < hi and at least two points");
  }
  Vector v(points);
  const double step = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) {
    v(i) = lo + step * i;
  }
  v(points - 1) = hi;
  return v;
}

GridQuantile invert_on_grid(const Vector& grid, const Vector& curve, double level) {
  if (grid.size() != curve.size() || grid.size() < 2) {
    throw ConfigError("invert_on_grid: grid and curve sizes disagree");
  }
  const Eigen::Index n = grid.size();
  Eigen::Index crossing = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (curve(i) >= level) {
      crossing = i;
      break;
    }
  }
  if (crossing == 0) {
    // The curve starts at or above the level: the true quantile lies at or
    // below the grid, indistinguishable from its first point.
    return {grid(0), curve(0) > level};
  }
  if (crossing < 0) {
    return {grid(n - 1), true};
  }
  const double v0 = curve(crossing - 1);
  const double v1 = curve(crossing);
  const double t = (level - v0) / (v1 - v0);
  return {grid(crossing - 1) + t * (grid(crossing) - grid(crossing - 1)), false};
}

Vector running_max(const Vector& v) {
  Vector out = v;
  for (Eigen::Index i = 1; i < out.size(); ++i) {
    out(i) = std::max(out(i), out(i - 1));
  }
  return out;
}

double level_at(const Vector& z_at_level, const Vector& levels, double z) {
  if (z_at_level.size() != levels.size() || levels.size() < 2) {
    throw ConfigError("level_at: curve and level sizes disagree");
  }
  const Eigen::Index n = levels.size();
  if (z <= z_at_level(0)) {
    return levels(0);
  }
  if (z >= z_at_level(n - 1)) {
    return levels(n - 1);
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    if (z <= z_at_level(i)) {
      const double z0 = z_at_level(i - 1);
      const double z1 = z_at_level(i);
      if (z1 <= z0) {
        return levels(i);
      }
      const double t = (z - z0) / (z1 - z0);
      return levels(i - 1) + t * (levels(i) - levels(i - 1));
    }
  }
  return levels(n - 1);
}

namespace {

void require_level(double q, const char* what) {
  if (!(q > 0.0 && q < 1.0)) {
    throw ConfigError(std::string(what) + ": level must lie strictly inside (0,1)");
  }
}

// 199 levels, 0.005 to 0.995.
Vector f_side_levels() {
  Vector q(199);
  for (int i = 0; i < 199; ++i) {
    q(i) = 0.005 * (i + 1);
  }
  return q;
}

}  // namespace

Vector TrainedCnModel::standardize_features(const Vector& x) const {
  if (x.size() != feature_mean.size()) {
    throw ConfigError("model: feature vector has wrong width");
  }
  return ((x - feature_mean).array() / feature_sd.array()).matrix();
}

Matrix TrainedCnModel::level_feature_batch(const Vector& levels, const Vector& x_std) const {
  Matrix batch(levels.size(), x_std.size() + 1);
  batch.col(0) = levels;
  batch.rightCols(x_std.size()) = x_std.transpose().replicate(levels.size(), 1);
  return batch;
}

Vector TrainedCnModel::g_curve(const Vector& x_std) const {
  const Vector grid_values = grid.values();
  Vector z_std(grid_values.size());
  for (Eigen::Index i = 0; i < grid_values.size(); ++i) {
    z_std(i) = grid_values(i);
  }
  const Matrix logits = g_net.evaluate(level_feature_batch(z_std, x_std));
  Vector probs(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    probs(i) = clamp_probability(sigmoid(logits(i, 0)));
  }
  return probs;
}

double TrainedCnModel::cdf(double z, const Vector& x) const {
  Vector zs(1);
  zs(0) = z;
  return cdfs(zs, x)(0);
}

Vector TrainedCnModel::cdfs(const Vector& zs, const Vector& x) const {
  const Vector x_std = standardize_features(x);
  Vector z_std(zs.size());
  for (Eigen::Index i = 0; i < zs.size(); ++i) {
    z_std(i) = standardize_outcome(zs(i));
  }
  const Matrix logits = g_net.evaluate(level_feature_batch(z_std, x_std));
  Vector probs(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    probs(i) = clamp_probability(sigmoid(logits(i, 0)));
  }
  return probs;
}

Vector TrainedCnModel::cdf_rows(double z, const Matrix& x_rows) const {
  if (x_rows.cols() != feature_mean.size()) {
    throw ConfigError("model: feature rows have wrong width");
  }
  Matrix batch(x_rows.rows(), x_rows.cols() + 1);
  batch.col(0).setConstant(standardize_outcome(z));
  for (Eigen::Index c = 0; c < x_rows.cols(); ++c) {
    batch.col(c + 1) = (x_rows.col(c).array() - feature_mean(c)) / feature_sd(c);
  }
  const Matrix logits = g_net.evaluate(batch);
  Vector probs(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    probs(i) = clamp_probability(sigmoid(logits(i, 0)));
  }
  return probs;
}

GridQuantile TrainedCnModel::quantile_from_g(double q, const Vector& x) const {
  require_level(q, "quantile_from_g");
  const Vector curve = g_curve(standardize_features(x));
  GridQuantile result = invert_on_grid(grid.values(), curve, q);
  result.value = destandardize_outcome(result.value);
  return result;
}

Vector TrainedCnModel::quantiles_from_g(const Vector& qs, const Vector& x,
                                        bool* any_saturated) const {
  for (Eigen::Index i = 0; i < qs.size(); ++i) {
    require_level(qs(i), "quantile_from_g");
  }
  const Vector curve = g_curve(standardize_features(x));
  const Vector grid_values = grid.values();
  Vector out(qs.size());
  bool saturated = false;
  for (Eigen::Index i = 0; i < qs.size(); ++i) {
    const GridQuantile gq = invert_on_grid(grid_values, curve, qs(i));
    saturated = saturated || gq.saturated;
    out(i) = destandardize_outcome(gq.value);
  }
  if (any_saturated != nullptr) {
    *any_saturated = saturated;
  }
  return out;
}

double TrainedCnModel::quantile_from_f(double q, const Vector& x) const {
  Vector qs(1);
  qs(0) = q;
  return quantiles_from_f(qs, x)(0);
}

Vector TrainedCnModel::quantiles_from_f(const Vector& qs, const Vector& x) const {
  for (Eigen::Index i = 0; i < qs.size(); ++i) {
    require_level(qs(i), "quantile_from_f");
  }
  if (f_net.has_value()) {
    const Vector x_std = standardize_features(x);
    const Matrix z = f_net->evaluate(level_feature_batch(qs, x_std));
    Vector out(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      out(i) = destandardize_outcome(z(i, 0));
    }
    return out;
  }
  if (!fixed_f.has_value()) {
    throw StateError("model: no f side available");
  }
  Vector out(qs.size());
  for (Eigen::Index i = 0; i < qs.size(); ++i) {
    if (fixed_f->kind == FixedF::Kind::uniform) {
      out(i) = fixed_f->lo + qs(i) * (fixed_f->hi - fixed_f->lo);
    } else {
      if (!fixed_f->quantile) {
        throw StateError("model: oracle fixed f has no bound quantile function");
      }
      out(i) = fixed_f->quantile(qs(i), x);
    }
  }
  return out;
}

std::pair<Vector, Vector> TrainedCnModel::f_level_curve(const Vector& x) const {
  const Vector levels = f_side_levels();
  const Vector z = quantiles_from_f(levels, x);
  return {running_max(z), levels};
}

double TrainedCnModel::cdf_from_f(double z, const Vector& x) const {
  const auto [z_curve, levels] = f_level_curve(x);
  return clamp_probability(level_at(z_curve, levels, z));
}

Interval TrainedCnModel::interval(double nominal, const Vector& x, Source source) const {
  require_level(nominal, "interval");
  Vector qs(2);
  qs(0) = (1.0 - nominal) / 2.0;
  qs(1) = 1.0 - qs(0);
  const Vector bounds =
      source == Source::from_g ? quantiles_from_g(qs, x) : quantiles_from_f(qs, x);
  Interval iv{bounds(0), bounds(1), false};
  if (iv.lower > iv.upper) {
    std::swap(iv.lower, iv.upper);
    iv.rectified = true;
  }
  return iv;
}

TrainedCnModel::View TrainedCnModel::distribution(Source source) const {
  return View(*this, source);
}

std::uint64_t TrainedCnModel::fingerprint() const {
  std::uint64_t h = g_net.parameter_hash();
  if (f_net.has_value()) {
    h = fnv1a(&h, sizeof(h), f_net->parameter_hash());
  }
  auto mix = [&h](const auto& v) {
    if (v.size() > 0) {
      h = fnv1a(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double), h);
    }
  };
  mix(feature_mean);
  mix(feature_sd);
  const double scalars[4] = {outcome_mean, outcome_sd, grid.lo, grid.hi};
  h = fnv1a(scalars, sizeof(scalars), h);
  return h;
}

double TrainedCnModel::View::cdf(double z, const Vector& x) const {
  return source_ == Source::from_g ? model_->cdf(z, x) : model_->cdf_from_f(z, x);
}

double TrainedCnModel::View::quantile(double q, const Vector& x) const {
  return source_ == Source::from_g ? model_->quantile_from_g(q, x).value
                                   : model_->quantile_from_f(q, x);
}

Vector TrainedCnModel::View::quantiles(const Vector& qs, const Vector& x) const {
  return source_ == Source::from_g ? model_->quantiles_from_g(qs, x)
                                   : model_->quantiles_from_f(qs, x);
}

Vector TrainedCnModel::View::cdfs(const Vector& zs, const Vector& x) const {
  if (source_ == Source::from_g) {
    return model_->cdfs(zs, x);
  }
  const Vector levels = f_side_levels();
  const Vector z_curve = running_max(model_->quantiles_from_f(levels, x));
  Vector out(zs.size());
  for (Eigen::Index i = 0; i < zs.size(); ++i) {
    out(i) = clamp_probability(level_at(z_curve, levels, zs(i)));
  }
  return out;
}

Vector ConditionalDistribution::quantiles(const Vector& qs, const Vector& x) const {
  Vector out(qs.size());
  for (Eigen::Index i = 0; i < qs.size(); ++i) {
    out(i) = quantile(qs(i), x);
  }
  return out;
}

Vector ConditionalDistribution::cdfs(const Vector& zs, const Vector& x) const {
  Vector out(zs.size());
  for (Eigen::Index i = 0; i < zs.size(); ++i) {
    out(i) = cdf(zs(i), x);
  }
  return out;
}

Interval ConditionalDistribution::interval(double nominal, const Vector& x) const {
  if (!(nominal > 0.0 && nominal < 1.0)) {
    throw ConfigError("interval: nominal level must lie strictly inside (0,1)");
  }
  Vector qs(2);
  qs(0) = (1.0 - nominal) / 2.0;
  qs(1) = 1.0 - qs(0);
  const Vector bounds = quantiles(qs, x);
  Interval iv{bounds(0), bounds(1), false};
  if (iv.lower > iv.upper) {
    std::swap(iv.lower, iv.upper);
    iv.rectified = true;
  }
  return iv;
}

}  // namespace cn
