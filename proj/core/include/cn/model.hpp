#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cn/adam.hpp"
#include "cn/dataset.hpp"
#include "cn/distribution.hpp"
#include "cn/inversion.hpp"
#include "cn/network.hpp"

namespace cn {

// Two cooperating estimators of one conditional law: g learns the CDF
// P(Y < z | x) and f learns its inverse, the conditional quantile function.
// They are trained against each other; at the shared optimum g(f(q,x),x) = q.

enum class Variant {
  // Joint scheme: alternating f and g updates.
  cn_full,
  // g alone against a fixed uniform quantile sampler (continued pre-training).
  g_only_fixed_f,
  // g alone against an analytic quantile oracle.
  t_g_oracle_f,
};

enum class QDist { uniform, beta };

// Stand-in for the f network in the fixed-f variants. Uniform holds interval
// bounds; oracle holds an analytic conditional quantile. Both operate in
// original (unstandardized) units. `oracle_name` tags reconstructible
// oracles for checkpointing; an unnamed oracle cannot be serialized.
struct FixedF {
  enum class Kind { uniform, oracle };

  Kind kind = Kind::uniform;
  double lo = 0.0;
  double hi = 1.0;
  std::function<double(double q, const Vector& x_raw)> quantile;
  std::string oracle_name;

  static FixedF make_uniform(double lo, double hi);
  static FixedF make_oracle(std::function<double(double, const Vector&)> quantile,
                            std::string name = {});
};

struct TrainingConfig {
  int pretrain_iters = 20000;
  int joint_iters = 20000;
  // 0 selects the size rule: 64 when the training split has fewer than 500
  // rows, 128 otherwise. Any explicit value is clipped to the split size.
  int batch_size = 0;
  double g_step_size = 1e-4;
  double f_step_size = 5e-4;
  std::vector<int> g_hidden = {100, 80};
  std::vector<int> f_hidden = {100, 80, 60};
  QDist q_dist = QDist::uniform;
  double q_beta_a = 0.5;
  double q_beta_b = 0.5;
  // Margin K beyond the training outcome range, standardized units. Values
  // <= 0 select the default of half the standardized training range.
  double margin_k = 0.0;
  // Weight of the optional mean((q - g)^2) term added to the g step.
  double ext_lambda = 0.0;
  Variant variant = Variant::cn_full;
  std::uint64_t seed = 0;
  int inversion_points = 1024;

  void validate() const;
};

struct TrainingTrace {
  std::vector<double> pretrain_g_loss;
  std::vector<double> joint_g_loss;
  std::vector<double> joint_f_loss;
};

// Output-logit moment pinning used during the joint phase: normalize the
// batch of logits, then rescale to second moment 3.29 (the variance of the
// logit of a uniform level). Keeps the g-loss plateau at its ideal value 0.5.
inline constexpr double kLogitSecondMoment = 3.29;

enum class Source { from_g, from_f };

class TrainedCnModel {
public:
  // Queries take and return original units; q / nominal must lie in (0,1).
  double cdf(double z, const Vector& x) const;
  Vector cdfs(const Vector& zs, const Vector& x) const;
  // One z against many feature rows (batched, e.g. survival curves).
  Vector cdf_rows(double z, const Matrix& x_rows) const;

  GridQuantile quantile_from_g(double q, const Vector& x) const;
  // Shares a single grid evaluation across all levels.
  Vector quantiles_from_g(const Vector& qs, const Vector& x,
                          bool* any_saturated = nullptr) const;

  double quantile_from_f(double q, const Vector& x) const;
  Vector quantiles_from_f(const Vector& qs, const Vector& x) const;

  // CDF level of z implied by the f side: f evaluated on a level grid,
  // rectified monotone, then inverted by interpolation.
  double cdf_from_f(double z, const Vector& x) const;

  Interval interval(double nominal, const Vector& x, Source source) const;

  // The model as a ConditionalDistribution (metrics entry point). The view
  // borrows the model; keep the model alive while it is in use.
  class View;
  View distribution(Source source) const;

  bool has_f_net() const { return f_net.has_value(); }
  bool has_fixed_f() const { return fixed_f.has_value(); }

  double standardize_outcome(double y) const { return (y - outcome_mean) / outcome_sd; }
  double destandardize_outcome(double z) const { return z * outcome_sd + outcome_mean; }
  Vector standardize_features(const Vector& x) const;

  // Curve of g over the inversion grid at one x, standardized grid values
  // with clamped probabilities. Basis of every g-side query.
  Vector g_curve(const Vector& x_std) const;

  std::uint64_t fingerprint() const;

  Variant variant = Variant::cn_full;
  TrainingConfig config;
  Network g_net;
  std::optional<Network> f_net;
  std::optional<FixedF> fixed_f;

  Vector feature_mean, feature_sd;
  double outcome_mean = 0.0;
  double outcome_sd = 1.0;
  double train_fraction = 1.0;
  std::uint64_t split_seed = 0;

  InversionGrid grid;
  TrainingTrace trace;
  // Raised when f's outputs were nearly constant across levels after
  // training (mode collapse); queries still work but deserve suspicion.
  bool collapse_warning = false;

private:
  Matrix level_feature_batch(const Vector& levels, const Vector& x_std) const;
  // f outputs over the 199-point level grid, rectified nondecreasing.
  std::pair<Vector, Vector> f_level_curve(const Vector& x) const;
};

class TrainedCnModel::View : public ConditionalDistribution {
public:
  View(const TrainedCnModel& model, Source source) : model_(&model), source_(source) {}

  double cdf(double z, const Vector& x) const override;
  double quantile(double q, const Vector& x) const override;
  Vector quantiles(const Vector& qs, const Vector& x) const override;
  Vector cdfs(const Vector& zs, const Vector& x) const override;

private:
  const TrainedCnModel* model_;
  Source source_;
};

struct LossResult {
  double value = 0.0;
  Gradients grads;
};

// Cross entropy of the indicator 1(y < z) against g(z, x), plus the optional
// ext term ext_lambda * mean((q - g)^2) when levels are supplied. Inputs are
// standardized; z enters g as a constant. Gradients cover g only. The
// forward uses batch statistics; update_stats folds them into g's running
// stats (training) or leaves all state untouched (pure evaluation).
LossResult g_loss(Network& g, const Vector& z_std, const Matrix& x_std, const Vector& y_std,
                  const Vector& q_levels, double ext_lambda, bool update_stats = false);

// mean((q - g(f(q,x),x))^2). Gradients cover f only; g stays frozen but the
// chain passes through its input. update_stats commits f's batch statistics.
LossResult f_loss(Network& f, Network& g, const Vector& q_levels, const Matrix& x_std,
                  bool update_stats = false);

// Runs the pre-training phase in place: g against uniform levels over the
// margin-extended outcome range. Returns the per-iteration loss trace.
std::vector<double> pretrain_g(Network& g, const Matrix& x_std_train, const Vector& y_std_train,
                               const TrainingConfig& cfg, double grid_lo, double grid_hi);

// Full procedure: pre-train g, then the joint (or fixed-f) phase, then
// post-training checks. fixed_f supplies the quantile stand-in for the
// fixed-f variants; g_only_fixed_f defaults to uniform over the grid range.
TrainedCnModel train(const LabeledDataset& data, const TrainingConfig& cfg,
                     std::optional<FixedF> fixed_f = std::nullopt);

// True when f's outputs vary by less than 1e-4 standardized units across
// levels (averaged over probe rows). Exposed for tests.
bool f_output_collapsed(const TrainedCnModel& model, const Matrix& x_std_probe);

}  // namespace cn
