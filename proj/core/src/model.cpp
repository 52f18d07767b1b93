#include "cn/model.hpp"

#include <algorithm>
#include <cmath>

#include "cn/errors.hpp"
#include "cn/rng.hpp"

namespace cn {

FixedF FixedF::make_uniform(double lo, double hi) {
  if (!(lo < hi)) {
    throw ConfigError("fixed f: uniform bounds must satisfy lo < hi");
  }
  FixedF f;
  f.kind = Kind::uniform;
  f.lo = lo;
  f.hi = hi;
  return f;
}

FixedF FixedF::make_oracle(std::function<double(double, const Vector&)> quantile,
                           std::string name) {
  if (!quantile) {
    throw ConfigError("fixed f: oracle quantile function is empty");
  }
  FixedF f;
  f.kind = Kind::oracle;
  f.quantile = std::move(quantile);
  f.oracle_name = std::move(name);
  return f;
}

void TrainingConfig::validate() const {
  if (pretrain_iters < 0 || joint_iters < 0) {
    throw ConfigError("config: iteration counts must be non-negative");
  }
  if (batch_size < 0) {
    throw ConfigError("config: batch size must be non-negative (0 = size rule)");
  }
  if (!(g_step_size > 0.0) || !(f_step_size > 0.0)) {
    throw ConfigError("config: step sizes must be positive");
  }
  if (g_hidden.empty() || f_hidden.empty()) {
    throw ConfigError("config: hidden layer lists must not be empty");
  }
  for (const int w : g_hidden) {
    if (w <= 0) {
      throw ConfigError("config: g hidden widths must be positive");
    }
  }
  for (const int w : f_hidden) {
    if (w <= 0) {
      throw ConfigError("config: f hidden widths must be positive");
    }
  }
  if (q_dist == QDist::beta && (!(q_beta_a > 0.0) || !(q_beta_b > 0.0))) {
    throw ConfigError("config: beta level distribution needs positive shape parameters");
  }
  if (ext_lambda < 0.0) {
    throw ConfigError("config: ext term weight must be non-negative");
  }
  if (inversion_points < 2) {
    throw ConfigError("config: inversion grid needs at least two points");
  }
}

namespace {

// Hidden layers: eLU activation, then batch normalization with learnable
// affine. Output layer: linear, unconstrained (the joint phase may pin it).
std::vector<LayerSpec> stack_spec(int inputs, const std::vector<int>& hidden) {
  std::vector<LayerSpec> spec;
  int in = inputs;
  for (const int width : hidden) {
    spec.push_back({in, width, Activation::elu, NormKind::learnable_affine});
    in = width;
  }
  spec.push_back({in, 1, Activation::identity, NormKind::none});
  return spec;
}

Matrix with_level_column(const Vector& levels, const Matrix& x) {
  Matrix batch(x.rows(), x.cols() + 1);
  batch.col(0) = levels;
  batch.rightCols(x.cols()) = x;
  return batch;
}

void require_finite(double loss, const char* where) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string(where) + ": non-finite loss");
  }
}

int effective_batch(const TrainingConfig& cfg, Eigen::Index n_train) {
  int batch = cfg.batch_size;
  if (batch == 0) {
    batch = n_train < 500 ? 64 : 128;
  }
  return static_cast<int>(std::min<Eigen::Index>(batch, n_train));
}

struct BatchDraw {
  Matrix x;
  Vector y;
};

BatchDraw draw_batch(const Matrix& x, const Vector& y, int batch, RandomStream& rng) {
  BatchDraw out;
  out.x.resize(batch, x.cols());
  out.y.resize(batch);
  for (int i = 0; i < batch; ++i) {
    const auto r = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(x.rows())));
    out.x.row(i) = x.row(r);
    out.y(i) = y(r);
  }
  return out;
}

Vector draw_levels(int batch, const TrainingConfig& cfg, RandomStream& rng) {
  Vector q(batch);
  for (int i = 0; i < batch; ++i) {
    q(i) = cfg.q_dist == QDist::uniform ? rng.uniform() : rng.beta(cfg.q_beta_a, cfg.q_beta_b);
  }
  return q;
}

}  // namespace

LossResult g_loss(Network& g, const Vector& z_std, const Matrix& x_std, const Vector& y_std,
                  const Vector& q_levels, double ext_lambda, bool update_stats) {
  const auto n = x_std.rows();
  if (z_std.size() != n || y_std.size() != n) {
    throw ConfigError("g_loss: batch sizes disagree");
  }
  const bool ext = ext_lambda > 0.0 && q_levels.size() > 0;
  if (ext && q_levels.size() != n) {
    throw ConfigError("g_loss: level batch size disagrees");
  }
  const Matrix batch = with_level_column(z_std, x_std);
  Matrix logits;
  if (update_stats) {
    g.set_mode(Mode::train);
    logits = g.forward(batch);
  } else {
    logits = g.forward_frozen(batch);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double value = 0.0;
  Matrix dlogits(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double b = y_std(i) < z_std(i) ? 1.0 : 0.0;
    const double p = sigmoid(logits(i, 0));
    const double pc = clamp_probability(p);
    value += binary_cross_entropy(b, pc);
    // The clamp only guards the logs; the gradient keeps the exact p - b form.
    double d = p - b;
    if (ext) {
      const double diff = q_levels(i) - pc;
      value += ext_lambda * diff * diff;
      d += ext_lambda * -2.0 * diff * p * (1.0 - p);
    }
    dlogits(i, 0) = d * inv_n;
  }
  value *= inv_n;
  require_finite(value, "g_loss");
  LossResult result;
  result.value = value;
  result.grads = g.backward(dlogits, true);
  return result;
}

LossResult f_loss(Network& f, Network& g, const Vector& q_levels, const Matrix& x_std,
                  bool update_stats) {
  const auto n = x_std.rows();
  if (q_levels.size() != n) {
    throw ConfigError("f_loss: batch sizes disagree");
  }
  const Matrix f_batch = with_level_column(q_levels, x_std);
  Matrix z;
  if (update_stats) {
    f.set_mode(Mode::train);
    z = f.forward(f_batch);
  } else {
    z = f.forward_frozen(f_batch);
  }
  // Frozen g anchors the inversion target: with batch statistics instead, a
  // uniformly contracted proposal batch would renormalize itself loss-free
  // and f could drift toward the median unpunished.
  const Matrix g_batch = with_level_column(z.col(0), x_std);
  const Matrix logits = g.forward_frozen(g_batch);
  const double inv_n = 1.0 / static_cast<double>(n);
  double value = 0.0;
  Matrix dlogits(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = sigmoid(logits(i, 0));
    const double diff = q_levels(i) - clamp_probability(p);
    value += diff * diff;
    dlogits(i, 0) = -2.0 * diff * p * (1.0 - p) * inv_n;
  }
  value *= inv_n;
  require_finite(value, "f_loss");
  // Chain through g's input; only the level column feeds back into f.
  const Gradients g_grads = g.backward(dlogits, false);
  const Matrix dz = g_grads.input.col(0);
  LossResult result;
  result.value = value;
  result.grads = f.backward(dz, true);
  return result;
}

std::vector<double> pretrain_g(Network& g, const Matrix& x_std_train, const Vector& y_std_train,
                               const TrainingConfig& cfg, double grid_lo, double grid_hi) {
  if (!(grid_lo < grid_hi)) {
    throw ConfigError("pretrain: level range is degenerate");
  }
  RandomStream rng(derive_seed(cfg.seed, 2));
  AdamState adam(g, {.step_size = cfg.g_step_size});
  const int batch = effective_batch(cfg, x_std_train.rows());
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.pretrain_iters));
  for (int it = 0; it < cfg.pretrain_iters; ++it) {
    BatchDraw b = draw_batch(x_std_train, y_std_train, batch, rng);
    Vector z(batch);
    for (int i = 0; i < batch; ++i) {
      z(i) = rng.uniform(grid_lo, grid_hi);
    }
    try {
      LossResult loss = g_loss(g, z, b.x, b.y, Vector(), 0.0, true);
      adam.update(g, loss.grads);
      trace.push_back(loss.value);
    } catch (const NumericError& e) {
      throw NumericError("pretrain iteration " + std::to_string(it + 1) + ": " + e.what());
    }
  }
  return trace;
}

TrainedCnModel train(const LabeledDataset& data, const TrainingConfig& cfg,
                     std::optional<FixedF> fixed_f) {
  cfg.validate();
  if (data.outcome_width() != 1) {
    throw ConfigError("train: expected a single outcome column (chains handle several)");
  }
  const Matrix x_train = data.train_features();
  const Vector y_train = data.train_outcomes().col(0);
  const auto n_train = x_train.rows();
  if (n_train < 2) {
    throw DataError("train: training split needs at least two rows");
  }
  const auto p = static_cast<int>(x_train.cols());

  const double y_lo = y_train.minCoeff();
  const double y_hi = y_train.maxCoeff();
  double margin = cfg.margin_k > 0.0 ? cfg.margin_k : (y_hi - y_lo) / 2.0;
  if (!(margin > 0.0)) {
    throw ConfigError("train: outcome range is degenerate, cannot derive a level margin");
  }

  TrainedCnModel model;
  model.variant = cfg.variant;
  model.config = cfg;
  model.feature_mean = data.feature_mean;
  model.feature_sd = data.feature_sd;
  model.outcome_mean = data.outcome_mean(0);
  model.outcome_sd = data.outcome_sd(0);
  model.train_fraction = data.train_fraction;
  model.split_seed = data.split_seed;
  model.grid = {y_lo - margin, y_hi + margin, cfg.inversion_points};

  Network g(stack_spec(p + 1, cfg.g_hidden), derive_seed(cfg.seed, 0));
  model.trace.pretrain_g_loss = pretrain_g(g, x_train, y_train, cfg, model.grid.lo, model.grid.hi);

  std::optional<Network> f;
  if (cfg.variant == Variant::cn_full) {
    if (fixed_f.has_value()) {
      throw ConfigError("train: the joint variant does not take a fixed f");
    }
    f.emplace(stack_spec(p + 1, cfg.f_hidden), derive_seed(cfg.seed, 1));
  } else {
    if (cfg.variant == Variant::g_only_fixed_f && !fixed_f.has_value()) {
      fixed_f = FixedF::make_uniform(model.destandardize_outcome(model.grid.lo),
                                     model.destandardize_outcome(model.grid.hi));
    }
    if (!fixed_f.has_value()) {
      throw ConfigError("train: the oracle variant needs a fixed f with a quantile function");
    }
    if (cfg.variant == Variant::t_g_oracle_f && fixed_f->kind != FixedF::Kind::oracle) {
      throw ConfigError("train: the oracle variant needs an oracle fixed f");
    }
  }

  if (cfg.joint_iters > 0) {
    // The learned and oracle samplers feed g levels that follow the true
    // conditional law, so the output logit moments are pinned; the uniform
    // sampler's levels do not follow it, so the pin stays off there.
    if (cfg.variant != Variant::g_only_fixed_f) {
      g.set_output_fixed_affine(0.0, std::sqrt(kLogitSecondMoment));
    }
    RandomStream rng(derive_seed(cfg.seed, 3));
    AdamState adam_g(g, {.step_size = cfg.g_step_size});
    std::optional<AdamState> adam_f;
    if (f.has_value()) {
      adam_f.emplace(*f, AdamConfig{.step_size = cfg.f_step_size});
    }
    const int batch = effective_batch(cfg, n_train);
    Matrix x_train_raw;
    if (fixed_f.has_value() && fixed_f->kind == FixedF::Kind::oracle) {
      x_train_raw = data.train_features_raw();
    }
    model.trace.joint_g_loss.reserve(static_cast<std::size_t>(cfg.joint_iters));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(batch));
    for (int it = 0; it < cfg.joint_iters; ++it) {
      for (int i = 0; i < batch; ++i) {
        idx[static_cast<std::size_t>(i)] =
            static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n_train)));
      }
      Matrix xb(batch, p);
      Vector yb(batch);
      for (int i = 0; i < batch; ++i) {
        xb.row(i) = x_train.row(idx[static_cast<std::size_t>(i)]);
        yb(i) = y_train(idx[static_cast<std::size_t>(i)]);
      }
      const Vector q = draw_levels(batch, cfg, rng);

      try {
        Vector z(batch);
        if (f.has_value()) {
          LossResult fl = f_loss(*f, g, q, xb, true);
          adam_f->update(*f, fl.grads);
          model.trace.joint_f_loss.push_back(fl.value);
          // z re-evaluated under the updated f, as constants for the g step.
          f->set_mode(Mode::eval);
          z = f->forward(with_level_column(q, xb)).col(0);
          f->set_mode(Mode::train);
        } else if (fixed_f->kind == FixedF::Kind::uniform) {
          const double flo = model.standardize_outcome(fixed_f->lo);
          const double fhi = model.standardize_outcome(fixed_f->hi);
          z = (q.array() * (fhi - flo) + flo).matrix();
        } else {
          for (int i = 0; i < batch; ++i) {
            const Vector x_raw = x_train_raw.row(idx[static_cast<std::size_t>(i)]).transpose();
            z(i) = model.standardize_outcome(fixed_f->quantile(q(i), x_raw));
          }
        }

        LossResult gl = g_loss(g, z, xb, yb, q, cfg.ext_lambda, true);
        adam_g.update(g, gl.grads);
        model.trace.joint_g_loss.push_back(gl.value);
      } catch (const NumericError& e) {
        throw NumericError("joint iteration " + std::to_string(it + 1) + ": " + e.what());
      }
    }
  }

  g.set_mode(Mode::eval);
  model.g_net = std::move(g);
  if (f.has_value()) {
    f->set_mode(Mode::eval);
    model.f_net = std::move(f);
  }
  model.fixed_f = std::move(fixed_f);

  if (model.variant == Variant::cn_full && cfg.joint_iters > 0) {
    const auto probe_rows = std::min<Eigen::Index>(n_train, 16);
    model.collapse_warning = f_output_collapsed(model, x_train.topRows(probe_rows));
  }
  return model;
}

bool f_output_collapsed(const TrainedCnModel& model, const Matrix& x_std_probe) {
  if (!model.f_net.has_value() || x_std_probe.rows() == 0) {
    return false;
  }
  Vector levels(19);
  for (int i = 0; i < 19; ++i) {
    levels(i) = 0.05 * (i + 1);
  }
  double mean_sd = 0.0;
  for (Eigen::Index r = 0; r < x_std_probe.rows(); ++r) {
    Matrix batch(levels.size(), x_std_probe.cols() + 1);
    batch.col(0) = levels;
    batch.rightCols(x_std_probe.cols()) = x_std_probe.row(r).replicate(levels.size(), 1);
    const Matrix z = model.f_net->evaluate(batch);
    const double mu = z.col(0).mean();
    mean_sd += std::sqrt((z.col(0).array() - mu).square().mean());
  }
  mean_sd /= static_cast<double>(x_std_probe.rows());
  return mean_sd < 1e-4;
}

}  // namespace cn
