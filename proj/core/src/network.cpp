#include "cn/network.hpp"

#include <cmath>

#include "cn/errors.hpp"
#include "cn/rng.hpp"

namespace cn {

namespace {

Matrix apply_activation(const Matrix& linear, Activation act) {
  if (act == Activation::identity) {
    return linear;
  }
  return linear.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

// d(elu)/dz expressed through the activation value: 1 for z > 0, exp(z) = a + 1 otherwise.
Matrix activation_derivative(const Matrix& linear, const Matrix& activated, Activation act) {
  if (act == Activation::identity) {
    return Matrix::Ones(linear.rows(), linear.cols());
  }
  Matrix d(linear.rows(), linear.cols());
  for (Eigen::Index j = 0; j < linear.cols(); ++j) {
    for (Eigen::Index i = 0; i < linear.rows(); ++i) {
      d(i, j) = linear(i, j) > 0.0 ? 1.0 : activated(i, j) + 1.0;
    }
  }
  return d;
}

}  // namespace

Network::Network(std::vector<LayerSpec> spec, std::uint64_t seed) {
  if (spec.empty()) {
    throw ConfigError("network: layer list must not be empty");
  }
  RandomStream rng(seed);
  layers_.reserve(spec.size());
  int expected = spec.front().inputs;
  for (const LayerSpec& s : spec) {
    if (s.inputs <= 0 || s.outputs <= 0) {
      throw ConfigError("network: layer widths must be positive");
    }
    if (s.inputs != expected) {
      throw ConfigError("network: layer input width does not match previous output width");
    }
    expected = s.outputs;
    Layer layer;
    layer.spec = s;
    layer.w = Matrix::NullaryExpr(s.inputs, s.outputs, [&]() {
      return rng.normal(0.0, std::sqrt(2.0 / s.inputs));
    });
    layer.b = Vector::Zero(s.outputs);
    if (s.norm == NormKind::learnable_affine) {
      layer.gamma = Vector::Ones(s.outputs);
      layer.beta = Vector::Zero(s.outputs);
    }
    if (s.norm != NormKind::none) {
      layer.run_mean = Vector::Zero(s.outputs);
      layer.run_var = Vector::Ones(s.outputs);
    }
    layers_.push_back(std::move(layer));
  }
}

int Network::input_width() const {
  return layers_.empty() ? 0 : layers_.front().spec.inputs;
}

int Network::output_width() const {
  return layers_.empty() ? 0 : layers_.back().spec.outputs;
}

Matrix Network::forward(const Matrix& x) {
  const bool train = mode_ == Mode::train;
  return run_forward(x, train, train, train);
}

Matrix Network::forward_frozen(const Matrix& x) {
  return run_forward(x, false, false, true);
}

Matrix Network::forward_batch_frozen(const Matrix& x) {
  return run_forward(x, true, false, true);
}

Matrix Network::evaluate(const Matrix& x) const {
  if (x.cols() != input_width()) {
    throw ConfigError("network: batch has wrong feature width");
  }
  if (x.rows() == 0) {
    throw ConfigError("network: batch must contain at least one row");
  }
  Matrix cur = x;
  for (const Layer& layer : layers_) {
    Matrix linear = (cur * layer.w).rowwise() + layer.b.transpose();
    Matrix activated = apply_activation(linear, layer.spec.activation);
    if (layer.spec.norm == NormKind::none) {
      cur = std::move(activated);
      continue;
    }
    const Vector inv_std = (layer.run_var.array() + kNormEps).rsqrt();
    Matrix xhat =
        (activated.rowwise() - layer.run_mean.transpose()) * inv_std.asDiagonal();
    if (layer.spec.norm == NormKind::learnable_affine) {
      cur = (xhat * layer.gamma.asDiagonal()).rowwise() + layer.beta.transpose();
    } else {
      cur = (xhat.array() * layer.spec.fixed_scale + layer.spec.fixed_shift).matrix();
    }
  }
  return cur;
}

Matrix Network::run_forward(const Matrix& x, bool batch_stats, bool update_running, bool cache) {
  if (x.cols() != input_width()) {
    throw ConfigError("network: batch has wrong feature width");
  }
  if (x.rows() == 0) {
    throw ConfigError("network: batch must contain at least one row");
  }
  if (batch_stats && x.rows() < 2) {
    for (const Layer& l : layers_) {
      if (l.spec.norm != NormKind::none) {
        throw ConfigError("network: batch-statistic normalization needs at least two rows");
      }
    }
  }
  cache_valid_ = false;
  if (cache) {
    cache_.assign(layers_.size(), LayerCache{});
  }
  Matrix cur = x;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Layer& layer = layers_[li];
    Matrix linear = (cur * layer.w).rowwise() + layer.b.transpose();
    Matrix activated = apply_activation(linear, layer.spec.activation);
    Matrix out;
    Vector inv_std;
    Matrix xhat;
    if (layer.spec.norm == NormKind::none) {
      out = activated;
    } else {
      Vector mean;
      Vector var;
      if (batch_stats) {
        mean = activated.colwise().mean();
        var = (activated.rowwise() - mean.transpose()).array().square().colwise().mean();
        if (update_running) {
          layer.run_mean = kNormMomentum * layer.run_mean + (1.0 - kNormMomentum) * mean;
          layer.run_var = kNormMomentum * layer.run_var + (1.0 - kNormMomentum) * var;
        }
      } else {
        mean = layer.run_mean;
        var = layer.run_var;
      }
      inv_std = (var.array() + kNormEps).rsqrt();
      xhat = (activated.rowwise() - mean.transpose()) * inv_std.asDiagonal();
      if (layer.spec.norm == NormKind::learnable_affine) {
        out = (xhat * layer.gamma.asDiagonal()).rowwise() + layer.beta.transpose();
      } else {
        out = (xhat.array() * layer.spec.fixed_scale + layer.spec.fixed_shift).matrix();
      }
    }
    if (cache) {
      LayerCache& c = cache_[li];
      c.input = cur;
      c.linear = std::move(linear);
      c.activated = std::move(activated);
      c.xhat = std::move(xhat);
      c.inv_std = std::move(inv_std);
    }
    cur = std::move(out);
  }
  cache_valid_ = cache;
  cache_batch_stats_ = batch_stats;
  return cur;
}

Gradients Network::backward(const Matrix& grad_out, bool parameter_grads) const {
  if (!cache_valid_) {
    throw StateError("network: backward requires a cached train-statistics forward pass");
  }
  if (grad_out.rows() != cache_.back().input.rows() || grad_out.cols() != output_width()) {
    throw ConfigError("network: gradient batch has wrong shape");
  }
  const double n = static_cast<double>(grad_out.rows());
  Gradients grads;
  grads.layers.resize(layers_.size());
  Matrix upstream = grad_out;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const Layer& layer = layers_[idx];
    const LayerCache& c = cache_[idx];
    LayerGrads& lg = grads.layers[idx];
    Matrix d_act;
    if (layer.spec.norm == NormKind::none) {
      d_act = std::move(upstream);
    } else {
      if (parameter_grads && layer.spec.norm == NormKind::learnable_affine) {
        lg.gamma = (upstream.array() * c.xhat.array()).colwise().sum();
        lg.beta = upstream.colwise().sum();
      }
      Matrix d_xhat;
      if (layer.spec.norm == NormKind::learnable_affine) {
        d_xhat = upstream * layer.gamma.asDiagonal();
      } else {
        d_xhat = upstream * layer.spec.fixed_scale;
      }
      if (cache_batch_stats_) {
        // Batch-statistics backward:
        // d_act = inv_std/n * (n*d_xhat - sum(d_xhat) - xhat * sum(d_xhat .* xhat))
        const Vector sum_dxhat = d_xhat.colwise().sum();
        const Vector sum_dxhat_xhat = (d_xhat.array() * c.xhat.array()).colwise().sum();
        d_act = n * d_xhat;
        d_act.rowwise() -= sum_dxhat.transpose();
        d_act -= c.xhat * sum_dxhat_xhat.asDiagonal();
        d_act = (1.0 / n) * d_act * c.inv_std.asDiagonal();
      } else {
        // Running statistics are constants, so rows stay uncoupled.
        d_act = d_xhat * c.inv_std.asDiagonal();
      }
    }
    Matrix d_linear =
        d_act.array() * activation_derivative(c.linear, c.activated, layer.spec.activation).array();
    if (parameter_grads) {
      lg.w.noalias() = c.input.transpose() * d_linear;
      lg.b = d_linear.colwise().sum();
    }
    upstream.noalias() = d_linear * layer.w.transpose();
  }
  grads.input = std::move(upstream);
  return grads;
}

void Network::set_output_fixed_affine(double shift, double scale) {
  Layer& last = layers_.back();
  if (last.spec.norm != NormKind::none) {
    throw StateError("network: output layer already carries normalization");
  }
  last.spec.norm = NormKind::fixed_affine;
  last.spec.fixed_shift = shift;
  last.spec.fixed_scale = scale;
  last.run_mean = Vector::Zero(last.spec.outputs);
  last.run_var = Vector::Ones(last.spec.outputs);
  cache_valid_ = false;
}

std::uint64_t Network::parameter_hash() const {
  std::uint64_t h = fnv1a(nullptr, 0);
  auto mix = [&h](const auto& m) {
    if (m.size() > 0) {
      h = fnv1a(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), h);
    }
  };
  for (const Layer& l : layers_) {
    mix(l.w);
    mix(l.b);
    mix(l.gamma);
    mix(l.beta);
    mix(l.run_mean);
    mix(l.run_var);
  }
  return h;
}

std::size_t Network::parameter_count() const {
  std::size_t count = 0;
  for (const Layer& l : layers_) {
    count += static_cast<std::size_t>(l.w.size() + l.b.size() + l.gamma.size() + l.beta.size());
  }
  return count;
}

}  // namespace cn
