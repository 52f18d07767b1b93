#include "cn/adam.hpp"

#include <cmath>

#include "cn/errors.hpp"

namespace cn {

AdamState::AdamState(const Network& net, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.step_size > 0.0)) {
    throw ConfigError("adam: step size must be positive");
  }
  moments_.reserve(net.layers().size());
  for (const Network::Layer& l : net.layers()) {
    Moments mo;
    mo.m_w = Matrix::Zero(l.w.rows(), l.w.cols());
    mo.v_w = Matrix::Zero(l.w.rows(), l.w.cols());
    mo.m_b = Vector::Zero(l.b.size());
    mo.v_b = Vector::Zero(l.b.size());
    if (l.gamma.size() > 0) {
      mo.m_gamma = Vector::Zero(l.gamma.size());
      mo.v_gamma = Vector::Zero(l.gamma.size());
      mo.m_beta = Vector::Zero(l.beta.size());
      mo.v_beta = Vector::Zero(l.beta.size());
    }
    moments_.push_back(std::move(mo));
  }
}

namespace {

template <typename Param, typename Grad>
void step_tensor(Param& p, const Grad& g, Param& m, Param& v, const AdamConfig& cfg,
                 double bias1, double bias2) {
  if (!g.allFinite()) {
    throw NumericError("adam: non-finite gradient");
  }
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * g.array().square().matrix();
  p.array() -= cfg.step_size * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.eps);
}

}  // namespace

void AdamState::update(Network& net, const Gradients& grads) {
  auto& layers = net.layers();
  if (layers.size() != moments_.size() || grads.layers.size() != moments_.size()) {
    throw ConfigError("adam: state does not match this network");
  }
  ++step_;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Network::Layer& l = layers[i];
    const LayerGrads& g = grads.layers[i];
    Moments& mo = moments_[i];
    if (g.w.rows() != l.w.rows() || g.w.cols() != l.w.cols()) {
      throw ConfigError("adam: gradient shape does not match parameters");
    }
    step_tensor(l.w, g.w, mo.m_w, mo.v_w, cfg_, bias1, bias2);
    step_tensor(l.b, g.b, mo.m_b, mo.v_b, cfg_, bias1, bias2);
    if (l.gamma.size() > 0) {
      step_tensor(l.gamma, g.gamma, mo.m_gamma, mo.v_gamma, cfg_, bias1, bias2);
      step_tensor(l.beta, g.beta, mo.m_beta, mo.v_beta, cfg_, bias1, bias2);
    }
  }
}

}  // namespace cn
