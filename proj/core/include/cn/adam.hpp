#pragma once

#include "cn/network.hpp"

namespace cn {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected ADAM over every learnable tensor of one network (weights,
// biases, normalization affines). One state instance per optimized network;
// running statistics are not parameters and are never touched here.
class AdamState {
public:
  AdamState() = default;
  AdamState(const Network& net, AdamConfig cfg);

  // Applies one update in place. Gradients must come from net.backward() with
  // parameter gradients enabled. Non-finite gradients abort.
  void update(Network& net, const Gradients& grads);

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

private:
  struct Moments {
    Matrix m_w, v_w;
    Vector m_b, v_b;
    Vector m_gamma, v_gamma;
    Vector m_beta, v_beta;
  };

  AdamConfig cfg_;
  std::vector<Moments> moments_;
  std::int64_t step_ = 0;
};

}  // namespace cn
