#pragma once

#include <cstdint>
#include <vector>

#include "cn/math.hpp"

namespace cn {

// Small dense-network engine tailored to this project: eLU or identity
// activations, optional per-feature normalization after the activation, and
// reverse-mode gradients for every parameter as well as for the input batch.
// Batches are row-major: one sample per row.

enum class Activation { elu, identity };

enum class NormKind {
  none,
  // Normalize to zero mean / unit variance with learnable affine (gamma, beta).
  learnable_affine,
  // Normalize, then apply a frozen affine (fixed_shift, fixed_scale). Used to
  // pin the output-layer moments; carries running stats but no parameters.
  fixed_affine,
};

struct LayerSpec {
  int inputs = 0;
  int outputs = 0;
  Activation activation = Activation::elu;
  NormKind norm = NormKind::none;
  double fixed_shift = 0.0;
  double fixed_scale = 1.0;
};

enum class Mode { train, eval };

// Variance floor inside normalization. Far below any meaningful batch
// variance, so normalized moments hold to much better than 1e-6.
inline constexpr double kNormEps = 1e-8;

// Running statistics update: run = kNormMomentum * run + (1 - kNormMomentum) * batch.
inline constexpr double kNormMomentum = 0.99;

struct LayerGrads {
  Matrix w;      // same shape as the layer weight (inputs x outputs)
  Vector b;      // outputs
  Vector gamma;  // empty unless learnable_affine
  Vector beta;   // empty unless learnable_affine
};

struct Gradients {
  std::vector<LayerGrads> layers;
  Matrix input;  // d(loss)/d(input batch), same shape as the forward input
};

class Network {
public:
  struct Layer {
    LayerSpec spec;
    Matrix w;  // inputs x outputs
    Vector b;
    Vector gamma;     // learnable_affine only
    Vector beta;      // learnable_affine only
    Vector run_mean;  // any normalization
    Vector run_var;
  };

  Network() = default;

  // Weights start at N(0, 2/fan_in), biases at zero, affine at identity,
  // running stats at mean 0 / variance 1.
  Network(std::vector<LayerSpec> spec, std::uint64_t seed);

  // Evaluates the batch. In train mode normalization uses batch statistics
  // and folds them into the running stats; in eval mode it uses the running
  // stats. Train-mode passes cache intermediates for backward().
  Matrix forward(const Matrix& x);

  // Frozen forward: running statistics enter as constants and nothing is
  // committed, yet intermediates are cached so backward() is valid. The entry
  // point for differentiating through a network that is not being trained.
  Matrix forward_frozen(const Matrix& x);

  // Batch-statistics forward that leaves the running stats untouched. Caches
  // intermediates, so backward() is valid afterwards. Mode-independent; this
  // is the repeatable twin of a train-mode forward.
  Matrix forward_batch_frozen(const Matrix& x);

  // Pure evaluation with running statistics; ignores the mode, touches no
  // state, single rows welcome. The query-time entry point.
  Matrix evaluate(const Matrix& x) const;

  // Reverse-mode pass for the most recent cached forward. grad_out has one
  // row per sample. With parameter_grads false only the input gradient is
  // produced (layer entries stay empty), which is enough to chain gradients
  // through this network into a producer of its input.
  Gradients backward(const Matrix& grad_out, bool parameter_grads = true) const;

  void set_mode(Mode m) { mode_ = m; }
  Mode mode() const { return mode_; }

  int input_width() const;
  int output_width() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Converts the (currently unnormalized) last layer to fixed_affine with
  // fresh running stats. Invoked once when output-moment pinning turns on.
  void set_output_fixed_affine(double shift, double scale);

  // FNV-1a over every parameter and running statistic, in definition order.
  std::uint64_t parameter_hash() const;

  std::size_t parameter_count() const;

private:
  struct LayerCache {
    Matrix input;   // batch entering the layer
    Matrix linear;  // pre-activation
    Matrix activated;
    Matrix xhat;     // normalized activations (norm layers)
    Vector inv_std;  // 1/sqrt(var + eps) used in the pass
  };

  Matrix run_forward(const Matrix& x, bool batch_stats, bool update_running, bool cache);

  std::vector<Layer> layers_;
  Mode mode_ = Mode::train;
  std::vector<LayerCache> cache_;
  bool cache_valid_ = false;
  // Whether the cached pass normalized with batch statistics; running
  // statistics are constants in backward(), batch statistics couple the rows.
  bool cache_batch_stats_ = false;
};

}  // namespace cn
