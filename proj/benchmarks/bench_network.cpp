#include <benchmark/benchmark.h>

#include "cn/adam.hpp"
#include "cn/model.hpp"
#include "cn/network.hpp"
#include "cn/rng.hpp"

namespace {

using namespace cn;

std::vector<LayerSpec> g_spec(int inputs) {
  return {{inputs, 100, Activation::elu, NormKind::learnable_affine},
          {100, 80, Activation::elu, NormKind::learnable_affine},
          {80, 1, Activation::identity, NormKind::none}};
}

Matrix random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  RandomStream rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = rng.normal(0.0, 1.0);
    }
  }
  return m;
}

void bm_forward(benchmark::State& state) {
  Network net(g_spec(3), 7);
  const Matrix x = random_batch(state.range(0), 3, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward)->Arg(64)->Arg(128)->Arg(1024);

void bm_forward_backward(benchmark::State& state) {
  Network net(g_spec(3), 7);
  const Matrix x = random_batch(state.range(0), 3, 11);
  const Matrix grad = random_batch(state.range(0), 1, 13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x));
    benchmark::DoNotOptimize(net.backward(grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward_backward)->Arg(64)->Arg(128);

void bm_adam_update(benchmark::State& state) {
  Network net(g_spec(3), 7);
  AdamState adam(net, {.step_size = 1e-4});
  const Matrix x = random_batch(128, 3, 11);
  const Matrix grad = random_batch(128, 1, 13);
  net.forward(x);
  const Gradients grads = net.backward(grad);
  for (auto _ : state) {
    adam.update(net, grads);
  }
  state.SetItemsProcessed(state.iterations() * net.parameter_count());
}
BENCHMARK(bm_adam_update);

void bm_joint_iteration(benchmark::State& state) {
  // One full alternating step at the default widths: f update, fresh z, g
  // update. Mirrors the inner loop of the second training phase.
  const int batch = 128;
  Network g(g_spec(2), 3);
  Network f({{2, 100, Activation::elu, NormKind::learnable_affine},
             {100, 80, Activation::elu, NormKind::learnable_affine},
             {80, 60, Activation::elu, NormKind::learnable_affine},
             {60, 1, Activation::identity, NormKind::none}},
            4);
  AdamState adam_g(g, {.step_size = 1e-4});
  AdamState adam_f(f, {.step_size = 5e-4});
  RandomStream rng(19);
  Matrix x(batch, 1);
  Vector y(batch);
  for (int i = 0; i < batch; ++i) {
    x(i, 0) = rng.normal(0.0, 1.0);
    y(i) = rng.normal(0.0, 1.0);
  }
  for (auto _ : state) {
    Vector q(batch);
    for (int i = 0; i < batch; ++i) {
      q(i) = rng.uniform(0.0, 1.0);
    }
    LossResult fl = f_loss(f, g, q, x, true);
    adam_f.update(f, fl.grads);
    f.set_mode(Mode::eval);
    Matrix fin(batch, 2);
    fin.col(0) = q;
    fin.col(1) = x.col(0);
    Vector z = f.forward(fin).col(0);
    f.set_mode(Mode::train);
    LossResult gl = g_loss(g, z, x, y, q, 0.0, true);
    adam_g.update(g, gl.grads);
    benchmark::DoNotOptimize(gl.value);
  }
}
BENCHMARK(bm_joint_iteration);

}  // namespace

BENCHMARK_MAIN();
