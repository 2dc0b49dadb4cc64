#include <benchmark/benchmark.h>

#include <vector>

#include "ulab/eval.hpp"
#include "ulab/losses.hpp"
#include "ulab/net.hpp"
#include "ulab/rng.hpp"
#include "ulab/synthdata.hpp"

using namespace ulab;

namespace {

Eigen::MatrixXd random_batch(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = rng.uniform(-5, 5);
  return x;
}

void BM_Forward(benchmark::State& state) {
  const int batch = int(state.range(0));
  const auto params = init_params({100, {50, 10}, 1, Activation::relu}, 1);
  const auto x = random_batch(batch, 100, 2);
  for (auto _ : state) benchmark::DoNotOptimize(predict(params, x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(4096);

void BM_ForwardBackward(benchmark::State& state) {
  const int batch = int(state.range(0));
  const auto params = init_params({100, {50, 10}, 1, Activation::relu}, 1);
  const auto x = random_batch(batch, 100, 2);
  Eigen::MatrixXd dout = Eigen::MatrixXd::Constant(batch, 1, 0.1);
  for (auto _ : state) {
    const auto trace = forward(params, x);
    benchmark::DoNotOptimize(backward_from_output(params, trace, dout));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(4096);

void BM_FbiLoss(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> p(4096);
  for (auto& v : p) v = rng.uniform(0.01, 0.99);
  for (auto _ : state) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += losses::fbi_loss(int(i & 1), int((i >> 1) & 1), p[i], 19, 3).dloss_dp;
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(p.size()));
}
BENCHMARK(BM_FbiLoss);

void BM_PeoBatch(benchmark::State& state) {
  Rng rng(4);
  const int n = 128;
  std::vector<int> y(n), z(n);
  std::vector<double> p(n);
  for (int i = 0; i < n; ++i) y[i] = int(rng.below(2)), z[i] = int(rng.below(2)), p[i] = rng.uniform(0.01, 0.99);
  for (auto _ : state) benchmark::DoNotOptimize(losses::peo_batch_loss(y, z, p, 1.0, 0.05));
}
BENCHMARK(BM_PeoBatch);

void BM_Auc(benchmark::State& state) {
  Rng rng(5);
  const auto n = std::size_t(state.range(0));
  std::vector<int> y(n);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = int(rng.below(2)), p[i] = rng.uniform01();
  for (auto _ : state) benchmark::DoNotOptimize(eval::auc_group(y, p));
  state.SetItemsProcessed(state.iterations() * std::int64_t(n));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(20000);

void BM_GenerateTrain(benchmark::State& state) {
  synth::SynthConfig config;
  config.n_train = int(state.range(0));
  config.theta_y = 1;
  config.unbalance = 0.9;
  config.mode = Mode::CBUC;
  config.seed = 6;
  for (auto _ : state) benchmark::DoNotOptimize(synth::generate_train(config));
  state.SetItemsProcessed(state.iterations() * config.n_train);
}
BENCHMARK(BM_GenerateTrain)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
