// Serial reference vs OpenMP kernels. With one core the two should be close;
// the gap opens with OMP_NUM_THREADS > 1.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "coach/nn/kernels.hpp"
#include "coach/policy/policy.hpp"
#include "coach/rupture/dataset.hpp"
#include "coach/rupture/model.hpp"

using namespace coach;

namespace {

nn::Tensor3 random_windows(std::size_t n, std::size_t time, std::size_t width, std::uint64_t seed) {
  nn::Tensor3 x(n, time, width);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  for (auto& v : x.data) v = d(rng);
  return x;
}

struct ClassifierCase {
  nn::Network net{rupture::classifier_spec(rupture::ModelKind::BiLstm, rupture::kFacialWidth, 16, 1)};
  std::vector<double> params = net.init_params();
  nn::Tensor3 x;
  std::vector<nn::Target> targets;
  std::vector<std::size_t> indices;
  std::vector<double> grad = std::vector<double>(params.size());

  explicit ClassifierCase(std::size_t n) : x(random_windows(n, 10, rupture::kFacialWidth, 2)), indices(n) {
    for (std::size_t i = 0; i < n; ++i) targets.push_back({i % 2, 1.0});
    std::iota(indices.begin(), indices.end(), 0);
  }
};

struct QCase {
  nn::Network net{policy::q_network_spec(64, 1)};
  std::vector<double> params = net.init_params();
  nn::Tensor3 x;
  explicit QCase(std::size_t n) : x(random_windows(n, 1, kStateSize, 3)) {}
};

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
  ClassifierCase c(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const double loss = Parallel ? nn::batch_gradient(c.net, c.params, c.x, c.targets, c.indices, c.grad)
                                 : nn::batch_gradient_serial(c.net, c.params, c.x, c.targets, c.indices, c.grad);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_PredictBatch(benchmark::State& state) {
  QCase c(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto out = Parallel ? nn::predict_batch(c.net, c.params, c.x) : nn::predict_batch_serial(c.net, c.params, c.x);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_NearMiss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_windows(n, 1, 600, 4);
  nn::Tensor2 rows(n, 600);
  rows.data = x.data;
  std::vector<std::size_t> majority, minority;
  for (std::size_t i = 0; i < n; ++i) (i % 5 == 0 ? minority : majority).push_back(i);
  for (auto _ : state) {
    auto s = Parallel ? rupture::nearmiss_scores(rows, majority, minority, 3)
                      : rupture::nearmiss_scores_serial(rows, majority, minority, 3);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(majority.size()));
}

}  // namespace

BENCHMARK(BM_BatchGradient<false>)->Name("batch_gradient/serial")->Arg(32)->Arg(128);
BENCHMARK(BM_BatchGradient<true>)->Name("batch_gradient/openmp")->Arg(32)->Arg(128);
BENCHMARK(BM_PredictBatch<false>)->Name("predict_batch/serial")->Arg(760)->Arg(4096);
BENCHMARK(BM_PredictBatch<true>)->Name("predict_batch/openmp")->Arg(760)->Arg(4096);
BENCHMARK(BM_NearMiss<false>)->Name("nearmiss_scores/serial")->Arg(500);
BENCHMARK(BM_NearMiss<true>)->Name("nearmiss_scores/openmp")->Arg(500);

BENCHMARK_MAIN();
