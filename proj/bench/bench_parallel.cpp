// Serial reference loops against the OpenMP kernels. Set OMP_NUM_THREADS to
// vary the thread count; results are identical either way, only time changes.

#include <benchmark/benchmark.h>

#include "artbp/gradients.hpp"
#include "artbp/models.hpp"
#include "artbp/montecarlo.hpp"
#include "artbp/trainer.hpp"

namespace {

using namespace artbp;

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

std::vector<Observation> rnn_stream(std::size_t T, std::uint64_t seed) {
  StreamRng rng(seed, 1);
  std::vector<Observation> obs;
  for (std::size_t t = 0; t < T; ++t) {
    obs.push_back({Vector{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                   Vector{rng.uniform(-1, 1), rng.uniform(-1, 1)}});
  }
  return obs;
}

std::vector<Observation> token_stream(std::size_t T, std::size_t vocab, std::uint64_t seed) {
  StreamRng rng(seed, 1);
  std::vector<Observation> obs;
  for (std::size_t t = 0; t < T; ++t) {
    obs.push_back({Token{static_cast<std::uint32_t>(rng() % vocab)},
                   Token{static_cast<std::uint32_t>(rng() % vocab)}});
  }
  return obs;
}

void BM_MonteCarloArtbp(benchmark::State& state) {
  const auto sys = build_tanh_rnn(2, 16, 2, 0.5, 1);
  const auto params = sys.initial_parameters();
  const auto obs = rnn_stream(50, 1);
  const Trajectory traj = forward(sys, params.view(), sys.initial_state(), obs);
  const MonteCarloConfig config{SchedulePolicy{PowerLaw{4.0, 8.0}}, true, 8192, 1, {}};
  for (auto _ : state) {
    auto r = monte_carlo_artbp(sys, params.view(), traj, config, mode(state));
    benchmark::DoNotOptimize(r.gradient.mean().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(config.samples));
}
BENCHMARK(BM_MonteCarloArtbp)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_FiniteDifferenceGradient(benchmark::State& state) {
  const auto sys = build_lstm_char(8, 16, 1, 0.3);
  const auto params = sys.initial_parameters();
  const auto obs = token_stream(20, 8, 1);
  for (auto _ : state) {
    auto g = finite_difference_gradient(sys, params.view(), sys.initial_state(), obs,
                                        kFiniteDifferenceBase, mode(state));
    benchmark::DoNotOptimize(g.values.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(params.size()));
}
BENCHMARK(BM_FiniteDifferenceGradient)
    ->Arg(0)
    ->Arg(1)
    ->ArgName("parallel")
    ->Unit(benchmark::kMillisecond);

void BM_BatchedLanes(benchmark::State& state) {
  const std::size_t vocab = 30, lanes = 8;
  const auto sys = build_lstm_char(vocab, 32, 1, 0.08);
  std::vector<std::vector<Observation>> data;
  for (std::size_t l = 0; l < lanes; ++l) data.push_back(token_stream(500, vocab, 10 + l));
  for (auto _ : state) {
    ParameterVector params = sys.initial_parameters();
    Optimizer opt = Adam({1e-3}, params.size());
    auto trace = train_batched(sys, params, data, SchedulePolicy{PowerLaw{4.0, 50.0}},
                               Algorithm::Artbp, opt, 1, 1, BatchOptions{false, mode(state)});
    benchmark::DoNotOptimize(trace.losses.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lanes * 500));
}
BENCHMARK(BM_BatchedLanes)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
