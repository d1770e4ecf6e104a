#include <benchmark/benchmark.h>

#include <vector>

#include "robustbf/baselines.hpp"
#include "robustbf/beamnet.hpp"
#include "robustbf/channel.hpp"
#include "robustbf/training.hpp"

namespace {

using namespace robustbf;

std::vector<CsiSample> samples(int mk, double power_db, std::size_t n) {
  ScenarioConfig s;
  s.antennas = mk;
  s.users = mk;
  s.power_db = {power_db};
  s.error_ratios = {1.0};
  return sample_batch(s, n, Stream::kTest);
}

// Single-sample inference through the standard five-layer network.
void BM_Infer(benchmark::State& state) {
  const int mk = static_cast<int>(state.range(0));
  const NetParams net = NetParams::init(Architecture::standard(mk, mk), 1);
  const auto set = samples(mk, 20.0, 64);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer(net, set[i++ % set.size()]));
  }
}
BENCHMARK(BM_Infer)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_InferBatch(benchmark::State& state) {
  const NetParams net = NetParams::init(Architecture::standard(4, 4), 1);
  const auto set = samples(4, 20.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(infer_batch(net, set));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_InferBatch)->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_ConstructBeams(benchmark::State& state) {
  const int mk = static_cast<int>(state.range(0));
  const auto set = samples(mk, 20.0, 64);
  const RVec share = RVec::Constant(mk, 100.0 / mk);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(construct_beams(set[i++ % set.size()].estimate, PowerSplit{share, share, 100.0}));
  }
}
BENCHMARK(BM_ConstructBeams)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_Wmmse(benchmark::State& state) {
  const auto set = samples(4, static_cast<double>(state.range(0)), 64);
  std::size_t i = 0;
  for (auto _ : state) {
    const CsiSample& s = set[i++ % set.size()];
    benchmark::DoNotOptimize(wmmse(s.estimate, s.power));
  }
}
BENCHMARK(BM_Wmmse)->Arg(0)->Arg(30)->Unit(benchmark::kMicrosecond);

void BM_Zf(benchmark::State& state) {
  const auto set = samples(4, 20.0, 64);
  std::size_t i = 0;
  for (auto _ : state) {
    const CsiSample& s = set[i++ % set.size()];
    benchmark::DoNotOptimize(zf(s.estimate, s.power));
  }
}
BENCHMARK(BM_Zf)->Unit(benchmark::kMicrosecond);

// Forward, backward and Adam update on one mini-batch.
void BM_TrainStep(benchmark::State& state) {
  NetParams net = NetParams::init(Architecture::standard(4, 4), 1);
  AdamState adam = AdamState::zeros_like(net);
  const TrainConfig cfg;
  ScenarioConfig s;
  const auto batch = sample_batch(s, static_cast<std::size_t>(state.range(0)), Stream::kTrain);
  for (auto _ : state) {
    BatchLoss l = batch_loss(net, batch);
    adam_step(net, adam, l.gradients(), cfg);
    update_running_stats(net, l.stats);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
