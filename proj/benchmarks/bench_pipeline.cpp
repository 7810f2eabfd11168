#include <benchmark/benchmark.h>

#include "icsim/config.hpp"
#include "icsim/harness.hpp"
#include "icsim/meassim.hpp"
#include "icsim/pad.hpp"
#include "icsim/pdmm.hpp"
#include "icsim/trafficgen.hpp"

using namespace icsim;

namespace {

// One second of the high-rate background.
Trace background(Nanos duration) {
  trafficgen::PoissonConfig cfg;
  cfg.lambda_ns = 12'500;
  cfg.sizes = trafficgen::EmpiricalSizes{{40, 576, 1500}, {0.5, 0.3, 0.2}};
  cfg.duration = duration;
  return trafficgen::gen_poisson(cfg);
}

const meassim::Hic kHicV1{30 * kMicrosecond, 300 * kMicrosecond};

}  // namespace

static void BM_GenPoisson(benchmark::State& state) {
  const Nanos duration = state.range(0) * kMillisecond;
  std::int64_t packets = 0;
  for (auto _ : state) {
    auto t = background(duration);
    packets += static_cast<std::int64_t>(t.size());
    benchmark::DoNotOptimize(t.data());
  }
  state.SetItemsProcessed(packets);
}
BENCHMARK(BM_GenPoisson)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_Measure(benchmark::State& state) {
  const auto trace = background(state.range(0) * kMillisecond);
  for (auto _ : state) {
    auto m = meassim::measure(trace, meassim::TransferConfig{}, kHicV1);
    benchmark::DoNotOptimize(m.records.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.size()));
}
BENCHMARK(BM_Measure)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_PdmmDetect(benchmark::State& state) {
  const auto ms = meassim::measure(background(5 * kSecond), {}, kHicV1).records;
  pdmm::PdmmConfig base;
  base.max_order = static_cast<int>(state.range(0));
  base.false_alarm = 1e-300;  // scan every block
  const auto cfg = harness::fit_pdmm(base, config::system_preset("hicv1"));
  for (auto _ : state) {
    auto r = pdmm::detect_stream(ms, cfg);
    benchmark::DoNotOptimize(r.blocks_processed);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ms.size()));
}
BENCHMARK(BM_PdmmDetect)->Arg(20)->Arg(150)->Unit(benchmark::kMillisecond);

static void BM_PadDetect(benchmark::State& state) {
  const auto ms = meassim::measure(background(5 * kSecond), {}, kHicV1).records;
  pad::PadConfig cfg;
  cfg.window = static_cast<int>(state.range(0));
  cfg.peak_factor = 1e9;  // scan the whole series
  const auto series = pad::rasterize(ms, cfg.sample_interval);
  for (auto _ : state) {
    auto r = pad::detect_psd(series, cfg);
    benchmark::DoNotOptimize(r.blocks_processed);
  }
}
BENCHMARK(BM_PadDetect)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
