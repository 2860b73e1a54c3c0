// Throughput of the hot datapath blocks and of a whole per-index step.
#include <benchmark/benchmark.h>

#include <vector>

#include "jass/airlink.hpp"
#include "jass/detector.hpp"
#include "jass/harness.hpp"

namespace {

using namespace jass;

detector::DatapathWidths widths() { return {}; }

airlink::Stream make_stream(int length) {
  airlink::TrialScenario sc;
  sc.length = length;
  sc.jammer.kind = airlink::JammerKind::barrage;
  sc.jammer.rho_db = 10.0;
  return airlink::synth_receive(sc, airlink::SyncSequence::random(7), length / 2, 0xBE7C4);
}

void BM_fx_cmac(benchmark::State& state) {
  const auto w = widths();
  auto acc = fxp::fx_czero(w.acc);
  const auto a = fxp::quantize_c(1.25, -0.5, w.acc);
  const auto b = fxp::quantize_c(-0.75, 0.3125, w.norm);
  for (auto _ : state) {
    acc = fxp::fx_cmac(acc, a, b, w.acc);
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_fx_cmac);

void BM_inv_sqrt(benchmark::State& state) {
  const auto w = widths();
  const kernels::InvSqrtUnit isq(w.invsqrt_entry, w.invsqrt_work, w.invsqrt_out);
  auto x = fxp::quantize(13.625, w.acc);
  for (auto _ : state) {
    auto y = isq(x);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_inv_sqrt);

void BM_matvec_fixed(benchmark::State& state) {
  const auto w = widths();
  const auto stream = make_stream(48);
  const auto fxs = airlink::quantize_stream(stream.samples, 0.25, w.input);
  const auto phi = detector::phi_init(
      std::span<const detector::FxVec16>(fxs.samples.data(), 16), w);
  detector::FxVec16 a;
  for (int i = 0; i < 16; ++i) a[i] = fxp::quantize_c(0.1 * i - 0.8, 0.05 * i, w.norm);
  detector::HermMatX lam;
  for (std::size_t i = 0; i < detector::hm::size; ++i) lam.t[i] = phi.t[i];
  for (auto _ : state) {
    detector::FxVec16 out;
    for (int i = 0; i < 16; ++i) {
      auto acc = fxp::fx_czero(w.acc);
      for (int j = 0; j < 16; ++j) acc = fxp::fx_cmac(acc, lam.at(i, j), a[j], w.acc);
      out[i] = acc;
    }
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_matvec_fixed);

void BM_detect_stream_float(benchmark::State& state) {
  const auto stream = make_stream(48);
  const auto seq = airlink::SyncSequence::random(7);
  detector::DetectorConfig det;
  det.stop_at_declaration = false;
  for (auto _ : state) {
    auto dec = detector::run(det, std::span<const airlink::CVec>(stream.samples), seq);
    benchmark::DoNotOptimize(dec);
  }
}
BENCHMARK(BM_detect_stream_float);

void BM_detect_stream_fixed(benchmark::State& state) {
  const auto w = widths();
  const auto stream = make_stream(48);
  const auto seq = airlink::SyncSequence::random(7);
  const auto fxs = airlink::quantize_stream(stream.samples, 0.25, w.input);
  detector::DetectorConfig det;
  det.stop_at_declaration = false;
  for (auto _ : state) {
    auto dec = detector::run(det, fxs, seq);
    benchmark::DoNotOptimize(dec);
  }
}
BENCHMARK(BM_detect_stream_fixed);

void BM_trial_fixed(benchmark::State& state) {
  auto cfg = harness::default_config();
  cfg.backend = harness::Backend::fixed_pt;
  cfg.scenario.jammer.kind = airlink::JammerKind::barrage;
  cfg.scenario.jammer.rho_db = 0.0;
  int i = 0;
  for (auto _ : state) {
    auto t = harness::run_trial(cfg, i++);
    benchmark::DoNotOptimize(t);
  }
}
BENCHMARK(BM_trial_fixed);

}  // namespace

BENCHMARK_MAIN();
