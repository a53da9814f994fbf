// Settings throughput of the randomized-measurement simulation, serial
// reference against the OpenMP path, on small and mid-size local dimensions.

#include "redmoment/protocol.hpp"
#include "redmoment/state.hpp"

#include <benchmark/benchmark.h>

#include <string>

namespace {

redmoment::states::DensityMatrix family_state(const std::string& spec) {
  return redmoment::states::make_state(redmoment::states::parse_family(spec));
}

void run(benchmark::State& state, const std::string& spec,
         redmoment::protocol::ExecutionPolicy policy) {
  redmoment::protocol::ProtocolConfig cfg;
  cfg.state = family_state(spec);
  cfg.n_u = state.range(0);
  cfg.master_seed = 0xbe9cULL;
  cfg.policy = policy;
  for (auto _ : state) {
    const auto result = redmoment::protocol::run_protocol(cfg);
    benchmark::DoNotOptimize(result.global.y);
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_u);
}

void BM_protocol_2x2_serial(benchmark::State& state) {
  run(state, "mes:d=2", redmoment::protocol::ExecutionPolicy::Serial);
}

void BM_protocol_2x2_parallel(benchmark::State& state) {
  run(state, "mes:d=2", redmoment::protocol::ExecutionPolicy::Parallel);
}

void BM_protocol_3x3_serial(benchmark::State& state) {
  run(state, "iso:d=3,p=0.7", redmoment::protocol::ExecutionPolicy::Serial);
}

void BM_protocol_3x3_parallel(benchmark::State& state) {
  run(state, "iso:d=3,p=0.7", redmoment::protocol::ExecutionPolicy::Parallel);
}

BENCHMARK(BM_protocol_2x2_serial)->Arg(2000)->Arg(20000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_protocol_2x2_parallel)->Arg(2000)->Arg(20000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_protocol_3x3_serial)->Arg(2000)->Arg(20000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_protocol_3x3_parallel)->Arg(2000)->Arg(20000)
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
