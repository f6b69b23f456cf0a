// Copyright 2026 The TaskMesh Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "taskmesh/bench.hpp"
#include "taskmesh/frame.hpp"
#include "taskmesh/runtime.hpp"
#include "taskmesh/scheduler.hpp"

namespace {

using namespace taskmesh;

Program stencil(std::uint32_t width, std::uint32_t steps) {
  BenchSpec spec;
  spec.pattern = Pattern::Stencil1D;
  spec.width = width;
  spec.steps = steps;
  spec.iterations_per_task = 1000;
  spec.buffer_bytes = 1024;
  return generate(spec);
}

void BM_DeriveEdges(benchmark::State& state) {
  Program p = stencil(static_cast<std::uint32_t>(state.range(0)), 32);
  for (auto _ : state) benchmark::DoNotOptimize(derive_edges(p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.tasks().size()));
}
BENCHMARK(BM_DeriveEdges)->Arg(4)->Arg(16)->Arg(64);

void BM_Heft(benchmark::State& state) {
  TaskGraph g = derive_edges(stencil(static_cast<std::uint32_t>(2 * state.range(0)), 32));
  CostModel cost(static_cast<std::size_t>(state.range(0)), 2, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(heft_schedule(g, cost));
  state.counters["edges"] = static_cast<double>(g.edges().size());
}
BENCHMARK(BM_Heft)->Arg(2)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_FrameRoundTrip(benchmark::State& state) {
  Frame f;
  f.origin = 1;
  f.tag = 42;
  f.channel = 2;
  f.etype = 3;
  f.payload.resize(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(decode_frame(encode_frame(f)));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FrameRoundTrip)->Arg(64)->Arg(64 << 10)->Arg(4 << 20);

void BM_SimRun(benchmark::State& state) {
  TaskGraph g = derive_edges(stencil(static_cast<std::uint32_t>(2 * state.range(0)), 8));
  RunConfig cfg;
  cfg.workers = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_graph(g, cfg));
}
BENCHMARK(BM_SimRun)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
