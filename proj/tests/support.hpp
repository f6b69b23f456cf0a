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

#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "taskmesh/graph.hpp"
#include "taskmesh/scheduler.hpp"

namespace tmtest {

using namespace taskmesh;

using EdgeSet = std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>>;

/// enter(out A), foo(inout A), bar(inout A), exit(out A).
struct OffloadChain {
  Program program;
  BufferId a;
  TaskId enter, foo, bar, exit;
};

OffloadChain offload_chain(std::uint64_t bytes = 1024, Micros task_cost = 50000, std::uint64_t iterations = 1000);

struct RandomProgramOptions {
  std::uint32_t max_tasks = 10;
  std::uint32_t max_buffers = 3;
  bool host_tasks = true;
  bool data_tasks = true;
  std::uint64_t max_bytes = 4096;
  std::uint64_t max_iterations = 2000;
};

/// Random well-formed program. Cost estimates are whole microseconds so rank ties are exact.
Program random_program(std::mt19937_64& rng, const RandomProgramOptions& opt = {});

/// Random program shaped like an offloading region: some enter-data, compute tasks, then
/// exit-data for every buffer that was entered or touched.
Program coherence_program(std::mt19937_64& rng, std::uint32_t max_tasks = 12, std::uint32_t max_buffers = 4,
                          std::uint64_t max_iterations = 20000);

/// Pairwise RAW / WAW / WAR oracle over a program, ignoring derive_edges entirely.
EdgeSet brute_force_edges(const Program& program);
EdgeSet edge_set(const TaskGraph& graph);

/// Upward ranks by memoized recursion over successor lists.
std::vector<Micros> reference_ranks(const TaskGraph& graph, const CostModel& cost);

struct ReferencePlacement {
  std::vector<NodeId> node;
  std::vector<Micros> start;
  std::vector<Micros> finish;
};

/// Step-by-step HEFT written from the algorithm description, with host pinning and
/// data-task co-location.
ReferencePlacement reference_heft(const TaskGraph& graph, const CostModel& cost);

}  // namespace tmtest
