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
#include <string>
#include <string_view>
#include <vector>

#include "taskmesh/graph.hpp"
#include "taskmesh/scheduler.hpp"

namespace taskmesh {

enum class Pattern { Trivial, Stencil1D, FFT, Tree };

const char* to_string(Pattern p);
Pattern parse_pattern(std::string_view name);

struct BenchSpec {
  Pattern pattern = Pattern::Trivial;
  std::uint32_t width = 1;
  std::uint32_t steps = 1;
  std::uint64_t iterations_per_task = 0;
  double ccr = 1.0;
  std::size_t nodes = 1;
  /// Bytes per cell buffer. 0 leaves buffers empty.
  std::uint64_t buffer_bytes = 0;
  /// Kernel speed used for task cost estimates.
  double iterations_per_us = 200.0;
};

/// Weak scaling: a 2n x 32 grid for n worker nodes.
BenchSpec weak_scaling_spec(Pattern pattern, std::size_t nodes, std::uint64_t iterations, double ccr);

/// Throws InvalidSpec.
void validate_spec(const BenchSpec& spec);

/// Cells of step t-1 that cell (t, i) reads, ascending. Empty for t = 0.
std::vector<std::uint32_t> pattern_inputs(Pattern pattern, std::uint32_t width, std::uint32_t t, std::uint32_t i);

/// Largest number of inputs any cell has, at least 1.
std::uint32_t max_inputs(Pattern pattern, std::uint32_t width);

/// Bytes per dependency so one task's communication takes compute_us / ccr:
///   bytes = (T / ccr - d * latency) * bandwidth / d, clamped to >= 1.
std::uint64_t size_buffers(const BenchSpec& spec, const CostModel& cost, Micros compute_us);

/// A grid of width x steps target tasks. Cell (t, i) owns one buffer, written InOut by its
/// task and read by the pattern's successors. Per step: enter-data for the step's buffers,
/// the step's tasks, then exit-data for the previous step's buffers.
Program generate(const BenchSpec& spec);

/// Task id of cell (t, i) in generate()'s output.
TaskId cell_task(const Program& program, const BenchSpec& spec, std::uint32_t t, std::uint32_t i);

}  // namespace taskmesh
