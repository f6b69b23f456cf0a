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

#include "taskmesh/bench.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace taskmesh {

const char* to_string(Pattern p) {
  switch (p) {
    case Pattern::Trivial: return "trivial";
    case Pattern::Stencil1D: return "stencil1d";
    case Pattern::FFT: return "fft";
    case Pattern::Tree: return "tree";
  }
  return "?";
}

Pattern parse_pattern(std::string_view name) {
  if (name == "trivial") return Pattern::Trivial;
  if (name == "stencil1d" || name == "stencil") return Pattern::Stencil1D;
  if (name == "fft") return Pattern::FFT;
  if (name == "tree") return Pattern::Tree;
  throw Error(ErrorCode::InvalidSpec, "unknown pattern '" + std::string(name) + "'");
}

BenchSpec weak_scaling_spec(Pattern pattern, std::size_t nodes, std::uint64_t iterations, double ccr) {
  BenchSpec s;
  s.pattern = pattern;
  s.nodes = nodes;
  s.width = static_cast<std::uint32_t>(2 * nodes);
  s.steps = 32;
  s.iterations_per_task = iterations;
  s.ccr = ccr;
  return s;
}

void validate_spec(const BenchSpec& s) {
  if (s.width < 1 || s.steps < 1) throw Error(ErrorCode::InvalidSpec, "width and steps must be >= 1");
  if (!(s.ccr > 0)) throw Error(ErrorCode::InvalidSpec, "ccr must be > 0");
  if (!(s.iterations_per_us > 0)) throw Error(ErrorCode::InvalidSpec, "iterations_per_us must be > 0");
  if ((s.pattern == Pattern::FFT || s.pattern == Pattern::Tree) && !std::has_single_bit(s.width)) {
    throw Error(ErrorCode::InvalidSpec, std::string(to_string(s.pattern)) + " needs a power-of-two width");
  }
}

std::vector<std::uint32_t> pattern_inputs(Pattern pattern, std::uint32_t width, std::uint32_t t, std::uint32_t i) {
  std::vector<std::uint32_t> in;
  if (t == 0) return in;
  const std::uint32_t levels = std::bit_width(width) - 1;  // log2 for powers of two
  switch (pattern) {
    case Pattern::Trivial:
      break;
    case Pattern::Stencil1D:
      for (std::int64_t j = std::int64_t{i} - 1; j <= std::int64_t{i} + 1; ++j) {
        if (j >= 0 && j < width) in.push_back(static_cast<std::uint32_t>(j));
      }
      break;
    case Pattern::FFT:
      in.push_back(i);
      if (levels > 0) in.push_back(i ^ (1u << ((t - 1) % levels)));
      break;
    case Pattern::Tree: {
      in.push_back(i);
      if (levels == 0) break;
      const std::uint32_t phase = (t - 1) % (2 * levels);
      if (phase < levels) {
        const std::uint32_t s = 1u << phase;
        if (i % (2 * s) == 0) in.push_back(i + s);
      } else {
        const std::uint32_t s = 1u << (levels - 1 - (phase - levels));
        if (i % (2 * s) == s) in.push_back(i - s);
      }
      break;
    }
  }
  std::sort(in.begin(), in.end());
  in.erase(std::unique(in.begin(), in.end()), in.end());
  return in;
}

std::uint32_t max_inputs(Pattern pattern, std::uint32_t width) {
  switch (pattern) {
    case Pattern::Trivial: return 1;
    case Pattern::Stencil1D: return std::min<std::uint32_t>(3, width);
    case Pattern::FFT:
    case Pattern::Tree: return width > 1 ? 2 : 1;
  }
  return 1;
}

std::uint64_t size_buffers(const BenchSpec& spec, const CostModel& cost, Micros compute_us) {
  const double d = max_inputs(spec.pattern, spec.width);
  const double budget = compute_us / spec.ccr - d * cost.latency();
  const double bytes = budget * cost.bandwidth() / d;
  if (!(bytes >= 1)) return 1;
  return static_cast<std::uint64_t>(std::llround(bytes));
}

Program generate(const BenchSpec& spec) {
  validate_spec(spec);
  Program p;
  const Micros cost = std::max(1e-3, static_cast<double>(spec.iterations_per_task) / spec.iterations_per_us);
  std::vector<BufferId> prev, cur;
  for (std::uint32_t t = 0; t < spec.steps; ++t) {
    cur.clear();
    for (std::uint32_t i = 0; i < spec.width; ++i) {
      cur.push_back(p.add_buffer(spec.buffer_bytes));
      p.add_enter_data(cur.back());
    }
    for (std::uint32_t i = 0; i < spec.width; ++i) {
      std::vector<Dependency> deps{{cur[i], DepDirection::InOut}};
      for (std::uint32_t j : pattern_inputs(spec.pattern, spec.width, t, i)) deps.push_back({prev[j], DepDirection::In});
      p.add_task(TaskKind::TargetTask, std::move(deps), cost, KernelDescriptor{spec.iterations_per_task, 0});
    }
    for (BufferId b : prev) p.add_exit_data(b);
    prev = cur;
  }
  for (BufferId b : prev) p.add_exit_data(b);
  p.seal();
  return p;
}

TaskId cell_task(const Program&, const BenchSpec& spec, std::uint32_t t, std::uint32_t i) {
  // Step 0: w enters + w tasks. Later steps: w enters + w tasks + w exits.
  const std::uint32_t w = spec.width;
  const std::uint32_t base = t == 0 ? 0 : 2 * w + (t - 1) * 3 * w;
  return TaskId(base + w + i);
}

}  // namespace taskmesh
