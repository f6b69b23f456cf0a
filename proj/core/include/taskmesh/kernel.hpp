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
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "taskmesh/frame.hpp"
#include "taskmesh/graph.hpp"

namespace taskmesh {

/// Node-local buffer contents. Thread-safe.
class BufferStore {
 public:
  void put(BufferId id, Bytes data);
  std::optional<Bytes> get(BufferId id) const;
  bool contains(BufferId id) const;
  bool erase(BufferId id);
  std::size_t size() const;
  std::map<BufferId, Bytes> snapshot() const;

  /// Runs `fn` on the live map under the store lock.
  template <typename Fn>
  auto with_lock(Fn&& fn) {
    std::lock_guard lk(mu_);
    return fn(data_);
  }

 private:
  mutable std::mutex mu_;
  std::map<BufferId, Bytes> data_;
};

/// Content a buffer has before any task writes it.
Bytes initial_content(BufferId id, std::uint64_t size);

/// Spins for `iterations` rounds of a dependent integer recurrence.
std::uint64_t busy_loop(std::uint64_t iterations);

/// Iterations per microsecond of busy_loop on this machine.
double calibrate_iterations_per_us(Micros sample_us = 20000);

struct ExecuteDep {
  BufferId buffer;
  DepDirection direction;
  std::uint64_t size = 0;
};

/// Everything a worker needs to run one task.
struct ExecuteArgs {
  TaskId task;
  KernelDescriptor kernel;
  std::vector<ExecuteDep> deps;

  Bytes encode() const;
  static ExecuteArgs decode(std::span<const std::byte> bytes);
  static ExecuteArgs from_task(const TaskGraph& graph, const Task& task);
};

/// Deterministic data effect of a task: hashes the inputs with the task id, then fills
/// the written buffers. Throws MissingBuffer when a read buffer is absent.
void apply_kernel(const ExecuteArgs& args, std::map<BufferId, Bytes>& buffers);

/// apply_kernel against a store, plus the busy loop when `spin`. Returns elapsed microseconds.
Micros run_kernel(const ExecuteArgs& args, BufferStore& store, bool spin);

/// Serial single-node execution of every compute task in program order.
std::map<BufferId, Bytes> serial_reference(const TaskGraph& graph);

}  // namespace taskmesh
