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

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taskmesh/common.hpp"

namespace taskmesh {

enum class DepDirection : std::uint8_t { In, Out, InOut };

enum class TaskKind : std::uint8_t { HostTask, TargetTask, TargetDataEnter, TargetDataExit };

const char* to_string(DepDirection dir);
const char* to_string(TaskKind kind);

inline bool reads(DepDirection d) { return d != DepDirection::Out; }
inline bool writes(DepDirection d) { return d != DepDirection::In; }

inline bool is_data_task(TaskKind k) {
  return k == TaskKind::TargetDataEnter || k == TaskKind::TargetDataExit;
}
/// Tasks that occupy a processor (head or worker) while they run.
inline bool is_compute_task(TaskKind k) { return !is_data_task(k); }

/// What a target or host task runs: a busy loop plus deterministic output writes.
struct KernelDescriptor {
  std::uint64_t iterations = 0;
  /// Bytes written into each Out/InOut buffer; 0 means the whole buffer.
  std::uint64_t output_bytes = 0;

  friend bool operator==(const KernelDescriptor&, const KernelDescriptor&) = default;
};

struct Dependency {
  BufferId buffer;
  DepDirection direction;

  friend bool operator==(const Dependency&, const Dependency&) = default;
};

struct Buffer {
  BufferId id;
  std::uint64_t size_bytes = 0;
};

struct Task {
  TaskId id;
  TaskKind kind = TaskKind::TargetTask;
  std::vector<Dependency> deps;
  Micros cost_estimate = 0;
  KernelDescriptor payload;
  /// Exit-data only: drop every device copy after retrieving to the head.
  bool release = true;
  /// Buffers the task body actually writes, when known. Checked by validate().
  std::vector<BufferId> observed_writes;

  const Dependency* find_dep(BufferId b) const;
};

/// A program under construction: buffers plus tasks in program order.
class Program {
 public:
  BufferId add_buffer(std::uint64_t size_bytes);

  /// Appends a task and returns its dense id. Data tasks store cost 0.
  TaskId add_task(TaskKind kind, std::vector<Dependency> deps, Micros cost_estimate = 0,
                  KernelDescriptor payload = {});

  TaskId add_enter_data(BufferId buffer);
  TaskId add_exit_data(BufferId buffer, bool release = true);

  /// Records that a task's body writes `buffer`, regardless of its declared deps.
  void record_write(TaskId task, BufferId buffer);

  void seal() { sealed_ = true; }
  bool sealed() const { return sealed_; }

  std::span<const Task> tasks() const { return tasks_; }
  std::span<const Buffer> buffers() const { return buffers_; }
  const Buffer& buffer(BufferId id) const;

 private:
  void check_open() const;

  std::vector<Task> tasks_;
  std::vector<Buffer> buffers_;
  bool sealed_ = false;
};

struct Edge {
  TaskId producer;
  TaskId consumer;
  BufferId buffer;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable precedence DAG over a sealed program.
class TaskGraph {
 public:
  TaskGraph() = default;
  TaskGraph(std::vector<Task> tasks, std::vector<Buffer> buffers, std::vector<Edge> edges);

  std::span<const Task> tasks() const { return tasks_; }
  std::span<const Buffer> buffers() const { return buffers_; }
  std::span<const Edge> edges() const { return edges_; }

  std::size_t task_count() const { return tasks_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const Task& task(TaskId id) const { return tasks_.at(id.value()); }
  const Buffer& buffer(BufferId id) const { return buffers_.at(id.value()); }

  /// Indices into edges() leaving / entering `id`.
  std::span<const std::uint32_t> out_edges(TaskId id) const { return succ_.at(id.value()); }
  std::span<const std::uint32_t> in_edges(TaskId id) const { return pred_.at(id.value()); }

  const Edge& edge(std::uint32_t index) const { return edges_[index]; }

 private:
  std::vector<Task> tasks_;
  std::vector<Buffer> buffers_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::uint32_t>> succ_;
  std::vector<std::vector<std::uint32_t>> pred_;
};

/// Builds the precedence DAG with serial program-order semantics (RAW, WAW, WAR).
TaskGraph derive_edges(const Program& program);

struct Violation {
  TaskId task;
  std::string what;
};

/// Structural checks; never throws.
std::vector<Violation> validate(const TaskGraph& graph);

/// Text export, see docs/formats.md.
void write_graph_text(std::ostream& os, const TaskGraph& graph);

struct GraphText {
  struct Node {
    TaskId id;
    TaskKind kind;
    Micros cost;
  };
  std::vector<Node> nodes;
  std::vector<Edge> edges;
};

GraphText read_graph_text(std::istream& is);

TaskKind parse_task_kind(std::string_view name);

}  // namespace taskmesh
