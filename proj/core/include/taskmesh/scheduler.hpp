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
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "taskmesh/graph.hpp"

namespace taskmesh {

/// Compute and link costs for the head plus `p` workers.
///
/// comm_time(bytes, a, b) = latency + bytes / bandwidth for a != b, and 0 on the same node.
/// Compute time defaults to the task's cost estimate scaled by a per-node speed factor.
class CostModel {
 public:
  using ComputeFn = std::function<Micros(const Task&, NodeId)>;

  CostModel(std::size_t workers, Micros latency, double bandwidth_bytes_per_us);

  std::size_t workers() const { return workers_; }
  std::size_t nodes() const { return workers_ + 1; }
  Micros latency() const { return latency_; }
  double bandwidth() const { return bandwidth_; }

  /// Node `n` runs tasks `speed` times faster than nominal.
  void set_speed(NodeId n, double speed);
  void set_compute(ComputeFn fn) { compute_ = std::move(fn); }

  Micros compute_time(const Task& task, NodeId node) const;
  Micros comm_time(std::uint64_t bytes, NodeId src, NodeId dst) const;
  /// Average cost of moving `bytes` between two distinct nodes.
  Micros mean_comm_time(std::uint64_t bytes) const;

 private:
  std::size_t workers_;
  Micros latency_;
  double bandwidth_;
  std::vector<double> speed_;
  ComputeFn compute_;
};

/// Duration a task occupies on `node`: compute for host/target tasks, the
/// head<->node transfer of its buffers for data tasks.
Micros task_duration(const TaskGraph& graph, const CostModel& cost, const Task& task, NodeId node);

/// Mean duration over the nodes the task may run on.
Micros mean_task_duration(const TaskGraph& graph, const CostModel& cost, const Task& task);

/// HEFT upward rank, indexed by TaskId.
std::vector<Micros> upward_rank(const TaskGraph& graph, const CostModel& cost);

struct Schedule {
  static constexpr NodeId kUnassigned = 0xffff;

  std::vector<NodeId> assignment;
  std::vector<Micros> est;
  std::vector<Micros> eft;
  /// Compute tasks per node, ordered by start time. Index 0 is the head.
  std::vector<std::vector<TaskId>> node_tasks;
  /// Order in which tasks were placed.
  std::vector<TaskId> placement_order;
  Micros makespan = 0;
  /// EFT work units: each evaluation of a task on a candidate node costs (in-degree + 1).
  std::uint64_t eft_work = 0;

  NodeId node_of(TaskId t) const { return assignment.at(t.value()); }
};

/// Insertion-based HEFT with host pinning and data-task co-location.
Schedule heft_schedule(const TaskGraph& graph, const CostModel& cost);

/// Counted EFT work of a finished schedule. Bounded by kScheduleCostConstant * e * p for
/// graphs where every task has at least one incident edge.
std::uint64_t schedule_cost(const Schedule& schedule);
inline constexpr double kScheduleCostConstant = 3.0;

/// Independent post-hoc validation of a schedule. Empty result means valid.
std::vector<std::string> check_schedule(const TaskGraph& graph, const CostModel& cost,
                                        const Schedule& schedule);

/// CSV: task_id,node,est_us,eft_us
void write_schedule_csv(std::ostream& os, const Schedule& schedule);

}  // namespace taskmesh
