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

#include "taskmesh/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>

namespace taskmesh {

namespace {

constexpr double kTimeEps = 1e-6;

std::uint64_t task_bytes(const TaskGraph& graph, const Task& t) {
  std::uint64_t total = 0;
  for (const auto& d : t.deps) total += graph.buffer(d.buffer).size_bytes;
  return total;
}

}  // namespace

CostModel::CostModel(std::size_t workers, Micros latency, double bandwidth_bytes_per_us)
    : workers_(workers), latency_(latency), bandwidth_(bandwidth_bytes_per_us),
      speed_(workers + 1, 1.0) {
  if (latency < 0) throw Error(ErrorCode::InvalidSpec, "negative latency");
  if (!(bandwidth_bytes_per_us > 0)) throw Error(ErrorCode::InvalidSpec, "bandwidth must be > 0");
}

void CostModel::set_speed(NodeId n, double speed) { speed_.at(n) = speed; }

Micros CostModel::compute_time(const Task& task, NodeId node) const {
  if (compute_) return compute_(task, node);
  return task.cost_estimate / speed_.at(node);
}

Micros CostModel::comm_time(std::uint64_t bytes, NodeId src, NodeId dst) const {
  if (src == dst) return 0;
  return latency_ + static_cast<double>(bytes) / bandwidth_;
}

Micros CostModel::mean_comm_time(std::uint64_t bytes) const {
  return latency_ + static_cast<double>(bytes) / bandwidth_;
}

Micros task_duration(const TaskGraph& graph, const CostModel& cost, const Task& task, NodeId node) {
  switch (task.kind) {
    case TaskKind::TargetDataEnter: return cost.comm_time(task_bytes(graph, task), kHeadNode, node);
    case TaskKind::TargetDataExit: return cost.comm_time(task_bytes(graph, task), node, kHeadNode);
    default: return cost.compute_time(task, node);
  }
}

Micros mean_task_duration(const TaskGraph& graph, const CostModel& cost, const Task& task) {
  if (task.kind == TaskKind::HostTask) return cost.compute_time(task, kHeadNode);
  if (cost.workers() == 0) return is_data_task(task.kind) ? 0 : cost.compute_time(task, kHeadNode);
  Micros sum = 0;
  for (NodeId n = 1; n <= cost.workers(); ++n) sum += task_duration(graph, cost, task, n);
  return sum / static_cast<double>(cost.workers());
}

std::vector<Micros> upward_rank(const TaskGraph& graph, const CostModel& cost) {
  const auto n = graph.task_count();
  std::vector<Micros> rank(n, 0);
  // Edges only point forward in program order, so a reverse sweep is a reverse topological order.
  for (std::size_t i = n; i-- > 0;) {
    TaskId t{static_cast<std::uint32_t>(i)};
    Micros best = 0;
    for (auto ei : graph.out_edges(t)) {
      const Edge& e = graph.edge(ei);
      Micros c = cost.mean_comm_time(graph.buffer(e.buffer).size_bytes) + rank[e.consumer.value()];
      best = std::max(best, c);
    }
    rank[i] = mean_task_duration(graph, cost, graph.task(t)) + best;
  }
  return rank;
}

namespace {

struct Interval {
  Micros start;
  Micros finish;
  TaskId task;
};

class HeftPlanner {
 public:
  HeftPlanner(const TaskGraph& graph, const CostModel& cost) : graph_(graph), cost_(cost) {
    const auto n = graph.task_count();
    s_.assignment.assign(n, Schedule::kUnassigned);
    s_.est.assign(n, 0);
    s_.eft.assign(n, 0);
    s_.node_tasks.assign(cost.nodes(), {});
    timeline_.assign(cost.nodes(), {});
    deferred_.assign(n, false);
    placed_seq_.assign(n, std::numeric_limits<std::size_t>::max());
  }

  Schedule run() {
    const auto n = graph_.task_count();
    const auto rank = upward_rank(graph_, cost_);
    std::vector<TaskId> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = TaskId{i};
    std::stable_sort(order.begin(), order.end(), [&](TaskId a, TaskId b) {
      return rank[a.value()] > rank[b.value()];
    });

    for (TaskId t : order) {
      const Task& task = graph_.task(t);
      switch (task.kind) {
        case TaskKind::HostTask: place_compute(t, {kHeadNode}); break;
        case TaskKind::TargetTask: place_target(t); break;
        default: place_data(t); break;
      }
    }
    // A deferred data task whose adjacent compute tasks never materialized stays on the head.
    for (std::uint32_t i = 0; i < n; ++i) {
      if (s_.assignment[i] == Schedule::kUnassigned) commit_data(TaskId{i}, kHeadNode);
    }
    for (std::size_t node = 0; node < timeline_.size(); ++node) {
      for (const auto& iv : timeline_[node]) s_.node_tasks[node].push_back(iv.task);
    }
    s_.makespan = 0;
    for (std::uint32_t i = 0; i < n; ++i) s_.makespan = std::max(s_.makespan, s_.eft[i]);
    return std::move(s_);
  }

 private:
  void place_target(TaskId t) {
    if (cost_.workers() == 0) throw Error(ErrorCode::NoWorkers, "graph has target tasks but p = 0");
    std::vector<NodeId> candidates;
    for (NodeId n = 1; n <= cost_.workers(); ++n) candidates.push_back(n);
    place_compute(t, candidates);
  }

  // Earliest time all of `t`'s inputs can be present on `node`.
  Micros data_ready(TaskId t, NodeId node) const {
    Micros ready = 0;
    for (auto ei : graph_.in_edges(t)) {
      const Edge& e = graph_.edge(ei);
      const auto u = e.producer.value();
      Micros arrive;
      if (s_.assignment[u] != Schedule::kUnassigned) {
        arrive = s_.eft[u] + cost_.comm_time(graph_.buffer(e.buffer).size_bytes, s_.assignment[u], node);
      } else if (deferred_[u]) {
        // Would be co-located with `t`.
        arrive = data_ready(e.producer, node) +
                 task_duration(graph_, cost_, graph_.task(e.producer), node);
      } else {
        arrive = 0;
      }
      ready = std::max(ready, arrive);
    }
    return ready;
  }

  // Earliest start >= ready on `node` where `duration` fits in an idle gap.
  Micros insertion_start(NodeId node, Micros ready, Micros duration) const {
    Micros candidate = ready;
    for (const auto& iv : timeline_[node]) {
      if (candidate + duration <= iv.start + kTimeEps) return candidate;
      candidate = std::max(candidate, iv.finish);
    }
    return candidate;
  }

  void place_compute(TaskId t, const std::vector<NodeId>& candidates) {
    const Task& task = graph_.task(t);
    const auto indeg = graph_.in_edges(t).size();
    NodeId best_node = candidates.front();
    Micros best_start = 0;
    Micros best_finish = std::numeric_limits<Micros>::infinity();
    for (NodeId node : candidates) {
      s_.eft_work += indeg + 1;
      const Micros dur = task_duration(graph_, cost_, task, node);
      const Micros start = insertion_start(node, data_ready(t, node), dur);
      const Micros finish = start + dur;
      if (finish < best_finish - kTimeEps) {
        best_finish = finish;
        best_start = start;
        best_node = node;
      }
    }
    // Deferred data predecessors follow their first consumer.
    for (auto ei : graph_.in_edges(t)) {
      const auto u = graph_.edge(ei).producer;
      if (deferred_[u.value()] && s_.assignment[u.value()] == Schedule::kUnassigned) {
        commit_data(u, best_node);
      }
    }
    assign(t, best_node, best_start, best_finish);
    auto& tl = timeline_[best_node];
    Interval iv{best_start, best_finish, t};
    tl.insert(std::upper_bound(tl.begin(), tl.end(), iv,
                               [](const Interval& a, const Interval& b) { return a.start < b.start; }),
              iv);
  }

  void place_data(TaskId t) {
    if (s_.assignment[t.value()] != Schedule::kUnassigned) return;
    // Co-locate with the first already placed adjacent compute task.
    std::optional<TaskId> first;
    bool has_compute_neighbor = false;
    auto consider = [&](TaskId other) {
      if (!is_compute_task(graph_.task(other).kind)) return;
      has_compute_neighbor = true;
      if (placed_seq_[other.value()] == std::numeric_limits<std::size_t>::max()) return;
      if (!first || placed_seq_[other.value()] < placed_seq_[first->value()]) first = other;
    };
    for (auto ei : graph_.in_edges(t)) consider(graph_.edge(ei).producer);
    for (auto ei : graph_.out_edges(t)) consider(graph_.edge(ei).consumer);

    if (first) {
      commit_data(t, s_.assignment[first->value()]);
      s_.eft_work += graph_.in_edges(t).size() + 1;
    } else if (has_compute_neighbor) {
      deferred_[t.value()] = true;
    } else {
      commit_data(t, kHeadNode);
      s_.eft_work += graph_.in_edges(t).size() + 1;
    }
  }

  void commit_data(TaskId t, NodeId node) {
    const Micros start = data_ready(t, node);
    const Micros finish = start + task_duration(graph_, cost_, graph_.task(t), node);
    assign(t, node, start, finish);
  }

  void assign(TaskId t, NodeId node, Micros start, Micros finish) {
    s_.assignment[t.value()] = node;
    s_.est[t.value()] = start;
    s_.eft[t.value()] = finish;
    placed_seq_[t.value()] = seq_++;
    s_.placement_order.push_back(t);
  }

  const TaskGraph& graph_;
  const CostModel& cost_;
  Schedule s_;
  std::vector<std::vector<Interval>> timeline_;
  std::vector<bool> deferred_;
  std::vector<std::size_t> placed_seq_;
  std::size_t seq_ = 0;
};

}  // namespace

Schedule heft_schedule(const TaskGraph& graph, const CostModel& cost) {
  return HeftPlanner(graph, cost).run();
}

std::uint64_t schedule_cost(const Schedule& schedule) { return schedule.eft_work; }

std::vector<std::string> check_schedule(const TaskGraph& graph, const CostModel& cost,
                                        const Schedule& s) {
  std::vector<std::string> bad;
  const auto n = graph.task_count();
  auto fail = [&](std::uint32_t t, const std::string& why) {
    bad.push_back("task " + std::to_string(t) + ": " + why);
  };
  if (s.assignment.size() != n || s.est.size() != n || s.eft.size() != n) {
    bad.push_back("schedule size does not match graph");
    return bad;
  }
  const double tol = 1e-6;
  Micros makespan = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const Task& t = graph.tasks()[i];
    const NodeId node = s.assignment[i];
    makespan = std::max(makespan, s.eft[i]);
    if (node >= cost.nodes()) {
      fail(i, "assigned to a node outside the cluster");
      continue;
    }
    if (t.kind == TaskKind::HostTask && node != kHeadNode) fail(i, "host task not on the head");
    if (t.kind == TaskKind::TargetTask && node == kHeadNode) fail(i, "target task on the head");
    if (s.est[i] < -tol) fail(i, "negative start");
    const Micros dur = task_duration(graph, cost, t, node);
    if (std::abs((s.eft[i] - s.est[i]) - dur) > tol * std::max(1.0, dur)) {
      fail(i, "finish - start differs from duration");
    }
    if (is_data_task(t.kind)) {
      std::vector<NodeId> neighbor_nodes;
      for (auto ei : graph.in_edges(t.id)) {
        const auto& u = graph.task(graph.edge(ei).producer);
        if (is_compute_task(u.kind)) neighbor_nodes.push_back(s.assignment[u.id.value()]);
      }
      for (auto ei : graph.out_edges(t.id)) {
        const auto& v = graph.task(graph.edge(ei).consumer);
        if (is_compute_task(v.kind)) neighbor_nodes.push_back(s.assignment[v.id.value()]);
      }
      if (neighbor_nodes.empty()) {
        if (node != kHeadNode) fail(i, "unattached data task not on the head");
      } else if (std::find(neighbor_nodes.begin(), neighbor_nodes.end(), node) == neighbor_nodes.end()) {
        fail(i, "data task not co-located with an adjacent compute task");
      }
    }
  }
  for (const Edge& e : graph.edges()) {
    const auto u = e.producer.value();
    const auto v = e.consumer.value();
    Micros need = s.eft[u];
    if (s.assignment[u] != s.assignment[v]) {
      need += cost.comm_time(graph.buffer(e.buffer).size_bytes, s.assignment[u], s.assignment[v]);
    }
    if (s.est[v] + tol < need) {
      fail(v, "starts before predecessor " + std::to_string(u) + " data can arrive");
    }
  }
  // Compute intervals on each node must not overlap.
  std::vector<std::vector<std::pair<Micros, Micros>>> per_node(cost.nodes());
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!is_compute_task(graph.tasks()[i].kind)) continue;
    if (s.assignment[i] < cost.nodes()) per_node[s.assignment[i]].push_back({s.est[i], s.eft[i]});
  }
  for (std::size_t node = 0; node < per_node.size(); ++node) {
    auto& iv = per_node[node];
    std::sort(iv.begin(), iv.end());
    for (std::size_t k = 1; k < iv.size(); ++k) {
      if (iv[k].first + tol < iv[k - 1].second) {
        bad.push_back("node " + std::to_string(node) + ": overlapping compute intervals");
      }
    }
  }
  if (std::abs(makespan - s.makespan) > tol) bad.push_back("makespan is not the latest finish");
  return bad;
}

void write_schedule_csv(std::ostream& os, const Schedule& s) {
  os << "task_id,node,est_us,eft_us\n";
  char line[128];
  for (std::size_t i = 0; i < s.assignment.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%u,%.3f,%.3f\n", i, static_cast<unsigned>(s.assignment[i]),
                  s.est[i], s.eft[i]);
    os << line;
  }
}

}  // namespace taskmesh
