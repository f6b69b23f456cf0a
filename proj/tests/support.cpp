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

#include "support.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <optional>

namespace tmtest {

OffloadChain offload_chain(std::uint64_t bytes, Micros task_cost, std::uint64_t iterations) {
  OffloadChain l;
  l.a = l.program.add_buffer(bytes);
  l.enter = l.program.add_enter_data(l.a);
  l.foo = l.program.add_task(TaskKind::TargetTask, {{l.a, DepDirection::InOut}}, task_cost,
                             KernelDescriptor{iterations, 0});
  l.bar = l.program.add_task(TaskKind::TargetTask, {{l.a, DepDirection::InOut}}, task_cost,
                             KernelDescriptor{iterations, 0});
  l.exit = l.program.add_exit_data(l.a);
  l.program.seal();
  return l;
}

Program random_program(std::mt19937_64& rng, const RandomProgramOptions& opt) {
  auto pick = [&](std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  };
  Program p;
  const auto nbuf = static_cast<std::uint32_t>(pick(1, opt.max_buffers));
  for (std::uint32_t b = 0; b < nbuf; ++b) p.add_buffer(pick(1, opt.max_bytes));
  const auto ntask = static_cast<std::uint32_t>(pick(1, opt.max_tasks));
  for (std::uint32_t i = 0; i < ntask; ++i) {
    const auto roll = pick(0, 9);
    TaskKind kind = TaskKind::TargetTask;
    if (opt.host_tasks && roll == 0) kind = TaskKind::HostTask;
    if (opt.data_tasks && roll == 1) kind = TaskKind::TargetDataEnter;
    if (opt.data_tasks && roll == 2) kind = TaskKind::TargetDataExit;

    if (kind == TaskKind::TargetDataEnter) {
      p.add_enter_data(BufferId{static_cast<std::uint32_t>(pick(0, nbuf - 1))});
      continue;
    }
    if (kind == TaskKind::TargetDataExit) {
      p.add_exit_data(BufferId{static_cast<std::uint32_t>(pick(0, nbuf - 1))}, pick(0, 1) == 1);
      continue;
    }
    std::vector<Dependency> deps;
    for (std::uint32_t b = 0; b < nbuf; ++b) {
      const auto r = pick(0, 3);
      if (r == 0) continue;
      deps.push_back({BufferId{b}, r == 1 ? DepDirection::In : r == 2 ? DepDirection::Out : DepDirection::InOut});
    }
    const Micros cost = static_cast<Micros>(pick(1, 50));
    p.add_task(kind, std::move(deps), cost, KernelDescriptor{pick(0, opt.max_iterations), 0});
  }
  p.seal();
  return p;
}

Program coherence_program(std::mt19937_64& rng, std::uint32_t max_tasks, std::uint32_t max_buffers,
                          std::uint64_t max_iterations) {
  auto pick = [&](std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  };
  Program p;
  const auto nbuf = static_cast<std::uint32_t>(pick(1, max_buffers));
  for (std::uint32_t b = 0; b < nbuf; ++b) p.add_buffer(pick(1, 2048));
  std::vector<bool> used(nbuf, false);
  std::uint32_t budget = max_tasks - nbuf;
  for (std::uint32_t b = 0; b < nbuf && budget > 1; ++b) {
    if (pick(0, 1) == 0) continue;
    p.add_enter_data(BufferId{b});
    used[b] = true;
    --budget;
  }
  const auto ncompute = static_cast<std::uint32_t>(pick(1, budget));
  for (std::uint32_t i = 0; i < ncompute; ++i) {
    std::vector<Dependency> deps;
    for (std::uint32_t b = 0; b < nbuf; ++b) {
      const auto r = pick(0, 3);
      if (r == 0) continue;
      deps.push_back({BufferId{b}, r == 1 ? DepDirection::In : r == 2 ? DepDirection::Out : DepDirection::InOut});
      used[b] = true;
    }
    KernelDescriptor k{pick(0, max_iterations), pick(0, 3) == 0 ? pick(1, 64) : 0};
    const TaskKind kind = pick(0, 7) == 0 ? TaskKind::HostTask : TaskKind::TargetTask;
    p.add_task(kind, std::move(deps), static_cast<Micros>(1 + k.iterations / 200), k);
  }
  for (std::uint32_t b = 0; b < nbuf; ++b) {
    if (used[b]) p.add_exit_data(BufferId{b}, pick(0, 1) == 1);
  }
  p.seal();
  return p;
}

EdgeSet brute_force_edges(const Program& program) {
  EdgeSet out;
  const auto tasks = program.tasks();
  auto access = [&](std::size_t i, std::uint32_t b) -> std::optional<DepDirection> {
    for (const auto& d : tasks[i].deps) {
      if (d.buffer.value() == b) return d.direction;
    }
    return std::nullopt;
  };
  for (std::uint32_t b = 0; b < program.buffers().size(); ++b) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto di = access(i, b);
      if (!di) continue;
      for (std::size_t j = i + 1; j < tasks.size(); ++j) {
        const auto dj = access(j, b);
        if (!dj) continue;
        if (*di == DepDirection::In && *dj == DepDirection::In) continue;
        bool writer_between = false;
        for (std::size_t k = i + 1; k < j; ++k) {
          const auto dk = access(k, b);
          if (dk && *dk != DepDirection::In) writer_between = true;
        }
        if (!writer_between) {
          out.insert({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), b});
        }
      }
    }
  }
  return out;
}

EdgeSet edge_set(const TaskGraph& graph) {
  EdgeSet out;
  for (const Edge& e : graph.edges()) out.insert({e.producer.value(), e.consumer.value(), e.buffer.value()});
  return out;
}

namespace {

std::uint64_t dep_bytes(const TaskGraph& g, const Task& t) {
  std::uint64_t sum = 0;
  for (const auto& d : t.deps) sum += g.buffer(d.buffer).size_bytes;
  return sum;
}

Micros link(const CostModel& c, std::uint64_t bytes, NodeId a, NodeId b) {
  if (a == b) return 0;
  return c.latency() + static_cast<double>(bytes) / c.bandwidth();
}

Micros duration_on(const TaskGraph& g, const CostModel& c, const Task& t, NodeId n) {
  if (t.kind == TaskKind::TargetDataEnter) return link(c, dep_bytes(g, t), kHeadNode, n);
  if (t.kind == TaskKind::TargetDataExit) return link(c, dep_bytes(g, t), n, kHeadNode);
  return c.compute_time(t, n);
}

Micros mean_duration(const TaskGraph& g, const CostModel& c, const Task& t) {
  if (t.kind == TaskKind::HostTask) return c.compute_time(t, kHeadNode);
  Micros sum = 0;
  for (NodeId n = 1; n <= c.workers(); ++n) sum += duration_on(g, c, t, n);
  return sum / static_cast<double>(c.workers());
}

}  // namespace

std::vector<Micros> reference_ranks(const TaskGraph& graph, const CostModel& cost) {
  const auto n = graph.task_count();
  std::vector<std::vector<std::pair<std::uint32_t, std::uint64_t>>> succ(n);
  for (const Edge& e : graph.edges()) {
    succ[e.producer.value()].push_back({e.consumer.value(), graph.buffer(e.buffer).size_bytes});
  }
  std::vector<std::optional<Micros>> memo(n);
  std::function<Micros(std::uint32_t)> rank = [&](std::uint32_t t) -> Micros {
    if (memo[t]) return *memo[t];
    Micros tail = 0;
    for (auto [s, bytes] : succ[t]) {
      tail = std::max(tail, cost.latency() + static_cast<double>(bytes) / cost.bandwidth() + rank(s));
    }
    const Micros r = mean_duration(graph, cost, graph.tasks()[t]) + tail;
    memo[t] = r;
    return r;
  };
  std::vector<Micros> out(n);
  for (std::uint32_t t = 0; t < n; ++t) out[t] = rank(t);
  return out;
}

ReferencePlacement reference_heft(const TaskGraph& graph, const CostModel& cost) {
  const auto n = graph.task_count();
  const NodeId none = std::numeric_limits<NodeId>::max();
  ReferencePlacement r;
  r.node.assign(n, none);
  r.start.assign(n, 0);
  r.finish.assign(n, 0);
  std::vector<bool> parked(n, false);
  std::vector<int> placed_at(n, -1);
  int clock = 0;
  std::map<NodeId, std::vector<std::pair<Micros, Micros>>> busy;

  const auto rank = reference_ranks(graph, cost);
  std::vector<std::uint32_t> order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (rank[a] != rank[b]) return rank[a] > rank[b];
    return a < b;
  });

  std::vector<std::vector<std::pair<std::uint32_t, std::uint64_t>>> preds(n);
  std::vector<std::vector<std::uint32_t>> succs(n);
  for (const Edge& e : graph.edges()) {
    preds[e.consumer.value()].push_back({e.producer.value(), graph.buffer(e.buffer).size_bytes});
    succs[e.producer.value()].push_back(e.consumer.value());
  }

  std::function<Micros(std::uint32_t, NodeId)> inputs_at = [&](std::uint32_t t, NodeId node) -> Micros {
    Micros ready = 0;
    for (auto [u, bytes] : preds[t]) {
      Micros at = 0;
      if (r.node[u] != none) {
        at = r.finish[u] + link(cost, bytes, r.node[u], node);
      } else if (parked[u]) {
        at = inputs_at(u, node) + duration_on(graph, cost, graph.tasks()[u], node);
      }
      ready = std::max(ready, at);
    }
    return ready;
  };
  auto commit = [&](std::uint32_t t, NodeId node, Micros s, Micros f) {
    r.node[t] = node;
    r.start[t] = s;
    r.finish[t] = f;
    placed_at[t] = clock++;
  };
  auto put_data = [&](std::uint32_t t, NodeId node) {
    const Micros s = inputs_at(t, node);
    commit(t, node, s, s + duration_on(graph, cost, graph.tasks()[t], node));
  };

  for (std::uint32_t t : order) {
    const Task& task = graph.tasks()[t];
    if (is_data_task(task.kind)) {
      if (r.node[t] != none) continue;
      std::vector<std::uint32_t> adjacent;
      for (auto [u, bytes] : preds[t]) adjacent.push_back(u);
      for (auto v : succs[t]) adjacent.push_back(v);
      int best = -1;
      bool any_compute = false;
      for (auto a : adjacent) {
        if (!is_compute_task(graph.tasks()[a].kind)) continue;
        any_compute = true;
        if (placed_at[a] >= 0 && (best < 0 || placed_at[a] < placed_at[best])) best = static_cast<int>(a);
      }
      if (best >= 0) {
        put_data(t, r.node[best]);
      } else if (any_compute) {
        parked[t] = true;
      } else {
        put_data(t, kHeadNode);
      }
      continue;
    }

    std::vector<NodeId> nodes;
    if (task.kind == TaskKind::HostTask) {
      nodes.push_back(kHeadNode);
    } else {
      for (NodeId m = 1; m <= cost.workers(); ++m) nodes.push_back(m);
    }
    NodeId pick = nodes.front();
    Micros pick_s = 0;
    Micros pick_f = std::numeric_limits<Micros>::infinity();
    for (NodeId m : nodes) {
      const Micros dur = duration_on(graph, cost, task, m);
      Micros s = inputs_at(t, m);
      auto slots = busy[m];
      std::sort(slots.begin(), slots.end());
      for (auto [b, e] : slots) {
        if (s + dur <= b + 1e-6) break;
        if (e > s) s = e;
      }
      if (s + dur < pick_f - 1e-6) {
        pick = m;
        pick_s = s;
        pick_f = s + dur;
      }
    }
    for (auto [u, bytes] : preds[t]) {
      if (parked[u] && r.node[u] == none) put_data(u, pick);
    }
    commit(t, pick, pick_s, pick_f);
    busy[pick].push_back({pick_s, pick_f});
  }
  for (std::uint32_t t = 0; t < n; ++t) {
    if (r.node[t] == none) put_data(t, kHeadNode);
  }
  return r;
}

}  // namespace tmtest
