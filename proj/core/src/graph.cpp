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

#include "taskmesh/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace taskmesh {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownBuffer: return "UnknownBuffer";
    case ErrorCode::ProgramSealed: return "ProgramSealed";
    case ErrorCode::InvalidTask: return "InvalidTask";
    case ErrorCode::NoWorkers: return "NoWorkers";
    case ErrorCode::Unregistered: return "Unregistered";
    case ErrorCode::DeadDestination: return "DeadDestination";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::PeerDown: return "PeerDown";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::FrameError: return "FrameError";
    case ErrorCode::EventFailed: return "EventFailed";
    case ErrorCode::MissingBuffer: return "MissingBuffer";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TraceError: return "TraceError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

const char* to_string(DepDirection dir) {
  switch (dir) {
    case DepDirection::In: return "in";
    case DepDirection::Out: return "out";
    case DepDirection::InOut: return "inout";
  }
  return "?";
}

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::HostTask: return "HostTask";
    case TaskKind::TargetTask: return "TargetTask";
    case TaskKind::TargetDataEnter: return "TargetDataEnter";
    case TaskKind::TargetDataExit: return "TargetDataExit";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  for (auto k : {TaskKind::HostTask, TaskKind::TargetTask, TaskKind::TargetDataEnter,
                 TaskKind::TargetDataExit}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::TraceError, "unknown task kind '" + std::string(name) + "'");
}

const Dependency* Task::find_dep(BufferId b) const {
  auto it = std::find_if(deps.begin(), deps.end(), [b](const Dependency& d) { return d.buffer == b; });
  return it == deps.end() ? nullptr : &*it;
}

// ---------------------------------------------------------------------------
// Program

void Program::check_open() const {
  if (sealed_) throw Error(ErrorCode::ProgramSealed, "program already sealed");
}

BufferId Program::add_buffer(std::uint64_t size_bytes) {
  check_open();
  BufferId id{static_cast<std::uint32_t>(buffers_.size())};
  buffers_.push_back(Buffer{id, size_bytes});
  return id;
}

const Buffer& Program::buffer(BufferId id) const {
  if (id.value() >= buffers_.size()) {
    throw Error(ErrorCode::UnknownBuffer, "buffer " + std::to_string(id.value()));
  }
  return buffers_[id.value()];
}

TaskId Program::add_task(TaskKind kind, std::vector<Dependency> deps, Micros cost_estimate,
                         KernelDescriptor payload) {
  check_open();
  std::unordered_set<BufferId> seen;
  for (const auto& d : deps) {
    (void)buffer(d.buffer);
    if (!seen.insert(d.buffer).second) {
      throw Error(ErrorCode::InvalidTask,
                  "buffer " + std::to_string(d.buffer.value()) + " listed twice");
    }
  }
  if (is_data_task(kind)) {
    if (deps.empty()) throw Error(ErrorCode::InvalidTask, "data task without dependencies");
    cost_estimate = 0;
  }
  if (kind == TaskKind::TargetTask && !(cost_estimate > 0)) {
    throw Error(ErrorCode::InvalidTask, "target task needs a positive cost estimate");
  }
  TaskId id{static_cast<std::uint32_t>(tasks_.size())};
  Task t;
  t.id = id;
  t.kind = kind;
  t.deps = std::move(deps);
  t.cost_estimate = cost_estimate;
  t.payload = payload;
  tasks_.push_back(std::move(t));
  return id;
}

TaskId Program::add_enter_data(BufferId buffer) {
  return add_task(TaskKind::TargetDataEnter, {{buffer, DepDirection::Out}});
}

TaskId Program::add_exit_data(BufferId buffer, bool release) {
  TaskId id = add_task(TaskKind::TargetDataExit, {{buffer, DepDirection::Out}});
  tasks_.back().release = release;
  return id;
}

void Program::record_write(TaskId task, BufferId buffer_id) {
  check_open();
  (void)buffer(buffer_id);
  tasks_.at(task.value()).observed_writes.push_back(buffer_id);
}

// ---------------------------------------------------------------------------
// TaskGraph

TaskGraph::TaskGraph(std::vector<Task> tasks, std::vector<Buffer> buffers, std::vector<Edge> edges)
    : tasks_(std::move(tasks)), buffers_(std::move(buffers)), edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  succ_.resize(tasks_.size());
  pred_.resize(tasks_.size());
  for (std::uint32_t i = 0; i < edges_.size(); ++i) {
    succ_.at(edges_[i].producer.value()).push_back(i);
    pred_.at(edges_[i].consumer.value()).push_back(i);
  }
}

TaskGraph derive_edges(const Program& program) {
  struct Access {
    std::optional<TaskId> last_writer;
    std::vector<TaskId> readers_since_write;
  };
  std::vector<Access> state(program.buffers().size());
  std::vector<Edge> edges;

  for (const Task& t : program.tasks()) {
    for (const Dependency& d : t.deps) {
      Access& acc = state[d.buffer.value()];
      // RAW and WAW both collapse onto the last writer.
      if (acc.last_writer) edges.push_back({*acc.last_writer, t.id, d.buffer});
      if (writes(d.direction)) {
        for (TaskId r : acc.readers_since_write) {
          if (r != t.id) edges.push_back({r, t.id, d.buffer});
        }
        acc.readers_since_write.clear();
        acc.last_writer = t.id;
      } else {
        acc.readers_since_write.push_back(t.id);
      }
    }
  }
  return TaskGraph(std::vector<Task>(program.tasks().begin(), program.tasks().end()),
                   std::vector<Buffer>(program.buffers().begin(), program.buffers().end()),
                   std::move(edges));
}

std::vector<Violation> validate(const TaskGraph& graph) {
  std::vector<Violation> out;
  const auto n = graph.task_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Task& t = graph.tasks()[i];
    if (t.id.value() != i) out.push_back({t.id, "task id does not match its position"});
    std::unordered_set<BufferId> seen;
    for (const auto& d : t.deps) {
      if (d.buffer.value() >= graph.buffers().size()) {
        out.push_back({t.id, "unknown buffer " + std::to_string(d.buffer.value())});
      }
      if (!seen.insert(d.buffer).second) {
        out.push_back({t.id, "buffer " + std::to_string(d.buffer.value()) + " listed twice"});
      }
    }
    if (is_data_task(t.kind) && t.deps.empty()) out.push_back({t.id, "data task without deps"});
    if (t.kind == TaskKind::TargetTask && !(t.cost_estimate > 0)) {
      out.push_back({t.id, "non-positive cost estimate"});
    }
    if (t.kind == TaskKind::TargetTask) {
      for (BufferId w : t.observed_writes) {
        const Dependency* d = t.find_dep(w);
        if (d == nullptr || !writes(d->direction)) {
          out.push_back({t.id, "undeclared write to buffer " + std::to_string(w.value())});
        }
      }
    }
  }
  for (const Edge& e : graph.edges()) {
    if (!(e.producer < e.consumer)) {
      out.push_back({e.consumer, "edge does not go forward in program order"});
      continue;
    }
    if (e.consumer.value() >= n) {
      out.push_back({e.producer, "edge to unknown task"});
      continue;
    }
    if (graph.task(e.producer).find_dep(e.buffer) == nullptr ||
        graph.task(e.consumer).find_dep(e.buffer) == nullptr) {
      out.push_back({e.consumer, "edge buffer missing from an endpoint's dep list"});
    }
  }
  return out;
}

void write_graph_text(std::ostream& os, const TaskGraph& graph) {
  os << "# taskmesh-graph v1\n";
  os << "nodes " << graph.task_count() << "\n";
  char cost[64];
  for (const Task& t : graph.tasks()) {
    std::snprintf(cost, sizeof cost, "%.3f", t.cost_estimate);
    os << t.id.value() << ' ' << to_string(t.kind) << ' ' << cost << "\n";
  }
  os << "edges " << graph.edge_count() << "\n";
  for (const Edge& e : graph.edges()) {
    os << e.producer.value() << ' ' << e.consumer.value() << ' ' << e.buffer.value() << "\n";
  }
}

GraphText read_graph_text(std::istream& is) {
  GraphText g;
  std::string line;
  enum { Header, Nodes, Edges } section = Header;
  std::size_t remaining = 0;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::TraceError, "graph text line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (remaining == 0) {
      std::string word;
      ls >> word >> remaining;
      if (word == "nodes") section = Nodes;
      else if (word == "edges") section = Edges;
      else fail("expected 'nodes' or 'edges'");
      continue;
    }
    if (section == Nodes) {
      std::uint32_t id = 0;
      std::string kind;
      double cost = 0;
      if (!(ls >> id >> kind >> cost)) fail("malformed node");
      g.nodes.push_back({TaskId{id}, parse_task_kind(kind), cost});
    } else if (section == Edges) {
      std::uint32_t s = 0, d = 0, b = 0;
      if (!(ls >> s >> d >> b)) fail("malformed edge");
      g.edges.push_back({TaskId{s}, TaskId{d}, BufferId{b}});
    } else {
      fail("unexpected content");
    }
    --remaining;
  }
  return g;
}

}  // namespace taskmesh
