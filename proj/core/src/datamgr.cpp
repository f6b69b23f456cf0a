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

#include "taskmesh/datamgr.hpp"

#include <algorithm>

namespace taskmesh {

const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Alloc: return "Alloc";
    case ActionKind::Forward: return "Forward";
    case ActionKind::Retrieve: return "Retrieve";
    case ActionKind::Remove: return "Remove";
  }
  return "?";
}

bool BufferState::holds(NodeId n) const {
  if (n == kHeadNode) return on_head;
  return std::binary_search(locations.begin(), locations.end(), n);
}

namespace {

void add_location(BufferState& s, NodeId n) {
  if (n == kHeadNode) {
    s.on_head = true;
    return;
  }
  auto it = std::lower_bound(s.locations.begin(), s.locations.end(), n);
  if (it == s.locations.end() || *it != n) s.locations.insert(it, n);
}

}  // namespace

DataManager::DataManager(const TaskGraph& graph, const Schedule& schedule)
    : graph_(graph), schedule_(schedule), map_(graph.buffers().size()) {}

BufferState& DataManager::entry(BufferId buffer) {
  if (buffer.value() >= map_.size()) {
    throw Error(ErrorCode::UnknownBuffer, "buffer " + std::to_string(buffer.value()));
  }
  BufferState& s = map_[buffer.value()];
  if (!s.registered) {
    // First touch without an enter-data: the head's host copy is the only one.
    s = BufferState{};
    s.registered = true;
  }
  return s;
}

TransferPlan DataManager::on_enter_data(BufferId buffer, std::optional<TaskId> enter_task) {
  if (buffer.value() >= map_.size()) {
    throw Error(ErrorCode::UnknownBuffer, "buffer " + std::to_string(buffer.value()));
  }
  // First user: the compute successor of the enter task that is scheduled earliest.
  std::optional<TaskId> first;
  auto consider = [&](TaskId t) {
    const Task& task = graph_.task(t);
    if (!is_compute_task(task.kind) || task.find_dep(buffer) == nullptr) return;
    if (!first || schedule_.est[t.value()] < schedule_.est[first->value()] ||
        (schedule_.est[t.value()] == schedule_.est[first->value()] && t < *first)) {
      first = t;
    }
  };
  if (enter_task) {
    for (auto ei : graph_.out_edges(*enter_task)) {
      const Edge& e = graph_.edge(ei);
      if (e.buffer == buffer) consider(e.consumer);
    }
  } else {
    for (const Task& t : graph_.tasks()) consider(t.id);
  }

  BufferState& s = map_[buffer.value()];
  s = BufferState{};
  s.registered = true;
  const NodeId target = first ? schedule_.node_of(*first) : kHeadNode;
  if (target == kHeadNode) {
    s.fresh = kHeadNode;
    return {{ActionKind::Alloc, buffer, kHeadNode, kHeadNode}};
  }
  s.locations = {target};
  s.fresh = target;
  return {{ActionKind::Alloc, buffer, kHeadNode, target},
          {ActionKind::Forward, buffer, kHeadNode, target}};
}

TransferPlan DataManager::before_execute(const Task& task, NodeId node) {
  TransferPlan plan;
  for (const auto& d : task.deps) {
    BufferState& s = entry(d.buffer);
    if (s.holds(node)) continue;
    NodeId src = s.fresh;
    if (!s.holds(src)) src = s.on_head ? kHeadNode : s.locations.front();
    plan.push_back({ActionKind::Forward, d.buffer, src, node});
    add_location(s, node);
  }
  return plan;
}

TransferPlan DataManager::after_execute(const Task& task, NodeId node) {
  TransferPlan plan;
  for (const auto& d : task.deps) {
    BufferState& s = entry(d.buffer);
    if (writes(d.direction)) {
      for (NodeId loc : s.locations) {
        if (loc != node) plan.push_back({ActionKind::Remove, d.buffer, kHeadNode, loc});
      }
      s.locations.clear();
      s.on_head = false;
      add_location(s, node);
      s.fresh = node;
    } else {
      add_location(s, node);
    }
  }
  return plan;
}

TransferPlan DataManager::on_exit_data(BufferId buffer, bool release) {
  if (buffer.value() >= map_.size() || !map_[buffer.value()].registered) {
    throw Error(ErrorCode::Unregistered, "buffer " + std::to_string(buffer.value()));
  }
  BufferState& s = map_[buffer.value()];
  TransferPlan plan;
  if (!s.on_head) {
    NodeId src = s.holds(s.fresh) ? s.fresh : s.locations.front();
    plan.push_back({ActionKind::Retrieve, buffer, src, kHeadNode});
    s.on_head = true;
  }
  if (release) {
    for (NodeId loc : s.locations) plan.push_back({ActionKind::Remove, buffer, kHeadNode, loc});
    s = BufferState{};
  }
  return plan;
}

}  // namespace taskmesh
