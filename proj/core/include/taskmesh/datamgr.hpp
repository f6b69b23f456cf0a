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
#include <optional>
#include <string>
#include <vector>

#include "taskmesh/graph.hpp"
#include "taskmesh/scheduler.hpp"

namespace taskmesh {

enum class ActionKind : std::uint8_t { Alloc, Forward, Retrieve, Remove };

const char* to_string(ActionKind kind);

/// One step of a transfer plan.
///   Alloc(dst)         reserve space on dst
///   Forward(src, dst)  copy the buffer between nodes (either may be the head)
///   Retrieve(src)      copy the buffer from src back to the head
///   Remove(dst)        drop the copy on dst
struct TransferAction {
  ActionKind kind;
  BufferId buffer;
  NodeId src = kHeadNode;
  NodeId dst = kHeadNode;

  friend bool operator==(const TransferAction&, const TransferAction&) = default;
};

using TransferPlan = std::vector<TransferAction>;

/// Directory entry for one buffer.
struct BufferState {
  bool registered = false;
  /// Worker nodes holding a valid copy, ascending.
  std::vector<NodeId> locations;
  /// Most recent writer, or the node the buffer was first sent to.
  NodeId fresh = kHeadNode;
  /// The head's host copy is current.
  bool on_head = true;

  bool holds(NodeId n) const;
  /// Number of valid copies including the head's.
  std::size_t holder_count() const { return locations.size() + (on_head ? 1 : 0); }
};

/// Head-side coherence directory. Decides forwards and invalidations; never moves bytes itself.
class DataManager {
 public:
  DataManager(const TaskGraph& graph, const Schedule& schedule);

  /// Plan for an enter-data task: send `buffer` to the node of its earliest scheduled user.
  TransferPlan on_enter_data(BufferId buffer, std::optional<TaskId> enter_task = std::nullopt);

  /// Forwards needed so every dep of `task` is present on `node`.
  TransferPlan before_execute(const Task& task, NodeId node);

  /// Invalidations after `task` completed on `node`.
  TransferPlan after_execute(const Task& task, NodeId node);

  /// Bring `buffer` home; with `release`, drop every device copy.
  TransferPlan on_exit_data(BufferId buffer, bool release);

  const BufferState& state(BufferId buffer) const { return map_.at(buffer.value()); }

 private:
  BufferState& entry(BufferId buffer);

  const TaskGraph& graph_;
  const Schedule& schedule_;
  std::vector<BufferState> map_;
};

}  // namespace taskmesh
