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
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace taskmesh {

/// All durations and timestamps are microseconds.
using Micros = double;

/// Process rank. Node 0 is the head, 1..p are workers.
using NodeId = std::uint16_t;
inline constexpr NodeId kHeadNode = 0;

template <typename Tag, typename Rep = std::uint32_t>
class StrongId {
 public:
  using rep_type = Rep;

  constexpr StrongId() = default;
  constexpr explicit StrongId(Rep value) : value_(value) {}

  constexpr Rep value() const { return value_; }

  friend constexpr auto operator<=>(StrongId, StrongId) = default;

  friend std::ostream& operator<<(std::ostream& os, StrongId id) { return os << id.value_; }

 private:
  Rep value_{};
};

struct TaskIdTag;
struct BufferIdTag;

/// Dense, program-order task index.
using TaskId = StrongId<TaskIdTag>;
using BufferId = StrongId<BufferIdTag>;

enum class ErrorCode {
  UnknownBuffer,
  ProgramSealed,
  InvalidTask,
  NoWorkers,
  Unregistered,
  DeadDestination,
  ContractViolation,
  TransportError,
  PeerDown,
  Timeout,
  FrameError,
  EventFailed,
  MissingBuffer,
  InvalidSpec,
  ConfigError,
  TraceError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace taskmesh

template <typename Tag, typename Rep>
struct std::hash<taskmesh::StrongId<Tag, Rep>> {
  std::size_t operator()(taskmesh::StrongId<Tag, Rep> id) const noexcept {
    return std::hash<Rep>{}(id.value());
  }
};
