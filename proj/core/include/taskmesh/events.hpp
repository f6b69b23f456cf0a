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

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "taskmesh/kernel.hpp"
#include "taskmesh/trace.hpp"
#include "taskmesh/transport.hpp"

namespace taskmesh {

enum class EventType : std::uint8_t {
  AllocBuffer = 1,
  DeleteBuffer,
  SubmitData,
  RetrieveData,
  ExchangeData,
  Execute,
  Sync,
  Exit,
};

enum class EventState : std::uint8_t { Created, Notified, Queued, Running, PendingIO, Done, Failed };

const char* to_string(EventType t);
const char* to_string(EventState s);

/// Set in the etype byte of completion frames.
inline constexpr std::uint8_t kCompletionFlag = 0x80;

/// Which side of a two-party event a destination half plays.
enum class HalfRole : std::uint8_t { Single = 0, Sender = 1, Receiver = 2 };

struct EventOptions {
  std::uint16_t channels = 8;
  /// 0 picks hardware parallelism minus two, at least one.
  std::size_t handlers = 0;
  Timeout timeout = std::chrono::seconds(60);
  /// Largest payload chunk per data frame.
  std::size_t max_chunk = kDefaultMaxFrame - kFrameHeaderSize - 16;
  /// Runs the busy loop for Execute. Off in the simulator, which charges virtual time instead.
  bool spin = true;
  /// Simulator only: busy-loop iterations per virtual microsecond.
  double sim_iterations_per_us = 200.0;
};

std::size_t default_handler_count();

/// Origin half. Owned by the creating thread; exactly one thread may wait on it.
class OriginEvent {
 public:
  std::uint64_t tag() const { return tag_; }
  std::uint16_t channel() const { return channel_; }
  EventType type() const { return type_; }
  NodeId origin() const { return origin_; }
  NodeId destination() const { return destination_; }
  EventState state() const { return state_; }
  bool finished() const { return state_ == EventState::Done || state_ == EventState::Failed; }
  /// Returned data chunks followed by each completion's result bytes.
  const Bytes& result() const { return result_; }
  const std::string& error() const { return error_; }
  /// Time after which progress() fails the event.
  Micros deadline() const { return deadline_; }

 private:
  friend class EventSystem;

  std::uint64_t tag_ = 0;
  std::uint16_t channel_ = 0;
  EventType type_ = EventType::Sync;
  NodeId origin_ = 0;
  NodeId destination_ = 0;
  EventState state_ = EventState::Created;
  std::vector<std::pair<NodeId, HalfRole>> parties_;
  Bytes args_;
  Bytes data_;  // SubmitData payload
  int completions_ = 0;
  Micros deadline_ = 0;
  Bytes result_;
  std::string error_;
  std::atomic<bool> waiting_{false};
};

using OriginEventPtr = std::shared_ptr<OriginEvent>;

/// Destination half, living in the event queue until a handler finishes it.
struct DestinationEvent {
  NodeId origin = 0;
  std::uint64_t tag = 0;
  std::uint16_t channel = 0;
  EventType type = EventType::Sync;
  HalfRole role = HalfRole::Single;
  Bytes args;
  EventState state = EventState::Queued;

  // Progress across handler invocations.
  Bytes inbox;
  std::uint32_t chunks_expected = 0;
  std::uint32_t chunks_seen = 0;
  std::optional<Micros> ready_at;
  Bytes result;
  bool has_pending_gen = false;
  std::uint64_t pending_gen = 0;
};

using DestinationEventPtr = std::shared_ptr<DestinationEvent>;

enum class HandleResult { Done, PendingIO };

/// FIFO of destination halves. Re-enqueued halves go to the back.
class EventQueue {
 public:
  void push(DestinationEventPtr ev);

  /// Blocks for the next half. A half that went PendingIO at generation `gen` is skipped while a
  /// fresher one exists; `stale` reports that every queued half is still waiting at `gen`.
  DestinationEventPtr pop(std::uint64_t gen, bool& stale);
  DestinationEventPtr try_pop();

  void close();
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<DestinationEventPtr> q_;
  bool closed_ = false;
};

/// Two-sided event protocol on top of one endpoint.
///
/// Wire protocol, per event with tag t on channel c = t mod C:
///   notification  key (origin, 0, 0), etype = type, payload [u64 t][u16 c][u8 role][args]
///   data          key (origin, t, c), etype = type, payload [u32 idx][u32 count][u64 t][bytes]
///   completion    key (origin, t, c), etype = type | 0x80, payload [u8 status][result]
/// Every frame of an event carries the event's origin in its header.
class EventSystem {
 public:
  /// Execute hook: runs the kernel, returns result bytes. Defaults to run_kernel on store().
  using Executor = std::function<Bytes(const ExecuteArgs&, BufferStore&)>;

  EventSystem(Endpoint& ep, EventOptions options, TraceLog* trace = nullptr);
  ~EventSystem();
  EventSystem(const EventSystem&) = delete;
  EventSystem& operator=(const EventSystem&) = delete;

  Endpoint& endpoint() { return ep_; }
  BufferStore& store() { return store_; }
  const EventOptions& options() const { return opts_; }

  void set_executor(Executor fn) { executor_ = std::move(fn); }
  /// Result of this node's Exit half, computed after its Done row is recorded.
  void set_exit_hook(std::function<Bytes()> fn) { exit_hook_ = std::move(fn); }

  // Origin side.
  OriginEventPtr create_origin(EventType type, NodeId destination, Bytes args = {}, Bytes data = {});
  /// Head-originated forward: the payload travels src -> dst directly.
  OriginEventPtr create_exchange(BufferId buffer, NodeId src, NodeId dst);
  void notify(const OriginEventPtr& ev);
  /// Consumes whatever arrived for `ev` without blocking. True once Done or Failed.
  bool progress(const OriginEventPtr& ev);
  /// Blocks until the event finishes. Returns the result or throws EventFailed.
  Bytes wait(const OriginEventPtr& ev);

  // Destination side.
  /// Moves every pending notification into the queue. Returns how many.
  std::size_t gate_step();
  /// Gives every queued half one turn. True if any half advanced.
  bool handler_step();
  /// One handler turn on a single half.
  HandleResult handle(DestinationEvent& ev, bool* progressed = nullptr);

  /// Starts the gate thread and the handler pool (real transports).
  void start();
  /// Blocks until an Exit half finished and the threads are joined.
  void join();
  void stop();
  bool exit_seen() const { return exit_seen_.load(); }

  std::size_t queued() const { return queue_.size(); }

  std::uint64_t notifications_sent() const { return notifications_sent_.load(); }
  std::uint64_t halves_created() const { return halves_created_.load(); }
  std::uint64_t completions_sent() const { return completions_sent_.load(); }
  std::uint64_t completions_received() const { return completions_received_.load(); }

 private:
  void record(NodeId node, std::uint64_t tag, EventType type, EventState state);
  void send_data(NodeId dst, NodeId origin, std::uint64_t tag, std::uint16_t channel, EventType type,
                 std::span<const std::byte> bytes);
  void send_completion(const DestinationEvent& ev, bool ok, std::span<const std::byte> result);
  bool take_data(DestinationEvent& ev);
  void enqueue_notification(Frame frame);
  void fail(OriginEvent& ev, const std::string& why);
  HandleResult run_half(DestinationEvent& ev, bool& progressed);
  void gate_loop();
  void handler_loop();

  Endpoint& ep_;
  EventOptions opts_;
  TraceLog* trace_;
  BufferStore store_;
  EventQueue queue_;
  Executor executor_;
  std::function<Bytes()> exit_hook_;
  std::atomic<std::uint64_t> next_tag_{1};
  std::atomic<bool> exit_seen_{false};
  std::atomic<bool> stopping_{false};
  std::thread gate_;
  std::vector<std::thread> pool_;
  std::atomic<std::uint64_t> notifications_sent_{0};
  std::atomic<std::uint64_t> halves_created_{0};
  std::atomic<std::uint64_t> completions_sent_{0};
  std::atomic<std::uint64_t> completions_received_{0};
  Micros compute_free_ = 0;
  std::mutex compute_mu_;
};

/// Execute argument helpers for the simple data events.
Bytes buffer_args(BufferId buffer, std::uint64_t size = 0);

}  // namespace taskmesh
