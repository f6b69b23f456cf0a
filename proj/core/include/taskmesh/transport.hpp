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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "taskmesh/frame.hpp"

namespace taskmesh {

/// Frames are matched on (origin, tag, channel). Tag 0 on channel 0 is the
/// notification stream.
struct MatchKey {
  std::uint16_t origin = 0;
  std::uint64_t tag = 0;
  std::uint16_t channel = 0;

  friend bool operator==(const MatchKey&, const MatchKey&) = default;
};

inline MatchKey key_of(const Frame& f) { return {f.origin, f.tag, f.channel}; }
inline bool is_notification(const Frame& f) { return f.tag == 0 && f.channel == 0; }

struct MatchKeyHash {
  std::size_t operator()(const MatchKey& k) const noexcept {
    std::uint64_t h = k.tag * 0x9e3779b97f4a7c15ull;
    h ^= (static_cast<std::uint64_t>(k.origin) << 16 | k.channel) + 0x632be59bd9b4e019ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

using Timeout = std::chrono::microseconds;

/// Per-node inbox with exact-key matching. Thread-safe.
class Mailbox {
 public:
  void deliver(Frame frame);

  std::optional<Frame> try_take(const MatchKey& key);
  std::optional<Frame> take(const MatchKey& key, Timeout timeout);
  std::optional<Frame> try_take_notification();
  std::optional<Frame> take_notification(Timeout timeout);

  std::uint64_t generation() const;
  /// Blocks until something arrives after `seen` or the timeout passes. True if it changed.
  bool wait_change(std::uint64_t seen, Timeout timeout);

  /// Wakes every blocked caller; subsequent blocking calls return immediately.
  void close();
  bool closed() const;

  std::size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::unordered_map<MatchKey, std::deque<Frame>, MatchKeyHash> by_key_;
  std::deque<Frame> notifications_;
  std::uint64_t generation_ = 0;
  std::size_t pending_ = 0;
  bool closed_ = false;
};

/// One node's view of the message layer.
class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual NodeId rank() const = 0;
  /// Number of nodes including the head.
  virtual std::size_t size() const = 0;
  virtual bool is_live(NodeId node) const = 0;

  /// Delivers exactly once; per (src, dst, key) order is preserved. Throws PeerDown.
  virtual void send(NodeId dst, Frame frame) = 0;

  virtual std::optional<Frame> try_recv(const MatchKey& key) = 0;
  /// Blocks until a frame with exactly `key` arrives. Throws Timeout.
  virtual Frame recv_match(const MatchKey& key, Timeout timeout) = 0;

  virtual std::optional<Frame> try_recv_notification() = 0;
  virtual std::optional<Frame> recv_notification(Timeout timeout) = 0;

  /// Monotonic counter bumped on every arrival.
  virtual std::uint64_t activity() const = 0;
  virtual bool wait_activity(std::uint64_t seen, Timeout timeout) = 0;

  /// Current time in microseconds (virtual for the simulator).
  virtual Micros now() const = 0;
  /// Asks to be stepped again at time `t`. Only meaningful for virtual time.
  virtual void wake_at(Micros /*t*/) {}
  virtual bool virtual_time() const { return false; }

  /// Wakes blocked receivers so they can observe shutdown.
  virtual void interrupt() = 0;
};

}  // namespace taskmesh
