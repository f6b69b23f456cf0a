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
#include <iosfwd>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "taskmesh/transport.hpp"

namespace taskmesh {

/// Link model for the simulator. A frame sent at time t is delivered at
///   depart + latency + payload_len / bandwidth (+ seeded jitter)
/// where depart = max(t, sender busy) + send_overhead. Per-pair delivery order is FIFO.
struct NetModel {
  Micros latency = 0;
  double bandwidth = 1.0;  ///< bytes per microsecond
  std::uint64_t seed = 0;
  /// Sender-side CPU cost per frame, serialized per node.
  Micros send_overhead = 0;
  /// Upper bound of the uniform extra delay drawn per frame from `seed`.
  Micros jitter = 0;
};

class SimNetwork;

class SimEndpoint final : public Endpoint {
 public:
  SimEndpoint(SimNetwork& net, NodeId rank) : net_(net), rank_(rank) {}

  NodeId rank() const override { return rank_; }
  std::size_t size() const override;
  bool is_live(NodeId node) const override;
  void send(NodeId dst, Frame frame) override;
  std::optional<Frame> try_recv(const MatchKey& key) override { return box_.try_take(key); }
  /// Virtual time cannot block: returns a queued frame or throws Timeout.
  Frame recv_match(const MatchKey& key, Timeout timeout) override;
  std::optional<Frame> try_recv_notification() override { return box_.try_take_notification(); }
  std::optional<Frame> recv_notification(Timeout) override { return box_.try_take_notification(); }
  std::uint64_t activity() const override { return box_.generation(); }
  bool wait_activity(std::uint64_t seen, Timeout) override { return box_.generation() != seen; }
  Micros now() const override;
  void wake_at(Micros t) override;
  bool virtual_time() const override { return true; }
  void interrupt() override {}

  Mailbox& mailbox() { return box_; }

 private:
  SimNetwork& net_;
  NodeId rank_;
  Mailbox box_;
};

/// Deterministic discrete-event network: every node lives in this process and time is virtual.
class SimNetwork {
 public:
  SimNetwork(std::size_t nodes, NetModel model);

  std::size_t size() const { return endpoints_.size(); }
  SimEndpoint& endpoint(NodeId n) { return *endpoints_.at(n); }
  const NetModel& model() const { return model_; }

  Micros now() const { return now_; }

  /// Delivers the next frame (or fires the next wakeup), moving the clock forward.
  /// Returns the new time, or nullopt when nothing is pending.
  std::optional<Micros> advance();

  /// Moves the clock to `t` if it is in the future. Used when the system is idle.
  void advance_to(Micros t);

  bool idle() const { return queue_.empty(); }

  /// Fault injection: frames to a dead node are dropped and sends to it fail.
  void kill(NodeId n);
  bool is_live(NodeId n) const { return live_.at(n); }

  /// Pure link time for a payload, without overhead or jitter.
  Micros transfer_time(std::size_t payload_len) const;

  /// Every delivered frame is appended to `os` in wire format.
  void set_capture(std::ostream* os) { capture_ = os; }

  std::uint64_t frames_delivered() const { return frames_delivered_; }
  std::uint64_t payload_bytes_delivered() const { return bytes_delivered_; }

 private:
  friend class SimEndpoint;

  struct Pending {
    Micros at;
    std::uint64_t seq;
    NodeId dst;
    std::optional<Frame> frame;  // empty: wakeup
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  void enqueue_send(NodeId src, NodeId dst, Frame frame);
  void enqueue_wake(NodeId node, Micros at);
  double uniform01();

  NetModel model_;
  std::vector<std::unique_ptr<SimEndpoint>> endpoints_;
  std::vector<bool> live_;
  std::vector<Micros> send_free_;
  std::vector<Micros> last_arrival_;  // [src * n + dst]
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::mt19937_64 rng_;
  Micros now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t frames_delivered_ = 0;
  std::uint64_t bytes_delivered_ = 0;
  std::ostream* capture_ = nullptr;
};

}  // namespace taskmesh
