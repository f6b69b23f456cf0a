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

#include "taskmesh/sim_transport.hpp"

#include <algorithm>
#include <ostream>

namespace taskmesh {

std::size_t SimEndpoint::size() const { return net_.size(); }

bool SimEndpoint::is_live(NodeId node) const { return node < net_.size() && net_.is_live(node); }

void SimEndpoint::send(NodeId dst, Frame frame) {
  if (dst >= net_.size() || !net_.is_live(dst)) {
    throw Error(ErrorCode::PeerDown, "node " + std::to_string(dst) + " is down");
  }
  net_.enqueue_send(rank_, dst, std::move(frame));
}

Frame SimEndpoint::recv_match(const MatchKey& key, Timeout) {
  if (auto f = box_.try_take(key)) return std::move(*f);
  throw Error(ErrorCode::Timeout, "no matching frame at virtual time " + std::to_string(net_.now()));
}

Micros SimEndpoint::now() const { return net_.now(); }

void SimEndpoint::wake_at(Micros t) { net_.enqueue_wake(rank_, t); }

SimNetwork::SimNetwork(std::size_t nodes, NetModel model)
    : model_(model), live_(nodes, true), send_free_(nodes, 0), last_arrival_(nodes * nodes, 0),
      rng_(model.seed) {
  if (model.latency < 0) throw Error(ErrorCode::InvalidSpec, "latency must be >= 0");
  if (!(model.bandwidth > 0)) throw Error(ErrorCode::InvalidSpec, "bandwidth must be > 0");
  endpoints_.reserve(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    endpoints_.push_back(std::make_unique<SimEndpoint>(*this, static_cast<NodeId>(i)));
  }
}

Micros SimNetwork::transfer_time(std::size_t payload_len) const {
  return model_.latency + static_cast<double>(payload_len) / model_.bandwidth;
}

double SimNetwork::uniform01() {
  // Top 53 bits, so the mapping does not depend on the standard library's distributions.
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

void SimNetwork::enqueue_send(NodeId src, NodeId dst, Frame frame) {
  Micros depart = std::max(now_, send_free_[src]) + model_.send_overhead;
  send_free_[src] = depart;
  Micros at = depart + transfer_time(frame.payload.size());
  if (model_.jitter > 0) at += model_.jitter * uniform01();
  auto& last = last_arrival_[static_cast<std::size_t>(src) * size() + dst];
  at = std::max(at, last);
  last = at;
  queue_.push(Pending{at, seq_++, dst, std::move(frame)});
}

void SimNetwork::enqueue_wake(NodeId node, Micros at) {
  queue_.push(Pending{std::max(at, now_), seq_++, node, std::nullopt});
}

std::optional<Micros> SimNetwork::advance() {
  if (queue_.empty()) return std::nullopt;
  // priority_queue::top is const; the frame is moved out through a copy of the handle.
  Pending p = std::move(const_cast<Pending&>(queue_.top()));
  queue_.pop();
  now_ = std::max(now_, p.at);
  if (p.frame && live_[p.dst]) {
    ++frames_delivered_;
    bytes_delivered_ += p.frame->payload.size();
    if (capture_ != nullptr) write_frame(*capture_, *p.frame);
    endpoints_[p.dst]->mailbox().deliver(std::move(*p.frame));
  }
  return now_;
}

void SimNetwork::advance_to(Micros t) { now_ = std::max(now_, t); }

void SimNetwork::kill(NodeId n) { live_.at(n) = false; }

}  // namespace taskmesh
