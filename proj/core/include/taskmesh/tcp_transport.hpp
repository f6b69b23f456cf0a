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
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "taskmesh/transport.hpp"

namespace taskmesh {

/// Listening TCP socket on 127.0.0.1 with an ephemeral port.
class TcpListener {
 public:
  TcpListener();
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int fd() const { return fd_; }
  std::uint16_t port() const { return port_; }
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Full-mesh TCP endpoint: one connection per ordered node pair, frames multiplexed by key.
///
/// Bootstrap: every worker dials the head and reports (rank, listen port); the head answers
/// with the port table; then every node dials every other node and announces its rank.
class TcpEndpoint final : public Endpoint {
 public:
  ~TcpEndpoint() override;

  /// Head side. `workers` processes must join through `listener`.
  static std::unique_ptr<TcpEndpoint> create_head(TcpListener& listener, std::size_t workers,
                                                  Timeout timeout = std::chrono::seconds(30));
  /// Worker side.
  static std::unique_ptr<TcpEndpoint> join(NodeId rank, const std::string& head_host,
                                           std::uint16_t head_port,
                                           Timeout timeout = std::chrono::seconds(30));

  NodeId rank() const override { return rank_; }
  std::size_t size() const override { return nodes_; }
  bool is_live(NodeId node) const override;
  void send(NodeId dst, Frame frame) override;
  std::optional<Frame> try_recv(const MatchKey& key) override { return box_.try_take(key); }
  Frame recv_match(const MatchKey& key, Timeout timeout) override;
  std::optional<Frame> try_recv_notification() override { return box_.try_take_notification(); }
  std::optional<Frame> recv_notification(Timeout timeout) override {
    return box_.take_notification(timeout);
  }
  std::uint64_t activity() const override { return box_.generation(); }
  bool wait_activity(std::uint64_t seen, Timeout timeout) override {
    return box_.wait_change(seen, timeout);
  }
  Micros now() const override;
  void interrupt() override { box_.close(); }

  /// Appends every frame sent by this endpoint to `os` (guarded by the endpoint).
  void set_capture(std::ostream* os) { capture_ = os; }

  std::uint64_t bytes_sent() const { return bytes_sent_.load(); }

  /// Closes outgoing connections and joins the readers.
  void shutdown();

 private:
  TcpEndpoint(NodeId rank, std::size_t nodes);

  void connect_mesh(const std::string& host, const std::vector<std::uint16_t>& ports);
  void add_incoming(int fd, NodeId peer);
  void reader_loop(int fd, NodeId peer);

  NodeId rank_;
  std::size_t nodes_;
  Mailbox box_;
  std::vector<int> out_fds_;
  std::vector<std::unique_ptr<std::mutex>> out_mu_;
  std::vector<int> in_fds_;
  std::vector<std::thread> readers_;
  std::unique_ptr<TcpListener> own_listener_;
  std::mutex capture_mu_;
  std::ostream* capture_ = nullptr;
  std::atomic<std::uint64_t> bytes_sent_{0};
  std::atomic<bool> shut_{false};
};

/// Forks `workers` local processes, each joining a TCP mesh with this process as the head.
/// Must be created before the calling process starts other threads.
class LocalCluster {
 public:
  using WorkerMain = std::function<int(TcpEndpoint&)>;

  LocalCluster(std::size_t workers, const WorkerMain& worker_main);
  ~LocalCluster();
  LocalCluster(const LocalCluster&) = delete;
  LocalCluster& operator=(const LocalCluster&) = delete;

  TcpEndpoint& head() { return *head_; }
  std::unique_ptr<TcpEndpoint>& head_ptr() { return head_; }

  /// Reaps every worker. Returns 0 when all exited cleanly.
  int wait();

 private:
  std::unique_ptr<TcpEndpoint> head_;
  std::vector<int> pids_;
};

/// Runs a worker from the environment: TASKMESH_RANK and TASKMESH_HEAD_ADDR (host:port).
int run_worker_from_env(const LocalCluster::WorkerMain& worker_main);

}  // namespace taskmesh
