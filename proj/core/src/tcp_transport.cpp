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

#include "taskmesh/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ostream>

namespace taskmesh {

namespace {

constexpr char kHelloMarker = 'H';
constexpr char kMeshMarker = 'M';

[[noreturn]] void sys_fail(const std::string& what) {
  throw Error(ErrorCode::TransportError, what + ": " + std::strerror(errno));
}

bool write_all(int fd, const void* data, std::size_t len) {
  const char* p = static_cast<const char*>(data);
  while (len > 0) {
    ssize_t n = ::send(fd, p, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_all(int fd, void* data, std::size_t len) {
  char* p = static_cast<char*>(data);
  while (len > 0) {
    ssize_t n = ::recv(fd, p, len, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

void put_u16(char* p, std::uint16_t v) {
  p[0] = static_cast<char>(v & 0xff);
  p[1] = static_cast<char>(v >> 8);
}

std::uint16_t get_u16(const char* p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) |
                                    (static_cast<unsigned char>(p[1]) << 8));
}

void tune(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

int dial(const std::string& host, std::uint16_t port, Timeout timeout) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::TransportError, "bad address " + host);
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) sys_fail("socket");
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
      tune(fd);
      return fd;
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() > deadline) sys_fail("connect " + host);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

int accept_one(int listen_fd, Timeout timeout) {
  pollfd p{listen_fd, POLLIN, 0};
  const int ms = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(timeout).count());
  for (;;) {
    int r = ::poll(&p, 1, ms);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw Error(ErrorCode::Timeout, "accept timed out");
    int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR) continue;
      sys_fail("accept");
    }
    tune(fd);
    return fd;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

TcpListener::TcpListener() {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) sys_fail("bind");
  if (::listen(fd_, 256) != 0) sys_fail("listen");
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

// ---------------------------------------------------------------------------

TcpEndpoint::TcpEndpoint(NodeId rank, std::size_t nodes)
    : rank_(rank), nodes_(nodes), out_fds_(nodes, -1), in_fds_() {
  for (std::size_t i = 0; i < nodes; ++i) out_mu_.push_back(std::make_unique<std::mutex>());
}

TcpEndpoint::~TcpEndpoint() { shutdown(); }

void TcpEndpoint::shutdown() {
  if (shut_.exchange(true)) return;
  for (int& fd : out_fds_) {
    if (fd >= 0) {
      ::shutdown(fd, SHUT_WR);
    }
  }
  // Readers exit once every peer has closed its side.
  for (auto& t : readers_) {
    if (t.joinable()) t.join();
  }
  for (int& fd : out_fds_) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
  for (int fd : in_fds_) ::close(fd);
  in_fds_.clear();
  box_.close();
}

std::unique_ptr<TcpEndpoint> TcpEndpoint::create_head(TcpListener& listener, std::size_t workers,
                                                      Timeout timeout) {
  const std::size_t nodes = workers + 1;
  std::unique_ptr<TcpEndpoint> ep(new TcpEndpoint(kHeadNode, nodes));
  std::vector<std::uint16_t> ports(nodes, 0);
  ports[0] = listener.port();
  std::vector<int> hello_fds(nodes, -1);
  std::size_t hellos = 0;
  std::size_t meshes = 0;
  bool table_sent = workers == 0;
  while (hellos < workers || meshes < workers) {
    int fd = accept_one(listener.fd(), timeout);
    char marker = 0;
    if (!read_all(fd, &marker, 1)) {
      ::close(fd);
      continue;
    }
    if (marker == kHelloMarker) {
      char buf[4];
      if (!read_all(fd, buf, 4)) sys_fail("hello");
      const NodeId r = get_u16(buf);
      if (r == 0 || r >= nodes || hello_fds[r] >= 0) {
        throw Error(ErrorCode::TransportError, "bad worker rank " + std::to_string(r));
      }
      ports[r] = get_u16(buf + 2);
      hello_fds[r] = fd;
      ++hellos;
      if (hellos == workers) {
        std::vector<char> table(2 + 2 * nodes);
        put_u16(table.data(), static_cast<std::uint16_t>(nodes));
        for (std::size_t i = 0; i < nodes; ++i) put_u16(table.data() + 2 + 2 * i, ports[i]);
        for (std::size_t i = 1; i < nodes; ++i) {
          if (!write_all(hello_fds[i], table.data(), table.size())) sys_fail("port table");
          ::close(hello_fds[i]);
        }
        ep->connect_mesh("127.0.0.1", ports);
        table_sent = true;
      }
    } else if (marker == kMeshMarker) {
      char buf[2];
      if (!read_all(fd, buf, 2)) sys_fail("mesh hello");
      ep->add_incoming(fd, get_u16(buf));
      ++meshes;
    } else {
      ::close(fd);
    }
  }
  (void)table_sent;
  return ep;
}

std::unique_ptr<TcpEndpoint> TcpEndpoint::join(NodeId rank, const std::string& head_host,
                                               std::uint16_t head_port, Timeout timeout) {
  auto listener = std::make_unique<TcpListener>();
  int boot = dial(head_host, head_port, timeout);
  char hello[5];
  hello[0] = kHelloMarker;
  put_u16(hello + 1, rank);
  put_u16(hello + 3, listener->port());
  if (!write_all(boot, hello, sizeof hello)) sys_fail("hello");
  char nbuf[2];
  if (!read_all(boot, nbuf, 2)) sys_fail("port table");
  const std::size_t nodes = get_u16(nbuf);
  std::vector<char> raw(2 * nodes);
  if (!read_all(boot, raw.data(), raw.size())) sys_fail("port table");
  ::close(boot);
  std::vector<std::uint16_t> ports(nodes);
  for (std::size_t i = 0; i < nodes; ++i) ports[i] = get_u16(raw.data() + 2 * i);

  std::unique_ptr<TcpEndpoint> ep(new TcpEndpoint(rank, nodes));
  ep->connect_mesh(head_host, ports);
  for (std::size_t i = 0; i + 1 < nodes; ++i) {
    int fd = accept_one(listener->fd(), timeout);
    char buf[3];
    if (!read_all(fd, buf, 3) || buf[0] != kMeshMarker) sys_fail("mesh hello");
    ep->add_incoming(fd, get_u16(buf + 1));
  }
  ep->own_listener_ = std::move(listener);
  ep->own_listener_->close();
  return ep;
}

void TcpEndpoint::connect_mesh(const std::string& host, const std::vector<std::uint16_t>& ports) {
  for (std::size_t peer = 0; peer < nodes_; ++peer) {
    if (peer == rank_) continue;
    int fd = dial(host, ports[peer], std::chrono::seconds(30));
    char buf[3];
    buf[0] = kMeshMarker;
    put_u16(buf + 1, rank_);
    if (!write_all(fd, buf, 3)) sys_fail("mesh hello");
    out_fds_[peer] = fd;
  }
}

void TcpEndpoint::add_incoming(int fd, NodeId peer) {
  in_fds_.push_back(fd);
  readers_.emplace_back([this, fd, peer] { reader_loop(fd, peer); });
}

void TcpEndpoint::reader_loop(int fd, NodeId peer) {
  (void)peer;
  std::array<std::byte, kFrameHeaderSize> hdr{};
  for (;;) {
    if (!read_all(fd, hdr.data(), hdr.size())) return;
    FrameHeader h;
    try {
      h = decode_header(hdr);
    } catch (const Error& e) {
      std::fprintf(stderr, "taskmesh[%u]: dropping connection from %u: %s\n", rank_, peer, e.what());
      return;
    }
    Frame f{h.origin, h.tag, h.channel, h.etype, Bytes(h.payload_len)};
    if (h.payload_len > 0 && !read_all(fd, f.payload.data(), h.payload_len)) return;
    box_.deliver(std::move(f));
  }
}

bool TcpEndpoint::is_live(NodeId node) const {
  return node < nodes_ && (node == rank_ || out_fds_[node] >= 0) && !shut_.load();
}

void TcpEndpoint::send(NodeId dst, Frame frame) {
  if (dst >= nodes_ || dst == rank_ || out_fds_[dst] < 0) {
    throw Error(ErrorCode::PeerDown, "no connection to node " + std::to_string(dst));
  }
  if (kFrameHeaderSize + frame.payload.size() > kDefaultMaxFrame) {
    throw Error(ErrorCode::FrameError, "frame exceeds maximum size");
  }
  std::array<std::byte, kFrameHeaderSize> hdr{};
  encode_header(frame, hdr);
  {
    std::lock_guard lk(*out_mu_[dst]);
    if (!write_all(out_fds_[dst], hdr.data(), hdr.size()) ||
        !write_all(out_fds_[dst], frame.payload.data(), frame.payload.size())) {
      throw Error(ErrorCode::PeerDown, "write to node " + std::to_string(dst) + " failed");
    }
  }
  bytes_sent_ += frame.payload.size();
  if (capture_ != nullptr) {
    std::lock_guard lk(capture_mu_);
    write_frame(*capture_, frame);
  }
}

Frame TcpEndpoint::recv_match(const MatchKey& key, Timeout timeout) {
  auto f = box_.take(key, timeout);
  if (!f) throw Error(ErrorCode::Timeout, "recv_match timed out on tag " + std::to_string(key.tag));
  return std::move(*f);
}

Micros TcpEndpoint::now() const {
  using namespace std::chrono;
  return duration<double, std::micro>(steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------

LocalCluster::LocalCluster(std::size_t workers, const WorkerMain& worker_main) {
  TcpListener listener;
  std::fflush(nullptr);
  for (std::size_t r = 1; r <= workers; ++r) {
    pid_t pid = ::fork();
    if (pid < 0) sys_fail("fork");
    if (pid == 0) {
      int code = 1;
      try {
        listener.close();
        ::setenv("TASKMESH_RANK", std::to_string(r).c_str(), 1);
        auto ep = TcpEndpoint::join(static_cast<NodeId>(r), "127.0.0.1", listener.port());
        code = worker_main(*ep);
        ep->shutdown();
      } catch (const std::exception& e) {
        std::fprintf(stderr, "taskmesh worker %zu: %s\n", r, e.what());
        code = 1;
      }
      std::fflush(nullptr);
      ::_exit(code);
    }
    pids_.push_back(pid);
  }
  head_ = TcpEndpoint::create_head(listener, workers);
}

LocalCluster::~LocalCluster() {
  for (int pid : pids_) {
    if (pid > 0) ::kill(pid, SIGKILL);
  }
  for (int pid : pids_) {
    if (pid > 0) ::waitpid(pid, nullptr, 0);
  }
  if (head_) head_->shutdown();
}

int LocalCluster::wait() {
  int worst = 0;
  for (int& pid : pids_) {
    if (pid <= 0) continue;
    int status = 0;
    ::waitpid(pid, &status, 0);
    pid = -1;
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
    worst = std::max(worst, code);
  }
  return worst;
}

int run_worker_from_env(const LocalCluster::WorkerMain& worker_main) {
  const char* rank = std::getenv("TASKMESH_RANK");
  const char* head = std::getenv("TASKMESH_HEAD_ADDR");
  if (rank == nullptr || head == nullptr) {
    throw Error(ErrorCode::ConfigError, "TASKMESH_RANK and TASKMESH_HEAD_ADDR must be set");
  }
  std::string addr(head);
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::ConfigError, "TASKMESH_HEAD_ADDR is host:port");
  auto ep = TcpEndpoint::join(static_cast<NodeId>(std::stoi(rank)), addr.substr(0, colon),
                              static_cast<std::uint16_t>(std::stoi(addr.substr(colon + 1))));
  int code = worker_main(*ep);
  ep->shutdown();
  return code;
}

}  // namespace taskmesh
