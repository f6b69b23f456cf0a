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

#include "taskmesh/transport.hpp"

namespace taskmesh {

void Mailbox::deliver(Frame frame) {
  {
    std::lock_guard lk(mu_);
    if (is_notification(frame)) {
      notifications_.push_back(std::move(frame));
    } else {
      by_key_[key_of(frame)].push_back(std::move(frame));
    }
    ++generation_;
    ++pending_;
  }
  cv_.notify_all();
}

std::optional<Frame> Mailbox::try_take(const MatchKey& key) {
  std::lock_guard lk(mu_);
  auto it = by_key_.find(key);
  if (it == by_key_.end()) return std::nullopt;
  Frame f = std::move(it->second.front());
  it->second.pop_front();
  if (it->second.empty()) by_key_.erase(it);
  --pending_;
  return f;
}

std::optional<Frame> Mailbox::take(const MatchKey& key, Timeout timeout) {
  std::unique_lock lk(mu_);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    auto it = by_key_.find(key);
    if (it != by_key_.end()) {
      Frame f = std::move(it->second.front());
      it->second.pop_front();
      if (it->second.empty()) by_key_.erase(it);
      --pending_;
      return f;
    }
    if (closed_) return std::nullopt;
    if (cv_.wait_until(lk, deadline) == std::cv_status::timeout) {
      it = by_key_.find(key);
      if (it == by_key_.end()) return std::nullopt;
    }
  }
}

std::optional<Frame> Mailbox::try_take_notification() {
  std::lock_guard lk(mu_);
  if (notifications_.empty()) return std::nullopt;
  Frame f = std::move(notifications_.front());
  notifications_.pop_front();
  --pending_;
  return f;
}

std::optional<Frame> Mailbox::take_notification(Timeout timeout) {
  std::unique_lock lk(mu_);
  if (!cv_.wait_for(lk, timeout, [&] { return !notifications_.empty() || closed_; })) {
    return std::nullopt;
  }
  if (notifications_.empty()) return std::nullopt;
  Frame f = std::move(notifications_.front());
  notifications_.pop_front();
  --pending_;
  return f;
}

std::uint64_t Mailbox::generation() const {
  std::lock_guard lk(mu_);
  return generation_;
}

bool Mailbox::wait_change(std::uint64_t seen, Timeout timeout) {
  std::unique_lock lk(mu_);
  return cv_.wait_for(lk, timeout, [&] { return generation_ != seen || closed_; });
}

void Mailbox::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
    ++generation_;
  }
  cv_.notify_all();
}

bool Mailbox::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

std::size_t Mailbox::pending() const {
  std::lock_guard lk(mu_);
  return pending_;
}

}  // namespace taskmesh
