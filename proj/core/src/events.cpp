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

#include "taskmesh/events.hpp"

#include <algorithm>
#include <cstdio>

namespace taskmesh {

const char* to_string(EventType t) {
  switch (t) {
    case EventType::AllocBuffer: return "AllocBuffer";
    case EventType::DeleteBuffer: return "DeleteBuffer";
    case EventType::SubmitData: return "SubmitData";
    case EventType::RetrieveData: return "RetrieveData";
    case EventType::ExchangeData: return "ExchangeData";
    case EventType::Execute: return "Execute";
    case EventType::Sync: return "Sync";
    case EventType::Exit: return "Exit";
  }
  return "?";
}

const char* to_string(EventState s) {
  switch (s) {
    case EventState::Created: return "Created";
    case EventState::Notified: return "Notified";
    case EventState::Queued: return "Queued";
    case EventState::Running: return "Running";
    case EventState::PendingIO: return "PendingIO";
    case EventState::Done: return "Done";
    case EventState::Failed: return "Failed";
  }
  return "?";
}

std::size_t default_handler_count() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 3 ? hw - 2 : 1;
}

Bytes buffer_args(BufferId buffer, std::uint64_t size) {
  return ByteWriter().u32(buffer.value()).u64(size).take();
}

// ---------------------------------------------------------------------------

void EventQueue::push(DestinationEventPtr ev) {
  {
    std::lock_guard lk(mu_);
    q_.push_back(std::move(ev));
  }
  cv_.notify_one();
}

DestinationEventPtr EventQueue::pop(std::uint64_t gen, bool& stale) {
  std::unique_lock lk(mu_);
  cv_.wait(lk, [&] { return !q_.empty() || closed_; });
  if (q_.empty()) return nullptr;
  for (auto it = q_.begin(); it != q_.end(); ++it) {
    if (!(*it)->has_pending_gen || (*it)->pending_gen != gen) {
      DestinationEventPtr ev = std::move(*it);
      q_.erase(it);
      stale = false;
      return ev;
    }
  }
  DestinationEventPtr ev = std::move(q_.front());
  q_.pop_front();
  stale = true;
  return ev;
}

DestinationEventPtr EventQueue::try_pop() {
  std::lock_guard lk(mu_);
  if (q_.empty()) return nullptr;
  DestinationEventPtr ev = std::move(q_.front());
  q_.pop_front();
  return ev;
}

void EventQueue::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::size_t EventQueue::size() const {
  std::lock_guard lk(mu_);
  return q_.size();
}

// ---------------------------------------------------------------------------

EventSystem::EventSystem(Endpoint& ep, EventOptions options, TraceLog* trace)
    : ep_(ep), opts_(options), trace_(trace) {
  if (opts_.channels == 0) throw Error(ErrorCode::ConfigError, "channel count must be >= 1");
  if (opts_.handlers == 0) opts_.handlers = default_handler_count();
  executor_ = [this](const ExecuteArgs& args, BufferStore& store) {
    Micros us = run_kernel(args, store, opts_.spin);
    return ByteWriter().f64(us).take();
  };
}

EventSystem::~EventSystem() { stop(); }

void EventSystem::record(NodeId node, std::uint64_t tag, EventType type, EventState state) {
  if (trace_ != nullptr) trace_->add(EventRow{ep_.now(), node, tag, to_string(type), to_string(state)});
}

OriginEventPtr EventSystem::create_origin(EventType type, NodeId destination, Bytes args, Bytes data) {
  if (destination == ep_.rank()) {
    throw Error(ErrorCode::ContractViolation, "event destination is the origin itself");
  }
  if (!ep_.is_live(destination)) {
    throw Error(ErrorCode::DeadDestination, "node " + std::to_string(destination) + " is not live");
  }
  auto ev = std::make_shared<OriginEvent>();
  ev->tag_ = next_tag_.fetch_add(1);
  ev->channel_ = static_cast<std::uint16_t>(ev->tag_ % opts_.channels);
  ev->type_ = type;
  ev->origin_ = ep_.rank();
  ev->destination_ = destination;
  ev->parties_ = {{destination, HalfRole::Single}};
  ev->args_ = std::move(args);
  ev->data_ = std::move(data);
  record(ev->origin_, ev->tag_, type, EventState::Created);
  return ev;
}

OriginEventPtr EventSystem::create_exchange(BufferId buffer, NodeId src, NodeId dst) {
  if (src == dst || src == ep_.rank()) {
    throw Error(ErrorCode::ContractViolation, "exchange needs two remote parties");
  }
  if (!ep_.is_live(src)) throw Error(ErrorCode::DeadDestination, "node " + std::to_string(src) + " is not live");
  auto ev = create_origin(EventType::ExchangeData, dst,
                          ByteWriter().u32(buffer.value()).u16(src).u16(dst).take());
  ev->parties_ = {{src, HalfRole::Sender}, {dst, HalfRole::Receiver}};
  return ev;
}

void EventSystem::notify(const OriginEventPtr& ev) {
  if (ev->state_ != EventState::Created) {
    throw Error(ErrorCode::ContractViolation, "notify on an event that is not Created");
  }
  ev->deadline_ = ep_.now() + static_cast<Micros>(opts_.timeout.count());
  try {
    for (auto [node, role] : ev->parties_) {
      Frame f;
      f.origin = ev->origin_;
      f.etype = static_cast<std::uint8_t>(ev->type_);
      f.payload = ByteWriter().u64(ev->tag_).u16(ev->channel_).u8(static_cast<std::uint8_t>(role))
                      .bytes(ev->args_).take();
      ep_.send(node, std::move(f));
      ++notifications_sent_;
      record(ev->origin_, ev->tag_, ev->type_, EventState::Notified);
    }
    ev->state_ = EventState::Notified;
    if (ev->type_ == EventType::SubmitData) {
      send_data(ev->destination_, ev->origin_, ev->tag_, ev->channel_, ev->type_, ev->data_);
      Bytes().swap(ev->data_);
    }
  } catch (const Error& e) {
    fail(*ev, e.what());
  }
}

void EventSystem::fail(OriginEvent& ev, const std::string& why) {
  if (ev.finished()) return;
  ev.state_ = EventState::Failed;
  ev.error_ = why;
  record(ev.origin_, ev.tag_, ev.type_, EventState::Failed);
}

bool EventSystem::progress(const OriginEventPtr& ev) {
  if (ev->finished()) return true;
  if (ev->state_ == EventState::Created) return false;
  const MatchKey key{ev->origin_, ev->tag_, ev->channel_};
  while (auto f = ep_.try_recv(key)) {
    if (f->etype & kCompletionFlag) {
      ++completions_received_;
      ByteReader r(f->payload);
      std::uint8_t status = r.u8();
      auto rest = r.rest();
      if (status != 0) {
        fail(*ev, std::string(reinterpret_cast<const char*>(rest.data()), rest.size()));
        return true;
      }
      ev->result_.insert(ev->result_.end(), rest.begin(), rest.end());
      if (++ev->completions_ == static_cast<int>(ev->parties_.size())) {
        ev->state_ = EventState::Done;
        record(ev->origin_, ev->tag_, ev->type_, EventState::Done);
        return true;
      }
    } else {
      ByteReader r(f->payload);
      r.u32();
      r.u32();
      if (r.u64() != ev->tag_) {
        fail(*ev, "data frame carries a foreign tag");
        return true;
      }
      auto rest = r.rest();
      ev->result_.insert(ev->result_.end(), rest.begin(), rest.end());
    }
  }
  if (ep_.now() > ev->deadline_) {
    fail(*ev, "timed out waiting for " + std::string(to_string(ev->type_)) + " on node " +
                  std::to_string(ev->destination_));
    return true;
  }
  return false;
}

Bytes EventSystem::wait(const OriginEventPtr& ev) {
  if (ev->waiting_.exchange(true)) {
    throw Error(ErrorCode::ContractViolation, "event " + std::to_string(ev->tag_) + " already has a waiter");
  }
  struct Release {
    OriginEvent& e;
    ~Release() { e.waiting_ = false; }
  } release{*ev};
  for (;;) {
    std::uint64_t gen = ep_.activity();
    if (progress(ev)) break;
    if (ep_.virtual_time()) {
      throw Error(ErrorCode::ContractViolation, "blocking wait under virtual time");
    }
    Micros left = ev->deadline_ - ep_.now();
    ep_.wait_activity(gen, Timeout(static_cast<std::int64_t>(std::clamp(left, 1.0, 50000.0))));
  }
  if (ev->state_ == EventState::Failed) {
    throw Error(ErrorCode::EventFailed, std::string(to_string(ev->type_)) + " tag " +
                                            std::to_string(ev->tag_) + ": " + ev->error_);
  }
  return ev->result_;
}

// ---------------------------------------------------------------------------

void EventSystem::send_data(NodeId dst, NodeId origin, std::uint64_t tag, std::uint16_t channel,
                            EventType type, std::span<const std::byte> bytes) {
  const std::size_t chunk = std::max<std::size_t>(1, opts_.max_chunk);
  const std::uint32_t count = static_cast<std::uint32_t>(std::max<std::size_t>(1, (bytes.size() + chunk - 1) / chunk));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::size_t off = static_cast<std::size_t>(i) * chunk;
    std::size_t len = std::min(chunk, bytes.size() - std::min(off, bytes.size()));
    Frame f;
    f.origin = origin;
    f.tag = tag;
    f.channel = channel;
    f.etype = static_cast<std::uint8_t>(type);
    f.payload = ByteWriter().u32(i).u32(count).u64(tag).bytes(bytes.subspan(std::min(off, bytes.size()), len)).take();
    ep_.send(dst, std::move(f));
  }
}

void EventSystem::send_completion(const DestinationEvent& ev, bool ok, std::span<const std::byte> result) {
  Frame f;
  f.origin = ev.origin;
  f.tag = ev.tag;
  f.channel = ev.channel;
  f.etype = static_cast<std::uint8_t>(ev.type) | kCompletionFlag;
  f.payload = ByteWriter().u8(ok ? 0 : 1).bytes(result).take();
  ep_.send(ev.origin, std::move(f));
  ++completions_sent_;
}

bool EventSystem::take_data(DestinationEvent& ev) {
  bool got = false;
  const MatchKey key{ev.origin, ev.tag, ev.channel};
  while (ev.chunks_expected == 0 || ev.chunks_seen < ev.chunks_expected) {
    auto f = ep_.try_recv(key);
    if (!f) break;
    ByteReader r(f->payload);
    std::uint32_t idx = r.u32();
    std::uint32_t count = r.u32();
    if (r.u64() != ev.tag || idx != ev.chunks_seen || count == 0) {
      throw Error(ErrorCode::FrameError, "out-of-sequence data frame for tag " + std::to_string(ev.tag));
    }
    ev.chunks_expected = count;
    ++ev.chunks_seen;
    auto rest = r.rest();
    ev.inbox.insert(ev.inbox.end(), rest.begin(), rest.end());
    got = true;
  }
  return got;
}

void EventSystem::enqueue_notification(Frame frame) {
  try {
    ByteReader r(frame.payload);
    auto ev = std::make_shared<DestinationEvent>();
    ev->origin = frame.origin;
    ev->tag = r.u64();
    ev->channel = r.u16();
    std::uint8_t role = r.u8();
    if (frame.etype < 1 || frame.etype > static_cast<std::uint8_t>(EventType::Exit) || role > 2 || ev->tag == 0) {
      throw Error(ErrorCode::FrameError, "malformed notification");
    }
    ev->type = static_cast<EventType>(frame.etype);
    ev->role = static_cast<HalfRole>(role);
    auto rest = r.rest();
    ev->args.assign(rest.begin(), rest.end());
    ++halves_created_;
    record(ep_.rank(), ev->tag, ev->type, EventState::Queued);
    queue_.push(std::move(ev));
  } catch (const Error& e) {
    std::fprintf(stderr, "taskmesh[%u]: dropping notification from %u: %s\n", ep_.rank(), frame.origin, e.what());
  }
}

std::size_t EventSystem::gate_step() {
  std::size_t n = 0;
  while (auto f = ep_.try_recv_notification()) {
    enqueue_notification(std::move(*f));
    ++n;
  }
  return n;
}

HandleResult EventSystem::run_half(DestinationEvent& ev, bool& progressed) {
  const NodeId me = ep_.rank();
  auto finish = [&](bool ok, std::span<const std::byte> result) {
    if (ev.state == EventState::PendingIO) record(me, ev.tag, ev.type, EventState::Running);
    ev.state = ok ? EventState::Done : EventState::Failed;
    record(me, ev.tag, ev.type, ev.state);
    send_completion(ev, ok, result);
    progressed = true;
    return HandleResult::Done;
  };
  ByteReader args(ev.args);
  switch (ev.type) {
    case EventType::AllocBuffer: {
      BufferId b(args.u32());
      std::uint64_t size = args.u64();
      if (!store_.contains(b)) store_.put(b, Bytes(size));
      return finish(true, {});
    }
    case EventType::DeleteBuffer: {
      store_.erase(BufferId(args.u32()));
      return finish(true, {});
    }
    case EventType::SubmitData: {
      BufferId b(args.u32());
      progressed |= take_data(ev);
      if (ev.chunks_expected == 0 || ev.chunks_seen < ev.chunks_expected) return HandleResult::PendingIO;
      store_.put(b, std::move(ev.inbox));
      return finish(true, {});
    }
    case EventType::RetrieveData: {
      BufferId b(args.u32());
      auto data = store_.get(b);
      if (!data) throw Error(ErrorCode::MissingBuffer, "buffer " + std::to_string(b.value()) + " not on node");
      send_data(ev.origin, ev.origin, ev.tag, ev.channel, ev.type, *data);
      return finish(true, {});
    }
    case EventType::ExchangeData: {
      BufferId b(args.u32());
      args.u16();
      NodeId dst = args.u16();
      if (ev.role == HalfRole::Sender) {
        auto data = store_.get(b);
        if (!data) throw Error(ErrorCode::MissingBuffer, "buffer " + std::to_string(b.value()) + " not on node");
        send_data(dst, ev.origin, ev.tag, ev.channel, ev.type, *data);
        return finish(true, {});
      }
      progressed |= take_data(ev);
      if (ev.chunks_expected == 0 || ev.chunks_seen < ev.chunks_expected) return HandleResult::PendingIO;
      store_.put(b, std::move(ev.inbox));
      return finish(true, {});
    }
    case EventType::Execute: {
      if (ev.ready_at) {
        if (ep_.now() < *ev.ready_at) return HandleResult::PendingIO;
        return finish(true, ev.result);
      }
      ExecuteArgs ea = ExecuteArgs::decode(ev.args);
      if (!ep_.virtual_time()) return finish(true, executor_(ea, store_));
      // Virtual time: apply the data effect now, finish when the node's processor frees up.
      store_.with_lock([&](std::map<BufferId, Bytes>& m) { apply_kernel(ea, m); });
      Micros dur = static_cast<double>(ea.kernel.iterations) / opts_.sim_iterations_per_us;
      {
        std::lock_guard lk(compute_mu_);
        compute_free_ = std::max(compute_free_, ep_.now()) + dur;
        ev.ready_at = compute_free_;
      }
      ev.result = ByteWriter().f64(dur).take();
      progressed = true;
      if (ep_.now() >= *ev.ready_at) return finish(true, ev.result);
      ep_.wake_at(*ev.ready_at);
      return HandleResult::PendingIO;
    }
    case EventType::Sync:
      return finish(true, ByteWriter().f64(ep_.now()).take());
    case EventType::Exit: {
      ev.state = EventState::Done;
      record(me, ev.tag, ev.type, ev.state);
      Bytes result = exit_hook_ ? exit_hook_() : Bytes{};
      send_completion(ev, true, result);
      progressed = true;
      exit_seen_ = true;
      return HandleResult::Done;
    }
  }
  throw Error(ErrorCode::FrameError, "unknown event type");
}

HandleResult EventSystem::handle(DestinationEvent& ev, bool* progressed_out) {
  const NodeId me = ep_.rank();
  const EventState before = ev.state;
  if (before == EventState::Queued) {
    ev.state = EventState::Running;
    record(me, ev.tag, ev.type, EventState::Running);
  }
  bool progressed = before == EventState::Queued;
  bool step_progress = false;
  HandleResult r;
  try {
    r = run_half(ev, step_progress);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    if (ev.state == EventState::PendingIO) record(me, ev.tag, ev.type, EventState::Running);
    ev.state = EventState::Failed;
    record(me, ev.tag, ev.type, EventState::Failed);
    try {
      send_completion(ev, false, std::as_bytes(std::span(msg.data(), msg.size())));
    } catch (const Error&) {
    }
    if (progressed_out) *progressed_out = true;
    return HandleResult::Done;
  }
  progressed |= step_progress;
  if (r == HandleResult::PendingIO) {
    if (before == EventState::PendingIO && step_progress) record(me, ev.tag, ev.type, EventState::Running);
    if (ev.state != EventState::PendingIO || step_progress) {
      ev.state = EventState::PendingIO;
      record(me, ev.tag, ev.type, EventState::PendingIO);
    }
  }
  if (progressed_out) *progressed_out = progressed;
  return r;
}

bool EventSystem::handler_step() {
  bool any = false;
  std::size_t n = queue_.size();
  for (std::size_t i = 0; i < n; ++i) {
    DestinationEventPtr ev = queue_.try_pop();
    if (!ev) break;
    bool progressed = false;
    if (handle(*ev, &progressed) == HandleResult::PendingIO) queue_.push(std::move(ev));
    any |= progressed;
  }
  return any;
}

void EventSystem::gate_loop() {
  while (!stopping_ && !exit_seen_) {
    if (auto f = ep_.recv_notification(std::chrono::milliseconds(200))) enqueue_notification(std::move(*f));
  }
}

void EventSystem::handler_loop() {
  for (;;) {
    bool stale = false;
    std::uint64_t gen = ep_.activity();
    DestinationEventPtr ev = queue_.pop(gen, stale);
    if (!ev) return;
    if (stale) ep_.wait_activity(gen, std::chrono::milliseconds(5));
    std::uint64_t seen = ep_.activity();
    if (handle(*ev) == HandleResult::PendingIO) {
      ev->has_pending_gen = true;
      ev->pending_gen = seen;
      queue_.push(std::move(ev));
    } else if (exit_seen_) {
      queue_.close();
      ep_.interrupt();
    }
  }
}

void EventSystem::start() {
  if (gate_.joinable()) return;
  gate_ = std::thread([this] { gate_loop(); });
  for (std::size_t i = 0; i < opts_.handlers; ++i) pool_.emplace_back([this] { handler_loop(); });
}

void EventSystem::join() {
  if (gate_.joinable()) gate_.join();
  for (auto& t : pool_) {
    if (t.joinable()) t.join();
  }
  pool_.clear();
}

void EventSystem::stop() {
  if (!gate_.joinable() && pool_.empty()) return;
  stopping_ = true;
  queue_.close();
  ep_.interrupt();
  join();
}

}  // namespace taskmesh
