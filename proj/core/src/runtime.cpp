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

#include "taskmesh/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "taskmesh/tcp_transport.hpp"

namespace taskmesh {

const char* to_string(TransportKind t) { return t == TransportKind::Sim ? "sim" : "tcp"; }

TransportKind parse_transport(std::string_view name) {
  if (name == "sim") return TransportKind::Sim;
  if (name == "tcp") return TransportKind::Tcp;
  throw Error(ErrorCode::ConfigError, "unknown transport '" + std::string(name) + "'");
}

Micros RunReport::busy_max() const {
  Micros m = 0;
  for (Micros b : busy_us) m = std::max(m, b);
  return m;
}

double RunReport::overhead_fraction() const {
  if (wall_us <= 0) return 0;
  return std::clamp(1.0 - busy_max() / wall_us, 0.0, 1.0);
}

void write_report(std::ostream& os, const RunReport& r) {
  char buf[64];
  auto num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.3f", v);
    os << key << " = " << buf << '\n';
  };
  os << "ok = " << (r.ok ? "true" : "false") << '\n';
  if (!r.ok) os << "error = " << r.error << '\n';
  num("wall_us", r.wall_us);
  num("startup_us", r.startup_us);
  num("scheduling_us", r.scheduling_us);
  num("shutdown_us", r.shutdown_us);
  num("busy_max_us", r.busy_max());
  for (std::size_t i = 0; i < r.busy_us.size(); ++i) {
    num(("busy_us." + std::to_string(i)).c_str(), r.busy_us[i]);
  }
  num("startup_fraction", r.startup_fraction());
  num("scheduling_fraction", r.scheduling_fraction());
  num("shutdown_fraction", r.shutdown_fraction());
  num("overhead_fraction", r.overhead_fraction());
  os << "bytes_moved = " << r.bytes_moved << '\n';
  os << "events = " << r.events << '\n';
  os << "frames = " << r.frames << '\n';
  os << "tasks = " << r.tasks << '\n';
  os << "edges = " << r.edges << '\n';
  os << "eft_work = " << r.eft_work << '\n';
  num("makespan_estimate_us", r.makespan_estimate);
}

// ---------------------------------------------------------------------------

Orchestrator::Orchestrator(EventSystem& events, const TaskGraph& graph, const RunConfig& config)
    : es_(events), graph_(graph), cfg_(config) {
  report_.tasks = graph.task_count();
  report_.edges = graph.edge_count();
  report_.busy_us.assign(config.workers + 1, 0);
}

void Orchestrator::begin(std::optional<Micros> start) {
  Endpoint& ep = es_.endpoint();
  t0_ = start.value_or(ep.now());
  for (const Buffer& b : graph_.buffers()) es_.store().put(b.id, initial_content(b.id, b.size_bytes));
  try {
    for (NodeId w = 1; w <= cfg_.workers; ++w) {
      auto ev = es_.create_origin(EventType::Sync, w, ByteWriter().f64(ep.now()).take());
      es_.notify(ev);
      phase_events_.push_back(ev);
      ++report_.events;
    }
  } catch (const Error& e) {
    abort(e.what());
  }
}

void Orchestrator::abort(const std::string& why) {
  if (phase_ == Phase::Finished) return;
  report_.ok = false;
  report_.error = why;
  report_.wall_us = es_.endpoint().now() - t0_;
  phase_ = Phase::Finished;
}

bool Orchestrator::all_done(std::vector<OriginEventPtr>& evs) {
  bool done = true;
  for (auto& ev : evs) {
    if (!ev) continue;
    if (!es_.progress(ev)) {
      done = false;
      continue;
    }
    if (ev->state() == EventState::Failed) {
      abort(std::string(to_string(ev->type())) + " event " + std::to_string(ev->tag()) + " failed: " + ev->error());
      return false;
    }
    if (auto it = retrievals_.find(ev->tag()); it != retrievals_.end()) {
      es_.store().put(it->second, ev->result());
      retrievals_.erase(it);
    }
  }
  return done;
}

void Orchestrator::log_action(const TransferAction& a) {
  if (cfg_.trace) {
    cfg_.trace->add(DataRow{es_.endpoint().now(), to_string(a.kind), a.buffer.value(), a.src, a.dst});
  }
}

void Orchestrator::log_task(TaskId t, const char* state) {
  if (cfg_.trace) {
    cfg_.trace->add(TaskRow{es_.endpoint().now(), t.value(), schedule_.node_of(t), state});
  }
}

OriginEventPtr Orchestrator::issue(const TransferAction& a) {
  log_action(a);
  const std::uint64_t size = graph_.buffer(a.buffer).size_bytes;
  OriginEventPtr ev;
  switch (a.kind) {
    case ActionKind::Alloc:
      return nullptr;  // lazy: the first arriving copy allocates
    case ActionKind::Forward:
      report_.bytes_moved += size;
      if (a.src == kHeadNode) {
        auto data = es_.store().get(a.buffer);
        if (!data) throw Error(ErrorCode::MissingBuffer, "head lost buffer " + std::to_string(a.buffer.value()));
        ev = es_.create_origin(EventType::SubmitData, a.dst, buffer_args(a.buffer, size), std::move(*data));
      } else if (a.dst == kHeadNode) {
        ev = es_.create_origin(EventType::RetrieveData, a.src, buffer_args(a.buffer, size));
        retrievals_[ev->tag()] = a.buffer;
      } else {
        ev = es_.create_exchange(a.buffer, a.src, a.dst);
      }
      break;
    case ActionKind::Retrieve:
      report_.bytes_moved += size;
      ev = es_.create_origin(EventType::RetrieveData, a.src, buffer_args(a.buffer, size));
      retrievals_[ev->tag()] = a.buffer;
      break;
    case ActionKind::Remove:
      if (a.dst == kHeadNode) return nullptr;
      ev = es_.create_origin(EventType::DeleteBuffer, a.dst, buffer_args(a.buffer));
      break;
  }
  es_.notify(ev);
  ++report_.events;
  all_events_.push_back(ev);
  return ev;
}

std::size_t Orchestrator::executing() const {
  std::size_t n = 0;
  for (TaskId t : active_) {
    if (!is_data_task(graph_.task(t).kind)) ++n;
  }
  return n;
}

void Orchestrator::start_task(TaskId t) {
  const Task& task = graph_.task(t);
  const NodeId node = schedule_.node_of(t);
  TaskRun& run = runs_[t.value()];
  run.phase = TaskPhase::Staging;
  log_task(t, "Dispatched");
  active_.push_back(t);
  auto track = [&](const TransferAction& a, OriginEventPtr ev) {
    if (!ev) return;
    run.waits.push_back(ev);
    if (a.kind == ActionKind::Forward || a.kind == ActionKind::Retrieve) {
      arrivals_[{a.dst, a.buffer.value()}] = ev;
    }
  };
  switch (task.kind) {
    case TaskKind::TargetDataEnter:
      for (const auto& d : task.deps) {
        if (cfg_.trace) cfg_.trace->add(DataRow{es_.endpoint().now(), "Register", d.buffer.value(), kHeadNode, kHeadNode});
        for (const auto& a : dm_->on_enter_data(d.buffer, t)) track(a, issue(a));
      }
      break;
    case TaskKind::TargetDataExit:
      for (const auto& d : task.deps) {
        for (const auto& a : dm_->on_exit_data(d.buffer, task.release)) {
          if (a.kind == ActionKind::Remove) {
            run.deferred.push_back(a);
          } else {
            track(a, issue(a));
          }
        }
      }
      break;
    default:
      for (const auto& a : dm_->before_execute(task, node)) track(a, issue(a));
      for (const auto& d : task.deps) {
        auto it = arrivals_.find({node, d.buffer.value()});
        if (it != arrivals_.end() && !it->second->finished()) run.waits.push_back(it->second);
      }
      break;
  }
}

bool Orchestrator::advance_task(TaskId t) {
  const Task& task = graph_.task(t);
  const NodeId node = schedule_.node_of(t);
  TaskRun& run = runs_[t.value()];
  Endpoint& ep = es_.endpoint();
  switch (run.phase) {
    case TaskPhase::Staging: {
      if (!all_done(run.waits)) return false;
      run.waits.clear();
      if (is_data_task(task.kind)) {
        for (const auto& a : run.deferred) {
          if (auto ev = issue(a)) run.waits.push_back(ev);
        }
        run.phase = TaskPhase::Finishing;
        return true;
      }
      if (node == kHeadNode) {
        ExecuteArgs args = ExecuteArgs::from_task(graph_, task);
        if (ep.virtual_time()) {
          es_.store().with_lock([&](std::map<BufferId, Bytes>& m) { apply_kernel(args, m); });
          Micros dur = static_cast<double>(task.payload.iterations) / cfg_.sim_iterations_per_us;
          host_free_ = std::max(host_free_, ep.now()) + dur;
          run.host_ready = host_free_;
          report_.busy_us[0] += dur;
          ep.wake_at(host_free_);
        } else {
          report_.busy_us[0] += run_kernel(args, es_.store(), true);
          run.host_ready = ep.now();
        }
      } else {
        run.exec = es_.create_origin(EventType::Execute, node, ExecuteArgs::from_task(graph_, task).encode());
        es_.notify(run.exec);
        ++report_.events;
        all_events_.push_back(run.exec);
      }
      run.phase = TaskPhase::Executing;
      return true;
    }
    case TaskPhase::Executing: {
      if (run.exec) {
        std::vector<OriginEventPtr> one{run.exec};
        if (!all_done(one)) return false;
        ByteReader r(run.exec->result());
        report_.busy_us[node] += r.f64();
      } else if (ep.now() < *run.host_ready) {
        return false;
      }
      TransferPlan after = dm_->after_execute(task, node);
      if (cfg_.trace) {
        for (const auto& d : task.deps) {
          if (writes(d.direction)) cfg_.trace->add(DataRow{ep.now(), "Write", d.buffer.value(), node, node});
        }
      }
      for (const auto& a : after) {
        if (auto ev = issue(a)) run.waits.push_back(ev);
      }
      run.phase = TaskPhase::Finishing;
      return true;
    }
    case TaskPhase::Finishing: {
      if (!all_done(run.waits)) return false;
      run.waits.clear();
      run.phase = TaskPhase::Complete;
      log_task(t, "Complete");
      ++complete_;
      for (auto ei : graph_.out_edges(t)) {
        const Edge& e = graph_.edge(ei);
        TaskRun& next = runs_[e.consumer.value()];
        if (--next.missing == 0) ready_.insert({schedule_.est[e.consumer.value()], e.consumer.value()});
      }
      return true;
    }
    default:
      return false;
  }
}

void Orchestrator::begin_shutdown() {
  phase_ = Phase::Shutdown;
  shutdown_start_ = es_.endpoint().now();
  phase_events_.clear();
  for (NodeId w = 1; w <= cfg_.workers; ++w) {
    auto ev = es_.create_origin(EventType::Exit, w);
    es_.notify(ev);
    phase_events_.push_back(ev);
    ++report_.events;
  }
}

std::optional<Micros> Orchestrator::next_deadline() const {
  std::optional<Micros> best;
  auto scan = [&](const std::vector<OriginEventPtr>& evs) {
    for (const auto& ev : evs) {
      if (ev && !ev->finished() && (!best || ev->deadline() < *best)) best = ev->deadline();
    }
  };
  scan(phase_events_);
  scan(all_events_);
  return best;
}

bool Orchestrator::step() {
  if (phase_ == Phase::Finished) return false;
  Endpoint& ep = es_.endpoint();
  try {
    switch (phase_) {
      case Phase::Startup: {
        if (!all_done(phase_events_)) return false;
        if (phase_ == Phase::Finished) return true;
        report_.startup_us = ep.now() - t0_;
        CostModel cost(cfg_.workers, cfg_.net.latency, cfg_.net.bandwidth);
        auto s0 = std::chrono::steady_clock::now();
        schedule_ = heft_schedule(graph_, cost);
        Micros real = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - s0).count();
        report_.eft_work = schedule_.eft_work;
        report_.makespan_estimate = schedule_.makespan;
        report_.scheduling_us = ep.virtual_time() ? schedule_.eft_work * cfg_.schedule_unit_us : real;
        sched_ready_ = ep.now() + (ep.virtual_time() ? report_.scheduling_us : 0);
        if (ep.virtual_time() && sched_ready_ > ep.now()) ep.wake_at(sched_ready_);
        dm_ = std::make_unique<DataManager>(graph_, schedule_);
        runs_.assign(graph_.task_count(), {});
        for (const Task& t : graph_.tasks()) runs_[t.id.value()].missing = graph_.in_edges(t.id).size();
        phase_ = Phase::Scheduling;
        return true;
      }
      case Phase::Scheduling: {
        if (ep.now() < sched_ready_) return false;
        for (const Task& t : graph_.tasks()) {
          if (runs_[t.id.value()].missing == 0) ready_.insert({schedule_.est[t.id.value()], t.id.value()});
        }
        phase_ = Phase::Running;
        if (graph_.task_count() == 0) begin_shutdown();
        return true;
      }
      case Phase::Running: {
        bool any = false;
        while (!ready_.empty()) {
          auto it = ready_.begin();
          const Task& task = graph_.task(TaskId(it->second));
          if (!is_data_task(task.kind) && cfg_.max_inflight != 0 && executing() >= cfg_.max_inflight) {
            // Data tasks may still pass a saturated limit.
            auto data = std::find_if(ready_.begin(), ready_.end(), [&](const auto& e) {
              return is_data_task(graph_.task(TaskId(e.second)).kind);
            });
            if (data == ready_.end()) break;
            it = data;
          }
          TaskId t(it->second);
          ready_.erase(it);
          start_task(t);
          any = true;
        }
        for (std::size_t i = 0; i < active_.size() && phase_ == Phase::Running; ++i) {
          while (advance_task(active_[i])) {
            any = true;
            if (runs_[active_[i].value()].phase == TaskPhase::Complete) break;
          }
        }
        std::erase_if(active_, [&](TaskId t) { return runs_[t.value()].phase == TaskPhase::Complete; });
        if (phase_ == Phase::Running && complete_ == graph_.task_count()) {
          begin_shutdown();
          any = true;
        }
        return any;
      }
      case Phase::Shutdown: {
        if (!all_done(phase_events_)) return false;
        if (phase_ == Phase::Finished) return true;
        for (auto& ev : phase_events_) exit_results_.push_back(ev->result());
        Micros now = ep.now();
        report_.shutdown_us = now - shutdown_start_;
        report_.wall_us = now - t0_;
        report_.buffers = es_.store().snapshot();
        phase_ = Phase::Finished;
        return true;
      }
      case Phase::Finished:
        return false;
    }
  } catch (const Error& e) {
    abort(e.what());
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace {

Bytes encode_rows(const std::vector<EventRow>& rows) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(rows.size()));
  for (const auto& r : rows) w.f64(r.ts).u16(r.node).u64(r.tag).str(r.etype).str(r.state);
  return w.take();
}

std::vector<EventRow> decode_rows(std::span<const std::byte> bytes) {
  std::vector<EventRow> rows;
  if (bytes.empty()) return rows;
  ByteReader r(bytes);
  std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    EventRow row;
    row.ts = r.f64();
    row.node = r.u16();
    row.tag = r.u64();
    row.etype = r.str();
    row.state = r.str();
    rows.push_back(std::move(row));
  }
  return rows;
}

EventOptions event_options(const RunConfig& cfg, bool sim) {
  EventOptions eo;
  eo.channels = cfg.channels;
  eo.handlers = sim ? 1 : cfg.handlers;
  eo.timeout = cfg.event_timeout;
  eo.spin = !sim;
  eo.sim_iterations_per_us = cfg.sim_iterations_per_us;
  return eo;
}

RunReport run_sim(const TaskGraph& graph, const RunConfig& cfg) {
  SimNetwork net(cfg.workers + 1, cfg.net);
  if (cfg.capture) net.set_capture(cfg.capture);
  const EventOptions eo = event_options(cfg, true);
  std::vector<std::unique_ptr<EventSystem>> nodes;
  for (std::size_t i = 0; i <= cfg.workers; ++i) {
    nodes.push_back(std::make_unique<EventSystem>(net.endpoint(static_cast<NodeId>(i)), eo, cfg.trace));
  }
  Orchestrator orch(*nodes[0], graph, cfg);
  orch.begin(0.0);
  bool killed = false;
  for (;;) {
    bool any = true;
    while (any && !orch.finished()) {
      any = orch.step();
      for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (!net.is_live(static_cast<NodeId>(i))) continue;
        any |= nodes[i]->gate_step() > 0;
        any |= nodes[i]->handler_step();
      }
    }
    if (orch.finished()) break;
    if (cfg.kill_node && !killed && net.now() >= cfg.kill_at) {
      net.kill(*cfg.kill_node);
      killed = true;
      continue;
    }
    if (!net.idle()) {
      net.advance();
      continue;
    }
    auto deadline = orch.next_deadline();
    if (!deadline) {
      orch.report().ok = false;
      orch.report().error = "no progress possible";
      break;
    }
    net.advance_to(*deadline + 1.0);
  }
  RunReport r = std::move(orch.report());
  r.frames = net.frames_delivered();
  return r;
}

RunReport run_tcp(const TaskGraph& graph, const RunConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const EventOptions eo = event_options(cfg, false);
  const auto now_us = [] {
    return std::chrono::duration<double, std::micro>(clock::now().time_since_epoch()).count();
  };
  const Micros t_start = now_us();
  std::unique_ptr<LocalCluster> cluster;
  std::unique_ptr<TcpEndpoint> external;
  TcpEndpoint* ep = nullptr;
  if (cfg.external_workers) {
    TcpListener listener;
    std::fprintf(stderr, "taskmesh: waiting for %zu workers on 127.0.0.1:%u\n", cfg.workers, listener.port());
    external = TcpEndpoint::create_head(listener, cfg.workers, std::chrono::minutes(10));
    ep = external.get();
  } else {
    cluster = std::make_unique<LocalCluster>(cfg.workers, [eo](TcpEndpoint& wep) { return worker_main(wep, eo); });
    ep = &cluster->head();
  }
  if (cfg.capture) ep->set_capture(cfg.capture);
  RunReport r;
  {
    EventSystem head(*ep, eo, cfg.trace);
    Orchestrator orch(head, graph, cfg);
    orch.begin(t_start);
    while (!orch.finished()) {
      std::uint64_t gen = ep->activity();
      if (!orch.step() && !orch.finished()) ep->wait_activity(gen, std::chrono::milliseconds(2));
    }
    r = std::move(orch.report());
    if (cfg.trace) {
      for (const Bytes& b : orch.exit_results()) cfg.trace->add_events(decode_rows(b));
    }
  }
  const Micros before_reap = now_us();
  int code = 0;
  if (cluster && !r.ok) {
    cluster.reset();  // kills stragglers before the readers are joined
  } else {
    ep->shutdown();
    if (cluster) code = cluster->wait();
  }
  const Micros reap = now_us() - before_reap;
  r.shutdown_us += reap;
  r.wall_us += reap;
  r.frames = 0;
  if (code != 0 && r.ok) {
    r.ok = false;
    r.error = "worker exited with status " + std::to_string(code);
  }
  if (cfg.trace) cfg.trace->rebase(t_start);
  return r;
}

}  // namespace

RunReport run_graph(const TaskGraph& graph, const RunConfig& cfg) {
  if (cfg.workers > 0xfffe) throw Error(ErrorCode::ConfigError, "too many workers");
  return cfg.transport == TransportKind::Sim ? run_sim(graph, cfg) : run_tcp(graph, cfg);
}

RunReport run_program(const Program& program, const RunConfig& cfg) {
  return run_graph(derive_edges(program), cfg);
}

int worker_main(Endpoint& ep, const EventOptions& options) {
  TraceLog local;
  EventSystem es(ep, options, &local);
  es.set_exit_hook([&] { return encode_rows(local.events()); });
  es.start();
  es.join();
  return 0;
}

}  // namespace taskmesh
