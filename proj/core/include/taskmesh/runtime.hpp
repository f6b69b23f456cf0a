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
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taskmesh/datamgr.hpp"
#include "taskmesh/events.hpp"
#include "taskmesh/scheduler.hpp"
#include "taskmesh/sim_transport.hpp"

namespace taskmesh {

enum class TransportKind { Sim, Tcp };

const char* to_string(TransportKind t);
TransportKind parse_transport(std::string_view name);

struct RunConfig {
  TransportKind transport = TransportKind::Sim;
  std::size_t workers = 2;
  /// Link model. The simulator uses all of it; HEFT uses latency and bandwidth.
  NetModel net{};
  std::uint16_t channels = 8;
  std::size_t handlers = 0;
  /// 0 means unlimited.
  std::size_t max_inflight = 0;
  /// Simulator kernel speed.
  double sim_iterations_per_us = 200.0;
  /// Simulator: virtual cost of one EFT work unit.
  Micros schedule_unit_us = 0.01;
  Timeout event_timeout = std::chrono::seconds(60);
  /// Simulator fault injection: node to kill at `kill_at` virtual microseconds.
  std::optional<NodeId> kill_node;
  Micros kill_at = 0;
  /// TCP: wait for externally started `taskmesh worker` processes instead of forking.
  bool external_workers = false;
  TraceLog* trace = nullptr;
  std::ostream* capture = nullptr;
};

struct RunReport {
  bool ok = true;
  std::string error;
  Micros wall_us = 0;
  Micros startup_us = 0;
  Micros scheduling_us = 0;
  Micros shutdown_us = 0;
  /// Kernel time per node, head first.
  std::vector<Micros> busy_us;
  std::uint64_t bytes_moved = 0;
  std::uint64_t events = 0;
  std::uint64_t frames = 0;
  std::uint64_t tasks = 0;
  std::uint64_t edges = 0;
  std::uint64_t eft_work = 0;
  Micros makespan_estimate = 0;
  /// Buffers on the head at the end of the run.
  std::map<BufferId, Bytes> buffers;

  Micros busy_max() const;
  /// 1 - busiest node's kernel time / wall time.
  double overhead_fraction() const;
  double startup_fraction() const { return wall_us > 0 ? startup_us / wall_us : 0; }
  double scheduling_fraction() const { return wall_us > 0 ? scheduling_us / wall_us : 0; }
  double shutdown_fraction() const { return wall_us > 0 ? shutdown_us / wall_us : 0; }
};

/// Flat `key = value` text, one metric per line.
void write_report(std::ostream& os, const RunReport& r);

/// Head-side driver for one program: startup, barrier scheduling, dispatch, shutdown.
/// Shared by the simulator and TCP drivers; never blocks.
class Orchestrator {
 public:
  Orchestrator(EventSystem& events, const TaskGraph& graph, const RunConfig& config);

  /// `start` is when the run began on this node's clock; defaults to now.
  void begin(std::optional<Micros> start = std::nullopt);
  /// Advances whatever can advance. True if anything changed.
  bool step();
  bool finished() const { return phase_ == Phase::Finished; }
  /// Earliest pending event deadline, for idle virtual time.
  std::optional<Micros> next_deadline() const;

  const Schedule& schedule() const { return schedule_; }
  RunReport& report() { return report_; }
  /// Worker Exit results, in rank order, once finished.
  const std::vector<Bytes>& exit_results() const { return exit_results_; }

 private:
  enum class Phase { Startup, Scheduling, Running, Shutdown, Finished };
  enum class TaskPhase { Waiting, Staging, Executing, Finishing, Complete };

  struct TaskRun {
    TaskPhase phase = TaskPhase::Waiting;
    std::size_t missing = 0;
    std::vector<OriginEventPtr> waits;
    TransferPlan deferred;  // removes issued once `waits` finish
    OriginEventPtr exec;
    std::optional<Micros> host_ready;
  };

  void abort(const std::string& why);
  OriginEventPtr issue(const TransferAction& a);
  void log_action(const TransferAction& a);
  void log_task(TaskId t, const char* state);
  bool all_done(std::vector<OriginEventPtr>& evs);
  void start_task(TaskId t);
  bool advance_task(TaskId t);
  void finish_task(TaskId t);
  void begin_shutdown();
  std::size_t executing() const;

  EventSystem& es_;
  const TaskGraph& graph_;
  const RunConfig& cfg_;
  Phase phase_ = Phase::Startup;
  Micros t0_ = 0;
  Micros sched_ready_ = 0;
  Micros shutdown_start_ = 0;
  Micros host_free_ = 0;
  std::map<std::uint64_t, BufferId> retrievals_;
  std::vector<OriginEventPtr> phase_events_;
  Schedule schedule_;
  std::unique_ptr<DataManager> dm_;
  std::vector<TaskRun> runs_;
  std::set<std::pair<Micros, std::uint32_t>> ready_;
  std::vector<TaskId> active_;
  std::size_t complete_ = 0;
  std::map<std::pair<NodeId, std::uint32_t>, OriginEventPtr> arrivals_;
  std::vector<OriginEventPtr> all_events_;
  RunReport report_;
  std::vector<Bytes> exit_results_;
};

/// Runs `program` to completion on the configured transport.
RunReport run_program(const Program& program, const RunConfig& config);
RunReport run_graph(const TaskGraph& graph, const RunConfig& config);

/// Body of a worker process: serve events until Exit. Returns the exit code.
int worker_main(Endpoint& ep, const EventOptions& options);

}  // namespace taskmesh
