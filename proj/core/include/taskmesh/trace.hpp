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
#include <mutex>
#include <string>
#include <vector>

#include "taskmesh/graph.hpp"

namespace taskmesh {

/// One event state change: ts_us,node,event_tag,etype,state
struct EventRow {
  Micros ts = 0;
  NodeId node = 0;
  std::uint64_t tag = 0;
  std::string etype;
  std::string state;

  friend bool operator==(const EventRow&, const EventRow&) = default;
};

/// One directory action: ts_us,action,buffer,src,dst
/// Actions are Alloc, Forward, Retrieve, Remove, plus Register and Write.
struct DataRow {
  Micros ts = 0;
  std::string action;
  std::uint32_t buffer = 0;
  NodeId src = 0;
  NodeId dst = 0;

  friend bool operator==(const DataRow&, const DataRow&) = default;
};

/// One task transition: ts_us,task,node,state (Dispatched, Complete).
struct TaskRow {
  Micros ts = 0;
  std::uint32_t task = 0;
  NodeId node = 0;
  std::string state;

  friend bool operator==(const TaskRow&, const TaskRow&) = default;
};

/// Collects rows from any thread.
class TraceLog {
 public:
  void add(EventRow row);
  void add(DataRow row);
  void add(TaskRow row);
  void add_events(const std::vector<EventRow>& rows);

  std::vector<EventRow> events() const;
  std::vector<DataRow> data() const;
  std::vector<TaskRow> tasks() const;

  /// Subtracts `origin` from every timestamp and stable-sorts the event rows by time.
  void rebase(Micros origin);
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<EventRow> events_;
  std::vector<DataRow> data_;
  std::vector<TaskRow> tasks_;
};

void write_events_csv(std::ostream& os, const std::vector<EventRow>& rows);
void write_data_csv(std::ostream& os, const std::vector<DataRow>& rows);
void write_tasks_csv(std::ostream& os, const std::vector<TaskRow>& rows);

/// Readers accept the files written above; TraceError carries the line number.
std::vector<EventRow> read_events_csv(std::istream& is);
std::vector<DataRow> read_data_csv(std::istream& is);
std::vector<TaskRow> read_tasks_csv(std::istream& is);

struct CheckResult {
  std::string name;
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
};

/// Every edge (u, v): u's Complete row precedes v's Dispatched row.
CheckResult check_dag_order(const std::vector<Edge>& edges, const std::vector<TaskRow>& rows);
/// Forward and Retrieve sources hold a current copy.
CheckResult check_freshness(const std::vector<DataRow>& rows);
/// No Forward out of the head while the current copy was written on a worker.
CheckResult check_no_head_relay(const std::vector<DataRow>& rows);
/// Once the removes following a Write are issued, the writer holds the only copy.
CheckResult check_single_writer(const std::vector<DataRow>& rows);
/// Per tag: notifications sent = destination halves queued = halves finished, one origin verdict.
CheckResult check_conservation(const std::vector<EventRow>& rows);
/// Tags are created once per origin and never change event type.
CheckResult check_tag_isolation(const std::vector<EventRow>& rows);

}  // namespace taskmesh
