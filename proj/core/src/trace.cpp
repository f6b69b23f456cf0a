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

#include "taskmesh/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace taskmesh {

void TraceLog::add(EventRow row) {
  std::lock_guard lk(mu_);
  events_.push_back(std::move(row));
}

void TraceLog::add(DataRow row) {
  std::lock_guard lk(mu_);
  data_.push_back(std::move(row));
}

void TraceLog::add(TaskRow row) {
  std::lock_guard lk(mu_);
  tasks_.push_back(std::move(row));
}

void TraceLog::add_events(const std::vector<EventRow>& rows) {
  std::lock_guard lk(mu_);
  events_.insert(events_.end(), rows.begin(), rows.end());
}

std::vector<EventRow> TraceLog::events() const {
  std::lock_guard lk(mu_);
  return events_;
}

std::vector<DataRow> TraceLog::data() const {
  std::lock_guard lk(mu_);
  return data_;
}

std::vector<TaskRow> TraceLog::tasks() const {
  std::lock_guard lk(mu_);
  return tasks_;
}

void TraceLog::rebase(Micros origin) {
  std::lock_guard lk(mu_);
  for (auto& r : events_) r.ts -= origin;
  for (auto& r : data_) r.ts -= origin;
  for (auto& r : tasks_) r.ts -= origin;
  std::stable_sort(events_.begin(), events_.end(),
                   [](const EventRow& a, const EventRow& b) { return a.ts < b.ts; });
}

void TraceLog::clear() {
  std::lock_guard lk(mu_);
  events_.clear();
  data_.clear();
  tasks_.clear();
}

namespace {

std::string ts_str(Micros ts) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", ts);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename Row, typename Parse>
std::vector<Row> read_csv(std::istream& is, const std::string& header, std::size_t fields, Parse parse) {
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != header) {
        throw Error(ErrorCode::TraceError, "line " + std::to_string(lineno) + ": expected header '" + header + "'");
      }
      seen_header = true;
      continue;
    }
    auto f = split(line);
    if (f.size() != fields) {
      throw Error(ErrorCode::TraceError, "line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(fields) + " fields");
    }
    try {
      rows.push_back(parse(f));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::TraceError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

constexpr const char* kEventsHeader = "ts_us,node,event_tag,etype,state";
constexpr const char* kDataHeader = "ts_us,action,buffer,src,dst";
constexpr const char* kTasksHeader = "ts_us,task,node,state";

NodeId to_node(const std::string& s) { return static_cast<NodeId>(std::stoul(s)); }

}  // namespace

void write_events_csv(std::ostream& os, const std::vector<EventRow>& rows) {
  os << kEventsHeader << '\n';
  for (const auto& r : rows) {
    os << ts_str(r.ts) << ',' << r.node << ',' << r.tag << ',' << r.etype << ',' << r.state << '\n';
  }
}

void write_data_csv(std::ostream& os, const std::vector<DataRow>& rows) {
  os << kDataHeader << '\n';
  for (const auto& r : rows) {
    os << ts_str(r.ts) << ',' << r.action << ',' << r.buffer << ',' << r.src << ',' << r.dst << '\n';
  }
}

void write_tasks_csv(std::ostream& os, const std::vector<TaskRow>& rows) {
  os << kTasksHeader << '\n';
  for (const auto& r : rows) {
    os << ts_str(r.ts) << ',' << r.task << ',' << r.node << ',' << r.state << '\n';
  }
}

std::vector<EventRow> read_events_csv(std::istream& is) {
  return read_csv<EventRow>(is, kEventsHeader, 5, [](const std::vector<std::string>& f) {
    return EventRow{std::stod(f[0]), to_node(f[1]), std::stoull(f[2]), f[3], f[4]};
  });
}

std::vector<DataRow> read_data_csv(std::istream& is) {
  return read_csv<DataRow>(is, kDataHeader, 5, [](const std::vector<std::string>& f) {
    return DataRow{std::stod(f[0]), f[1], static_cast<std::uint32_t>(std::stoul(f[2])), to_node(f[3]),
                   to_node(f[4])};
  });
}

std::vector<TaskRow> read_tasks_csv(std::istream& is) {
  return read_csv<TaskRow>(is, kTasksHeader, 4, [](const std::vector<std::string>& f) {
    return TaskRow{std::stod(f[0]), static_cast<std::uint32_t>(std::stoul(f[1])), to_node(f[2]), f[3]};
  });
}

// ---------------------------------------------------------------------------

CheckResult check_dag_order(const std::vector<Edge>& edges, const std::vector<TaskRow>& rows) {
  CheckResult r{"dag-order", {}};
  std::map<std::uint32_t, std::size_t> dispatched, complete;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& slot = rows[i].state == "Dispatched" ? dispatched : complete;
    if (rows[i].state != "Dispatched" && rows[i].state != "Complete") {
      r.problems.push_back("row " + std::to_string(i) + ": unknown task state " + rows[i].state);
      continue;
    }
    if (!slot.emplace(rows[i].task, i).second) {
      r.problems.push_back("task " + std::to_string(rows[i].task) + " " + rows[i].state + " twice");
    }
  }
  for (const auto& [t, i] : complete) {
    auto d = dispatched.find(t);
    if (d == dispatched.end() || d->second > i) {
      r.problems.push_back("task " + std::to_string(t) + " completed without being dispatched first");
    }
  }
  for (const Edge& e : edges) {
    auto c = complete.find(e.producer.value());
    auto d = dispatched.find(e.consumer.value());
    if (d == dispatched.end()) continue;
    if (c == complete.end() || c->second > d->second || rows[c->second].ts > rows[d->second].ts) {
      r.problems.push_back("task " + std::to_string(e.consumer.value()) + " dispatched before task " +
                           std::to_string(e.producer.value()) + " completed");
    }
  }
  return r;
}

namespace {

/// Replays data rows, keeping per buffer the physical copies and the current ones.
struct CopyState {
  std::set<NodeId> present{kHeadNode};
  std::set<NodeId> valid{kHeadNode};
  NodeId last_writer = kHeadNode;
  bool open_write = false;
  NodeId writer = kHeadNode;
};

template <typename Visit>
void replay(const std::vector<DataRow>& rows, Visit visit) {
  std::map<std::uint32_t, CopyState> st;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const DataRow& row = rows[i];
    CopyState& s = st[row.buffer];
    visit(i, row, s, /*before=*/true);
    if (row.action == "Register") {
      s = CopyState{};
    } else if (row.action == "Forward" || row.action == "Retrieve") {
      s.present.insert(row.dst);
      s.valid.insert(row.dst);
    } else if (row.action == "Write") {
      s.present.insert(row.dst);
      s.valid = {row.dst};
      s.last_writer = row.dst;
    } else if (row.action == "Remove") {
      s.present.erase(row.dst);
      s.valid.erase(row.dst);
    }
    visit(i, row, s, /*before=*/false);
  }
  for (auto& [b, s] : st) visit(rows.size(), DataRow{0, "End", b, 0, 0}, s, true);
}

std::string where(std::size_t i, const DataRow& row) {
  return "row " + std::to_string(i) + " (" + row.action + " buffer " + std::to_string(row.buffer) + " " +
         std::to_string(row.src) + "->" + std::to_string(row.dst) + ")";
}

}  // namespace

CheckResult check_freshness(const std::vector<DataRow>& rows) {
  CheckResult r{"freshness", {}};
  replay(rows, [&](std::size_t i, const DataRow& row, CopyState& s, bool before) {
    if (!before) return;
    if ((row.action == "Forward" || row.action == "Retrieve") && !s.valid.count(row.src)) {
      r.problems.push_back(where(i, row) + ": source is stale");
    }
    if (row.action == "Remove" && !s.present.count(row.dst)) {
      r.problems.push_back(where(i, row) + ": nothing to remove");
    }
  });
  return r;
}

CheckResult check_no_head_relay(const std::vector<DataRow>& rows) {
  CheckResult r{"no-head-relay", {}};
  replay(rows, [&](std::size_t i, const DataRow& row, CopyState& s, bool before) {
    if (before && row.action == "Forward" && row.src == kHeadNode && row.dst != kHeadNode &&
        s.last_writer != kHeadNode) {
      r.problems.push_back(where(i, row) + ": relays a copy written on node " + std::to_string(s.last_writer));
    }
  });
  return r;
}

CheckResult check_single_writer(const std::vector<DataRow>& rows) {
  CheckResult r{"single-writer", {}};
  replay(rows, [&](std::size_t i, const DataRow& row, CopyState& s, bool before) {
    if (before && s.open_write && row.action != "Remove") {
      // Quiescent point: the removes that followed the write are all issued.
      std::set<NodeId> holders;
      for (NodeId n : s.present) {
        if (n != kHeadNode || s.valid.count(kHeadNode)) holders.insert(n);
      }
      if (holders != std::set<NodeId>{s.writer}) {
        r.problems.push_back(where(i, row) + ": " + std::to_string(holders.size()) +
                             " copies after write on node " + std::to_string(s.writer));
      }
      s.open_write = false;
    }
    if (!before && row.action == "Write") {
      s.open_write = true;
      s.writer = row.dst;
    }
  });
  return r;
}

CheckResult check_conservation(const std::vector<EventRow>& rows) {
  CheckResult r{"conservation", {}};
  struct Count {
    int created = 0;
    NodeId origin = 0;
    int notified = 0, queued = 0, finished = 0, origin_final = 0;
  };
  std::map<std::uint64_t, Count> by_tag;
  for (const auto& row : rows) {
    if (row.state == "Created") {
      Count& c = by_tag[row.tag];
      ++c.created;
      c.origin = row.node;
    }
  }
  for (const auto& row : rows) {
    Count& c = by_tag[row.tag];
    bool at_origin = c.created > 0 && row.node == c.origin;
    bool terminal = row.state == "Done" || row.state == "Failed";
    if (at_origin) {
      if (row.state == "Notified") ++c.notified;
      if (terminal) ++c.origin_final;
    } else {
      if (row.state == "Queued") ++c.queued;
      if (terminal) ++c.finished;
    }
  }
  for (const auto& [tag, c] : by_tag) {
    std::string t = "tag " + std::to_string(tag) + ": ";
    if (c.created != 1) {
      r.problems.push_back(t + "created " + std::to_string(c.created) + " times");
      continue;
    }
    if (c.notified != c.queued || c.queued != c.finished) {
      r.problems.push_back(t + std::to_string(c.notified) + " notified, " + std::to_string(c.queued) +
                           " queued, " + std::to_string(c.finished) + " finished");
    }
    if (c.origin_final != 1) {
      r.problems.push_back(t + std::to_string(c.origin_final) + " completions at origin");
    }
  }
  return r;
}

CheckResult check_tag_isolation(const std::vector<EventRow>& rows) {
  CheckResult r{"tag-isolation", {}};
  std::map<std::pair<NodeId, std::uint64_t>, int> created;
  std::map<std::uint64_t, std::string> etype;
  for (const auto& row : rows) {
    if (row.tag == 0) r.problems.push_back("tag 0 is reserved for notifications");
    if (row.state == "Created" && ++created[{row.node, row.tag}] == 2) {
      r.problems.push_back("tag " + std::to_string(row.tag) + " reused on node " + std::to_string(row.node));
    }
    auto [it, fresh] = etype.emplace(row.tag, row.etype);
    if (!fresh && it->second != row.etype) {
      r.problems.push_back("tag " + std::to_string(row.tag) + " seen as " + it->second + " and " + row.etype);
    }
  }
  return r;
}

}  // namespace taskmesh
