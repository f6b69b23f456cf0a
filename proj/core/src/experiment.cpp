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

#include "taskmesh/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace taskmesh {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& v) {
  std::size_t pos = 0;
  if (v.empty() || v[0] == '-') throw std::invalid_argument("expected a non-negative integer");
  std::uint64_t x = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("expected a non-negative integer");
  return x;
}

double to_f64(const std::string& v) {
  std::size_t pos = 0;
  double x = std::stod(v, &pos);
  if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument("expected a number");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& v) {
  if (key == "transport") c.transport = parse_transport(v);
  else if (key == "nodes") c.nodes = to_u64(v);
  else if (key == "pattern") c.pattern = parse_pattern(v);
  else if (key == "width") c.width = static_cast<std::uint32_t>(to_u64(v));
  else if (key == "steps") c.steps = static_cast<std::uint32_t>(to_u64(v));
  else if (key == "iterations") c.iterations = to_u64(v);
  else if (key == "ccr") c.ccr = to_f64(v);
  else if (key == "repeats") c.repeats = to_u64(v);
  else if (key == "seed") c.seed = to_u64(v);
  else if (key == "channels") c.channels = static_cast<std::uint16_t>(to_u64(v));
  else if (key == "handlers") c.handlers = to_u64(v);
  else if (key == "max_inflight") c.max_inflight = to_u64(v);
  else if (key == "weak_scaling") c.weak_scaling = to_bool(v);
  else if (key == "latency_us") c.latency_us = to_f64(v);
  else if (key == "bandwidth") c.bandwidth = to_f64(v);
  else if (key == "send_overhead_us") c.send_overhead_us = to_f64(v);
  else if (key == "jitter_us") c.jitter_us = to_f64(v);
  else if (key == "iterations_per_us") c.iterations_per_us = to_f64(v);
  else if (key == "schedule_unit_us") c.schedule_unit_us = to_f64(v);
  else if (key == "sweep_axis") c.sweep_axis = v;
  else if (key == "sweep_values") {
    c.sweep_values.clear();
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) c.sweep_values.push_back(to_f64(item));
    }
  } else if (key == "output") c.output = v;
  else throw std::invalid_argument("unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(c, key, value);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": " + key + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream ss(text);
  return parse_config(ss);
}

void write_config(std::ostream& os, const ExperimentConfig& c) {
  os << "# taskmesh experiment\n";
  os << "transport = " << to_string(c.transport) << '\n';
  os << "nodes = " << c.nodes << '\n';
  os << "pattern = " << to_string(c.pattern) << '\n';
  os << "width = " << c.width << '\n';
  os << "steps = " << c.steps << '\n';
  os << "iterations = " << c.iterations << '\n';
  os << "ccr = " << fmt(c.ccr) << '\n';
  os << "repeats = " << c.repeats << '\n';
  os << "seed = " << c.seed << '\n';
  os << "channels = " << c.channels << '\n';
  os << "handlers = " << c.handlers << '\n';
  os << "max_inflight = " << c.max_inflight << '\n';
  os << "weak_scaling = " << (c.weak_scaling ? "true" : "false") << '\n';
  os << "latency_us = " << fmt(c.latency_us) << '\n';
  os << "bandwidth = " << fmt(c.bandwidth) << '\n';
  os << "send_overhead_us = " << fmt(c.send_overhead_us) << '\n';
  os << "jitter_us = " << fmt(c.jitter_us) << '\n';
  os << "iterations_per_us = " << fmt(c.iterations_per_us) << '\n';
  os << "schedule_unit_us = " << fmt(c.schedule_unit_us) << '\n';
  if (!c.sweep_axis.empty()) os << "sweep_axis = " << c.sweep_axis << '\n';
  if (!c.sweep_values.empty()) {
    os << "sweep_values = ";
    for (std::size_t i = 0; i < c.sweep_values.size(); ++i) os << (i ? "," : "") << fmt(c.sweep_values[i]);
    os << '\n';
  }
  if (!c.output.empty()) os << "output = " << c.output << '\n';
}

void validate_config(const ExperimentConfig& c) {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (c.repeats < 1) bad("repeats must be >= 1");
  if (c.nodes < 1 || c.nodes > 1024) bad("nodes must be in 1..1024");
  if (c.channels < 1) bad("channels must be >= 1");
  if (!(c.ccr > 0)) bad("ccr must be > 0");
  if (c.latency_us < 0) bad("latency_us must be >= 0");
  if (!(c.bandwidth > 0)) bad("bandwidth must be > 0");
  if (c.send_overhead_us < 0 || c.jitter_us < 0) bad("send_overhead_us and jitter_us must be >= 0");
  if (c.iterations_per_us < 0) bad("iterations_per_us must be >= 0");
  if (c.schedule_unit_us < 0) bad("schedule_unit_us must be >= 0");
  if (!c.sweep_axis.empty() && c.sweep_axis != "nodes" && c.sweep_axis != "ccr" && c.sweep_axis != "iterations") {
    bad("sweep_axis must be nodes, ccr or iterations");
  }
  try {
    validate_spec(bench_spec(c, 200.0));
  } catch (const Error& e) {
    bad(e.what());
  }
}

BenchSpec bench_spec(const ExperimentConfig& c, double rate) {
  BenchSpec s = c.weak_scaling ? weak_scaling_spec(c.pattern, c.nodes, c.iterations, c.ccr) : BenchSpec{};
  if (!c.weak_scaling) {
    s.pattern = c.pattern;
    s.width = c.width;
    s.steps = c.steps;
    s.iterations_per_task = c.iterations;
    s.ccr = c.ccr;
    s.nodes = c.nodes;
  }
  s.iterations_per_us = rate;
  CostModel cost(c.nodes, c.latency_us, c.bandwidth);
  s.buffer_bytes = size_buffers(s, cost, static_cast<double>(c.iterations) / rate);
  return s;
}

RunConfig run_config(const ExperimentConfig& c, double rate) {
  RunConfig r;
  r.transport = c.transport;
  r.workers = c.nodes;
  r.net.latency = c.latency_us;
  r.net.bandwidth = c.bandwidth;
  r.net.seed = c.seed;
  r.net.send_overhead = c.send_overhead_us;
  r.net.jitter = c.jitter_us;
  r.channels = c.channels;
  r.handlers = c.handlers;
  r.max_inflight = c.max_inflight;
  r.sim_iterations_per_us = rate;
  r.schedule_unit_us = c.schedule_unit_us;
  return r;
}

Stats summarize(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"wall_us",       "startup_us",        "scheduling_us",
                                             "shutdown_us",   "busy_max_us",       "overhead_fraction",
                                             "bytes_moved",   "events",            "eft_work"};
  return cols;
}

std::vector<double> metric_values(const RunReport& r) {
  return {r.wall_us,           r.startup_us,         r.scheduling_us,
          r.shutdown_us,       r.busy_max(),         r.overhead_fraction(),
          static_cast<double>(r.bytes_moved), static_cast<double>(r.events), static_cast<double>(r.eft_work)};
}

RunsCsv::RunsCsv(std::ostream& os, bool with_axis) : os_(os), with_axis_(with_axis) {
  os_ << "# taskmesh-runs v1\n";
  if (with_axis_) os_ << "axis,axis_value,";
  os_ << "kind,index,transport,pattern,nodes,width,steps,iterations,ccr";
  for (const auto& c : metric_columns()) os_ << ',' << c;
  for (const auto& c : metric_columns()) os_ << ',' << c << "_sd";
  os_ << '\n';
}

void RunsCsv::prefix(const ExperimentConfig& c, const std::string& kind, const std::string& index,
                     const std::string& axis, double axis_value) {
  if (with_axis_) os_ << axis << ',' << fmt(axis_value) << ',';
  BenchSpec s = bench_spec(c, 200.0);
  os_ << kind << ',' << index << ',' << to_string(c.transport) << ',' << to_string(c.pattern) << ',' << c.nodes
      << ',' << s.width << ',' << s.steps << ',' << c.iterations << ',' << fmt(c.ccr);
}

void RunsCsv::row(const ExperimentConfig& c, std::size_t index, const RunReport& r, const std::string& axis,
                  double axis_value) {
  prefix(c, "run", std::to_string(index), axis, axis_value);
  for (double v : metric_values(r)) os_ << ',' << fmt3(v);
  for (std::size_t i = 0; i < metric_columns().size(); ++i) os_ << ',';
  os_ << '\n';
}

void RunsCsv::summary(const ExperimentConfig& c, const std::vector<RunReport>& runs, const std::string& axis,
                      double axis_value) {
  prefix(c, "summary", std::to_string(runs.size()), axis, axis_value);
  const std::size_t m = metric_columns().size();
  std::vector<std::vector<double>> cols(m);
  for (const auto& r : runs) {
    auto v = metric_values(r);
    for (std::size_t i = 0; i < m; ++i) cols[i].push_back(v[i]);
  }
  std::vector<Stats> st;
  for (const auto& col : cols) st.push_back(summarize(col));
  for (const auto& s : st) os_ << ',' << fmt3(s.mean);
  for (const auto& s : st) os_ << ',' << fmt3(s.sd);
  os_ << '\n';
}

}  // namespace taskmesh
