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

// taskmesh: experiment runner and debugging tools.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "taskmesh/bench.hpp"
#include "taskmesh/events.hpp"
#include "taskmesh/experiment.hpp"
#include "taskmesh/kernel.hpp"
#include "taskmesh/runtime.hpp"
#include "taskmesh/tcp_transport.hpp"
#include "taskmesh/trace.hpp"

namespace tmesh = taskmesh;

namespace {

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string trace_dir;
  std::string capture;
  std::string graph_out;
  std::string schedule_out;
  std::string report;
  bool external = false;
  std::string axis;
  std::string values;
};

tmesh::ExperimentConfig load_config(const RunArgs& a) {
  tmesh::ExperimentConfig cfg;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw tmesh::Error(tmesh::ErrorCode::ConfigError, "cannot open " + a.config);
    try {
      cfg = tmesh::parse_config(in);
    } catch (const tmesh::Error& e) {
      throw tmesh::Error(tmesh::ErrorCode::ConfigError, a.config + ": " + e.what());
    }
  }
  for (const auto& s : a.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw tmesh::Error(tmesh::ErrorCode::ConfigError, "--set expects key=value: " + s);
    try {
      tmesh::set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    } catch (const std::exception& e) {
      throw tmesh::Error(tmesh::ErrorCode::ConfigError, "--set " + s + ": " + e.what());
    }
  }
  tmesh::validate_config(cfg);
  return cfg;
}

double kernel_rate(const tmesh::ExperimentConfig& cfg) {
  if (cfg.iterations_per_us > 0) return cfg.iterations_per_us;
  if (cfg.transport == tmesh::TransportKind::Sim) return 200.0;
  return tmesh::calibrate_iterations_per_us();
}

/// Output stream that is only created once everything validated.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw tmesh::Error(tmesh::ErrorCode::ConfigError, "cannot write " + path);
    }
  }
  std::ostream& get() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

tmesh::RunReport run_once(const tmesh::ExperimentConfig& cfg, double rate, const RunArgs& a, std::size_t index) {
  tmesh::Program program = tmesh::generate(tmesh::bench_spec(cfg, rate));
  tmesh::TaskGraph graph = tmesh::derive_edges(program);
  if (!a.graph_out.empty() && index == 0) {
    std::ofstream g(a.graph_out);
    tmesh::write_graph_text(g, graph);
  }
  tmesh::RunConfig rc = tmesh::run_config(cfg, rate);
  rc.external_workers = a.external;
  tmesh::TraceLog trace;
  std::ofstream capture;
  if (!a.trace_dir.empty()) rc.trace = &trace;
  if (!a.capture.empty() && index == 0) {
    capture.open(a.capture, std::ios::binary);
    rc.capture = &capture;
  }
  tmesh::RunReport r = tmesh::run_graph(graph, rc);
  if (!a.trace_dir.empty()) {
    std::filesystem::create_directories(a.trace_dir);
    std::string base = a.trace_dir + "/run" + std::to_string(index);
    std::ofstream ev(base + ".events.csv"), da(base + ".data.csv"), ta(base + ".tasks.csv"), gr(base + ".graph.txt");
    tmesh::write_events_csv(ev, trace.events());
    tmesh::write_data_csv(da, trace.data());
    tmesh::write_tasks_csv(ta, trace.tasks());
    tmesh::write_graph_text(gr, graph);
  }
  if (!a.schedule_out.empty() && index == 0) {
    tmesh::CostModel cost(rc.workers, rc.net.latency, rc.net.bandwidth);
    std::ofstream s(a.schedule_out);
    tmesh::write_schedule_csv(s, tmesh::heft_schedule(graph, cost));
  }
  if (!a.report.empty() && index == 0) {
    std::ofstream rep(a.report);
    tmesh::write_report(rep, r);
  }
  return r;
}

int cmd_run(const RunArgs& a) {
  tmesh::ExperimentConfig cfg = load_config(a);
  const double rate = kernel_rate(cfg);
  Output out(a.out.empty() ? cfg.output : a.out);
  tmesh::RunsCsv csv(out.get(), false);
  std::vector<tmesh::RunReport> runs;
  int status = 0;
  for (std::size_t i = 0; i < cfg.repeats; ++i) {
    tmesh::ExperimentConfig c = cfg;
    c.seed = cfg.seed + i * (cfg.transport == tmesh::TransportKind::Sim && cfg.jitter_us > 0 ? 1 : 0);
    tmesh::RunReport r = run_once(c, rate, a, i);
    if (!r.ok) {
      std::cerr << "taskmesh: run " << i << " failed: " << r.error << '\n';
      status = 1;
    }
    csv.row(cfg, i, r);
    runs.push_back(std::move(r));
  }
  csv.summary(cfg, runs);
  return status;
}

int cmd_sweep(const RunArgs& a) {
  tmesh::ExperimentConfig cfg = load_config(a);
  std::string axis = a.axis.empty() ? cfg.sweep_axis : a.axis;
  std::vector<double> values = cfg.sweep_values;
  if (!a.values.empty()) tmesh::set_config_value(cfg, "sweep_values", a.values), values = cfg.sweep_values;
  if (axis != "nodes" && axis != "ccr" && axis != "iterations") {
    throw tmesh::Error(tmesh::ErrorCode::ConfigError, "sweep axis must be nodes, ccr or iterations");
  }
  if (values.empty()) throw tmesh::Error(tmesh::ErrorCode::ConfigError, "sweep needs values");
  std::vector<tmesh::ExperimentConfig> points;
  for (double v : values) {
    tmesh::ExperimentConfig c = cfg;
    if (axis == "nodes") {
      c.nodes = static_cast<std::size_t>(v);
      c.weak_scaling = true;
    } else if (axis == "ccr") {
      c.ccr = v;
    } else {
      c.iterations = static_cast<std::uint64_t>(v);
    }
    tmesh::validate_config(c);
    points.push_back(c);
  }
  const double rate = kernel_rate(cfg);
  Output out(a.out.empty() ? cfg.output : a.out);
  tmesh::RunsCsv csv(out.get(), true);
  int status = 0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::vector<tmesh::RunReport> runs;
    for (std::size_t i = 0; i < points[p].repeats; ++i) {
      RunArgs per = a;
      per.graph_out.clear();
      per.capture.clear();
      per.report.clear();
      per.schedule_out.clear();
      per.trace_dir.clear();
      tmesh::RunReport r = run_once(points[p], rate, per, i);
      if (!r.ok) {
        std::cerr << "taskmesh: " << axis << "=" << values[p] << " run " << i << " failed: " << r.error << '\n';
        status = 1;
      }
      csv.row(points[p], i, r, axis, values[p]);
      runs.push_back(std::move(r));
    }
    csv.summary(points[p], runs, axis, values[p]);
    out.get().flush();
  }
  return status;
}

int cmd_check(const std::string& graph, const std::string& events, const std::string& data,
              const std::string& tasks) {
  std::vector<tmesh::CheckResult> results;
  auto open = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tmesh::Error(tmesh::ErrorCode::TraceError, "cannot open " + path);
    return in;
  };
  if (!tasks.empty()) {
    std::vector<tmesh::Edge> edges;
    if (!graph.empty()) {
      auto in = open(graph);
      edges = tmesh::read_graph_text(in).edges;
    }
    auto in = open(tasks);
    results.push_back(tmesh::check_dag_order(edges, tmesh::read_tasks_csv(in)));
  }
  if (!data.empty()) {
    auto in = open(data);
    auto rows = tmesh::read_data_csv(in);
    results.push_back(tmesh::check_freshness(rows));
    results.push_back(tmesh::check_no_head_relay(rows));
    results.push_back(tmesh::check_single_writer(rows));
  }
  if (!events.empty()) {
    auto in = open(events);
    auto rows = tmesh::read_events_csv(in);
    results.push_back(tmesh::check_conservation(rows));
    results.push_back(tmesh::check_tag_isolation(rows));
  }
  if (results.empty()) throw tmesh::Error(tmesh::ErrorCode::TraceError, "nothing to check");
  int status = 0;
  for (const auto& r : results) {
    std::cout << (r.ok() ? "PASS " : "FAIL ") << r.name;
    if (!r.ok()) {
      std::cout << " (" << r.problems.size() << " problems)";
      status = 1;
    }
    std::cout << '\n';
    for (std::size_t i = 0; i < r.problems.size() && i < 10; ++i) std::cout << "  " << r.problems[i] << '\n';
  }
  return status;
}

int cmd_tmf_dump(const std::string& path, std::size_t hex_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tmesh::Error(tmesh::ErrorCode::FrameError, "cannot open " + path);
  std::size_t i = 0;
  while (auto f = tmesh::read_frame(in)) {
    std::uint8_t base = f->etype & ~tmesh::kCompletionFlag;
    std::string type = base >= 1 && base <= 8 ? tmesh::to_string(static_cast<tmesh::EventType>(base)) : "?";
    std::string kind = tmesh::is_notification(*f) ? "notify" : (f->etype & tmesh::kCompletionFlag) ? "complete" : "data";
    std::cout << '#' << i++ << ' ' << kind << " origin=" << f->origin << " tag=" << f->tag << " channel=" << f->channel
              << " etype=" << type << " len=" << f->payload.size();
    if (kind == "notify" && f->payload.size() >= 11) {
      tmesh::ByteReader r(f->payload);
      std::uint64_t tag = r.u64();
      std::uint16_t ch = r.u16();
      std::cout << " event_tag=" << tag << " event_channel=" << ch << " role=" << int(r.u8());
    }
    if (hex_bytes > 0) {
      std::cout << " payload=";
      char buf[4];
      for (std::size_t k = 0; k < f->payload.size() && k < hex_bytes; ++k) {
        std::snprintf(buf, sizeof buf, "%02x", std::to_integer<unsigned>(f->payload[k]));
        std::cout << buf;
      }
    }
    std::cout << '\n';
  }
  return 0;
}

int cmd_calibrate(double target_ms, int repeats) {
  double rate = tmesh::calibrate_iterations_per_us();
  std::cout << "iterations_per_us = " << rate << '\n';
  const auto iters = static_cast<std::uint64_t>(rate * target_ms * 1000.0);
  std::cout << "iterations_for_" << target_ms << "ms = " << iters << '\n';
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    tmesh::busy_loop(iters);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "check " << r << " = " << ms << " ms (" << (ms / target_ms - 1.0) * 100.0 << "%)\n";
  }
  return 0;
}

int cmd_worker(int rank, std::size_t handlers) {
  if (rank > 0) setenv("TASKMESH_RANK", std::to_string(rank).c_str(), 1);
  tmesh::EventOptions eo;
  eo.handlers = handlers;
  return tmesh::run_worker_from_env([&](tmesh::TcpEndpoint& ep) { return tmesh::worker_main(ep, eo); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taskmesh: distributed task-offloading runtime and benchmark harness"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", run_args.config, "experiment config (key = value)");
    sub->add_option("-s,--set", run_args.sets, "override a config key, key=value");
    sub->add_option("-o,--out", run_args.out, "CSV output path (default stdout)");
    sub->add_flag("--external-workers", run_args.external, "tcp: wait for `taskmesh worker` processes");
  };
  auto* run = app.add_subcommand("run", "run an experiment `repeats` times");
  add_common(run);
  run->add_option("--trace-dir", run_args.trace_dir, "write events/data/tasks CSV per run");
  run->add_option("--capture", run_args.capture, "write every frame of the first run");
  run->add_option("--graph-out", run_args.graph_out, "write the task graph text");
  run->add_option("--schedule-out", run_args.schedule_out, "write the HEFT schedule CSV");
  run->add_option("--report", run_args.report, "write the first run's report (key = value)");

  auto* sweep = app.add_subcommand("sweep", "run the cross product along one axis");
  add_common(sweep);
  sweep->add_option("--axis", run_args.axis, "nodes, ccr or iterations");
  sweep->add_option("--values", run_args.values, "comma separated values");

  std::string graph, events, data, tasks;
  auto* check = app.add_subcommand("check", "validate trace files");
  check->add_option("--graph", graph, "graph text from --graph-out or --trace-dir");
  check->add_option("--events", events, "events CSV");
  check->add_option("--data", data, "data CSV");
  check->add_option("--tasks", tasks, "tasks CSV");

  std::string capture;
  std::size_t hex = 0;
  auto* dump = app.add_subcommand("tmf-dump", "print a frame capture");
  dump->add_option("file", capture, "capture file")->required();
  dump->add_option("--hex", hex, "payload bytes to print");

  double target_ms = 50;
  int repeats = 3;
  auto* cal = app.add_subcommand("calibrate", "measure busy-loop speed");
  cal->add_option("--target-ms", target_ms, "task length to size");
  cal->add_option("--repeats", repeats, "verification runs");

  int rank = 0;
  std::size_t handlers = 0;
  auto* worker = app.add_subcommand("worker", "serve as a tcp worker (TASKMESH_RANK, TASKMESH_HEAD_ADDR)");
  worker->add_option("--rank", rank, "worker rank, overrides TASKMESH_RANK");
  worker->add_option("--handlers", handlers, "handler pool size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(run_args);
    if (*check) return cmd_check(graph, events, data, tasks);
    if (*dump) return cmd_tmf_dump(capture, hex);
    if (*cal) return cmd_calibrate(target_ms, repeats);
    if (*worker) return cmd_worker(rank, handlers);
  } catch (const std::exception& e) {
    std::cerr << "taskmesh: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
