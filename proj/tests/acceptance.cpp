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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "taskmesh/bench.hpp"
#include "taskmesh/events.hpp"
#include "taskmesh/experiment.hpp"
#include "taskmesh/kernel.hpp"
#include "taskmesh/runtime.hpp"
#include "taskmesh/tcp_transport.hpp"
#include "taskmesh/trace.hpp"

using namespace taskmesh;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. HEFT against the reference.

Verdict scheduler_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2026);
  tmtest::RandomProgramOptions opt;
  opt.max_tasks = 10;
  int trials = 0, agree = 0;
  for (; trials < 250; ++trials) {
    TaskGraph g = derive_edges(tmtest::random_program(rng, opt));
    const std::size_t p = 1 + rng() % 3;
    CostModel cost(p, static_cast<Micros>(rng() % 20), 0.25 + static_cast<double>(rng() % 8) / 2);
    if (rng() % 3 == 0) {
      for (NodeId n = 1; n <= p; ++n) cost.set_speed(n, 0.5 + static_cast<double>(rng() % 4) / 2);
    }
    Schedule s = heft_schedule(g, cost);
    auto ref = tmtest::reference_heft(g, cost);
    bool same = true;
    for (std::size_t i = 0; i < g.task_count(); ++i) {
      same &= s.assignment[i] == ref.node[i];
      same &= std::abs(s.est[i] - ref.start[i]) <= 1e-6 * std::max(1.0, ref.start[i]);
      same &= std::abs(s.eft[i] - ref.finish[i]) <= 1e-6 * std::max(1.0, ref.finish[i]);
    }
    agree += same;
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = agree == trials && secs < 10;
  v.detail = std::to_string(agree) + "/" + std::to_string(trials) + " agree in " + fmt("%.2f s", secs);
  return v;
}

// ---------------------------------------------------------------------------
// 2. check_schedule on random graphs.

Verdict schedule_validity() {
  std::mt19937_64 rng(77);
  tmtest::RandomProgramOptions opt;
  opt.max_tasks = 16;
  opt.max_buffers = 5;
  int valid = 0;
  std::string first;
  for (int i = 0; i < 1000; ++i) {
    TaskGraph g = derive_edges(tmtest::random_program(rng, opt));
    CostModel cost(1 + rng() % 6, static_cast<Micros>(rng() % 50), 0.1 + static_cast<double>(rng() % 10));
    auto problems = check_schedule(g, cost, heft_schedule(g, cost));
    if (problems.empty()) {
      ++valid;
    } else if (first.empty()) {
      first = problems.front();
    }
  }
  Verdict v;
  v.pass = valid == 1000;
  v.detail = std::to_string(valid) + "/1000 valid" + (first.empty() ? "" : "; first problem: " + first);
  return v;
}

// ---------------------------------------------------------------------------
// 3. Coherence in the simulator.

Verdict coherence() {
  std::mt19937_64 rng(4242);
  int equal = 0, single = 0, relay_free = 0, ran = 0;
  std::string first;
  for (int trial = 0; trial < 500; ++trial) {
    Program p = tmtest::coherence_program(rng, 12, 4);
    TaskGraph g = derive_edges(p);
    TraceLog trace;
    RunConfig cfg;
    cfg.workers = 1 + rng() % 3;  // up to four nodes with the head
    cfg.net.latency = static_cast<Micros>(rng() % 10);
    cfg.net.bandwidth = 0.5 + static_cast<double>(rng() % 4);
    cfg.net.send_overhead = static_cast<Micros>(rng() % 3);
    cfg.net.jitter = static_cast<Micros>(rng() % 5);
    cfg.net.seed = rng();
    cfg.trace = &trace;
    RunReport r = run_graph(g, cfg);
    if (!r.ok) {
      if (first.empty()) first = "trial " + std::to_string(trial) + ": " + r.error;
      continue;
    }
    ++ran;
    auto want = serial_reference(g);
    bool same = true;
    for (const Task& t : g.tasks()) {
      if (t.kind != TaskKind::TargetDataExit) continue;
      const BufferId b = t.deps[0].buffer;
      auto it = r.buffers.find(b);
      same &= it != r.buffers.end() && it->second == want.at(b);
    }
    equal += same;
    single += check_single_writer(trace.data()).ok();
    relay_free += check_no_head_relay(trace.data()).ok();
    if (!same && first.empty()) first = "trial " + std::to_string(trial) + ": buffers differ";
  }
  Verdict v;
  v.pass = ran == 500 && equal == 500 && single == 500 && relay_free == 500;
  v.detail = "serial-equal " + std::to_string(equal) + "/500, single-writer " + std::to_string(single) +
             "/500, no head relay " + std::to_string(relay_free) + "/500" + (first.empty() ? "" : "; " + first);
  return v;
}

// ---------------------------------------------------------------------------
// 4. Event fuzz over TCP.

Bytes text_bytes(const std::string& s) {
  Bytes b(s.size());
  std::memcpy(b.data(), s.data(), s.size());
  return b;
}

std::string bytes_text(const Bytes& b) { return std::string(reinterpret_cast<const char*>(b.data()), b.size()); }

Verdict event_fuzz() {
  const auto t0 = Clock::now();
  constexpr std::size_t kWorkers = 3;
  EventOptions opts;
  opts.channels = 4;
  opts.handlers = 2;
  opts.max_chunk = 256 * 1024;
  opts.timeout = std::chrono::seconds(50);

  LocalCluster cluster(kWorkers, [opts](TcpEndpoint& ep) {
    TraceLog local;
    EventSystem es(ep, opts, &local);
    es.set_exit_hook([&] {
      std::ostringstream os;
      write_events_csv(os, local.events());
      return text_bytes(os.str());
    });
    es.start();
    es.join();
    return 0;
  });

  TraceLog trace;
  std::mt19937_64 rng(404);
  // Payload sizes log-uniform over 1 B .. 4 MiB, both ends included.
  auto payload_size = [&](std::size_t i) -> std::size_t {
    if (i == 0) return 1;
    if (i == 1) return 4u << 20;
    std::uniform_real_distribution<double> u(0, std::log(4.0 * 1024 * 1024));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::exp(u(rng))));
  };

  struct Chain {
    BufferId buffer;
    Bytes sent;
    std::uint64_t sum = 0;
    std::vector<NodeId> hops;  // holders in order; retrieve from the last
    std::size_t step = 0;
    OriginEventPtr ev;
  };
  std::vector<Chain> chains;
  std::size_t planned = 0;
  for (std::uint32_t k = 0; k < 400; ++k) {
    Chain c;
    c.buffer = BufferId{k};
    c.sent.resize(payload_size(k));
    for (auto& b : c.sent) b = static_cast<std::byte>(rng());
    c.sum = checksum(c.sent);
    c.hops.push_back(static_cast<NodeId>(1 + rng() % kWorkers));
    if (k % 2 == 1) {
      NodeId next = static_cast<NodeId>(1 + rng() % kWorkers);
      if (next == c.hops.back()) next = static_cast<NodeId>(1 + next % kWorkers);
      c.hops.push_back(next);
    }
    planned += c.hops.size() + 1;
    chains.push_back(std::move(c));
  }

  std::size_t issued = 0, failed = 0, bad_sum = 0, chains_done = 0;
  std::string first_error;
  {
    EventSystem head(cluster.head(), opts, &trace);
    auto issue = [&](Chain& c) {
      if (c.step == 0) {
        c.ev = head.create_origin(EventType::SubmitData, c.hops[0], buffer_args(c.buffer, c.sent.size()), c.sent);
      } else if (c.step < c.hops.size()) {
        c.ev = head.create_exchange(c.buffer, c.hops[c.step - 1], c.hops[c.step]);
      } else {
        c.ev = head.create_origin(EventType::RetrieveData, c.hops.back(), buffer_args(c.buffer, c.sent.size()));
      }
      head.notify(c.ev);
      ++issued;
    };
    for (auto& c : chains) issue(c);
    while (chains_done < chains.size()) {
      const auto gen = cluster.head().activity();
      bool moved = false;
      for (auto& c : chains) {
        if (!c.ev || !head.progress(c.ev)) continue;
        moved = true;
        if (c.ev->state() == EventState::Failed) {
          ++failed;
          if (first_error.empty()) first_error = c.ev->error();
          c.ev.reset();
          ++chains_done;
          continue;
        }
        const bool was_retrieve = c.step == c.hops.size();
        if (was_retrieve) {
          if (checksum(c.ev->result()) != c.sum || c.ev->result() != c.sent) ++bad_sum;
          c.ev.reset();
          ++chains_done;
          continue;
        }
        ++c.step;
        issue(c);
      }
      if (!moved) cluster.head().wait_activity(gen, std::chrono::milliseconds(5));
      if (seconds_since(t0) > 120) {
        first_error = "stuck";
        break;
      }
    }
    for (NodeId w = 1; w <= kWorkers; ++w) {
      auto ex = head.create_origin(EventType::Exit, w);
      head.notify(ex);
      try {
        std::istringstream rows(bytes_text(head.wait(ex)));
        trace.add_events(read_events_csv(rows));
      } catch (const std::exception& e) {
        ++failed;
        if (first_error.empty()) first_error = e.what();
      }
    }
    cluster.head().shutdown();
    if (cluster.wait() != 0 && first_error.empty()) first_error = "worker exit status";
    // Aggregate counts: head notifications = worker halves = completions back at the head.
    std::size_t halves = 0;
    for (const auto& row : trace.events()) halves += row.node != kHeadNode && row.state == "Queued";
    if (head.notifications_sent() != halves || head.completions_received() != halves) {
      if (first_error.empty()) {
        first_error = "notifications " + std::to_string(head.notifications_sent()) + ", halves " +
                      std::to_string(halves) + ", completions " + std::to_string(head.completions_received());
      }
      ++failed;
    }
  }
  const double secs = seconds_since(t0);
  auto rows = trace.events();
  auto cons = check_conservation(rows);
  auto iso = check_tag_isolation(rows);
  Verdict v;
  v.pass = issued == 1000 && planned == 1000 && failed == 0 && bad_sum == 0 && cons.ok() && iso.ok() && secs < 60;
  v.detail = std::to_string(issued) + " events, " + std::to_string(bad_sum) + " checksum mismatches, " +
             std::to_string(failed) + " failures, conservation " + (cons.ok() ? "exact" : cons.problems.front()) +
             ", isolation " + (iso.ok() ? "clean" : iso.problems.front()) + ", " + fmt("%.1f s", secs) +
             (first_error.empty() ? "" : "; " + first_error);
  return v;
}

// ---------------------------------------------------------------------------
// 5. Overhead trend over TCP.

Verdict overhead_trend() {
  const double rate = calibrate_iterations_per_us(50000);
  const std::vector<double> task_ms{0.02, 0.1, 1, 10, 100, 500};
  std::vector<double> frac;
  std::string detail;
  bool ok = true;
  for (double ms : task_ms) {
    BenchSpec spec;
    spec.steps = 16;
    spec.iterations_per_task = static_cast<std::uint64_t>(std::llround(ms * 1000 * rate));
    spec.iterations_per_us = rate;
    TaskGraph g = derive_edges(generate(spec));
    RunConfig cfg;
    cfg.transport = TransportKind::Tcp;
    cfg.workers = 1;
    cfg.handlers = 1;
    cfg.net.latency = 30;
    cfg.net.bandwidth = 1000;
    std::vector<double> runs;
    const int repeats = ms >= 500 ? 1 : 3;
    for (int i = 0; i < repeats; ++i) {
      RunReport r = run_graph(g, cfg);
      if (!r.ok) {
        ok = false;
        detail += "run failed: " + r.error + "; ";
        continue;
      }
      runs.push_back(r.overhead_fraction());
    }
    if (runs.empty()) return {false, detail};
    std::sort(runs.begin(), runs.end());
    frac.push_back(runs[runs.size() / 2]);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%gms:%.3f ", ms, frac.back());
    detail += buf;
  }
  bool monotone = true;
  for (std::size_t i = 1; i < frac.size(); ++i) monotone &= frac[i] <= frac[i - 1];
  double worst_big = 0;
  for (std::size_t i = 0; i < task_ms.size(); ++i) {
    if (task_ms[i] >= 10) worst_big = std::max(worst_big, frac[i]);
  }
  detail += monotone ? "monotone" : "NOT monotone";
  detail += fmt(", >=10ms worst %.1f%%", 100 * worst_big);
  detail += worst_big < 0.25 ? " (< 25%)" : " (>= 25%, CI tolerance 35%)";
  return {ok && monotone && worst_big < 0.35, detail};
}

// ---------------------------------------------------------------------------
// 6. Weak scaling in the simulator.

/// Per-frame sender cost for the simulated links, in line with the TCP runtime on one host.
const double kFrameCostUs = 50;

Verdict weak_scaling(double head_cost_us) {
  const std::vector<std::size_t> ns{2, 4, 8, 16, 32};
  auto series = [&](Pattern pat, std::vector<double>& wall, double& slowest) {
    for (std::size_t n : ns) {
      ExperimentConfig c;
      c.nodes = n;
      c.pattern = pat;
      c.weak_scaling = true;
      c.iterations = 10'000'000;  // 50 ms at 200 iterations/us
      c.iterations_per_us = 200;
      c.ccr = 1.0;
      c.send_overhead_us = head_cost_us;
      const auto t0 = Clock::now();
      RunReport r = run_graph(derive_edges(generate(bench_spec(c, 200))), run_config(c, 200));
      slowest = std::max(slowest, seconds_since(t0));
      wall.push_back(r.ok ? r.wall_us : -1);
    }
  };
  std::vector<double> trivial, stencil;
  double slowest = 0;
  series(Pattern::Trivial, trivial, slowest);
  series(Pattern::Stencil1D, stencil, slowest);
  const auto [lo, hi] = std::minmax_element(trivial.begin(), trivial.end());
  const double spread = (*hi - *lo) / *lo;
  bool grows = stencil.back() > stencil.front();
  for (std::size_t i = 1; i < stencil.size(); ++i) grows &= stencil[i] >= stencil[i - 1];
  std::string detail = "trivial s:";
  for (double w : trivial) detail += fmt(" %.3f", w / 1e6);
  detail += fmt(" (spread %.1f%%); stencil s:", 100 * spread);
  for (double w : stencil) detail += fmt(" %.3f", w / 1e6);
  detail += fmt("; slowest run %.1f s real", slowest);
  return {*lo > 0 && spread <= 0.15 && grows && slowest < 30, detail};
}

// ---------------------------------------------------------------------------
// 7. Scheduling cost against e * p.

/// Compute tasks writing one buffer each and reading exactly `edges` earlier buffers in total.
TaskGraph graph_with_edges(std::mt19937_64& rng, std::uint32_t edges) {
  Program p;
  const std::uint32_t tasks = edges / 2;
  std::vector<BufferId> bufs;
  for (std::uint32_t i = 0; i < tasks; ++i) bufs.push_back(p.add_buffer(512));
  std::vector<std::uint32_t> indeg(tasks, 0);
  for (std::uint32_t e = 0; e < edges; ++e) {
    for (;;) {
      const std::uint32_t v = 1 + static_cast<std::uint32_t>(rng() % (tasks - 1));
      if (indeg[v] < v) {
        ++indeg[v];
        break;
      }
    }
  }
  for (std::uint32_t v = 0; v < tasks; ++v) {
    std::vector<Dependency> deps{{bufs[v], DepDirection::Out}};
    std::vector<std::uint32_t> pool(v);
    for (std::uint32_t u = 0; u < v; ++u) pool[u] = u;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::uint32_t k = 0; k < indeg[v]; ++k) deps.push_back({bufs[pool[k]], DepDirection::In});
    p.add_task(TaskKind::TargetTask, std::move(deps), 100 + static_cast<double>(rng() % 900));
  }
  p.seal();
  return derive_edges(p);
}

Verdict scheduling_cost() {
  std::mt19937_64 rng(7);
  std::vector<double> x, y;
  double worst = 0;
  for (std::uint32_t e : {64u, 128u, 256u, 512u}) {
    for (std::size_t p : {4u, 8u}) {
      TaskGraph g = graph_with_edges(rng, e);
      if (g.edges().size() != e) return {false, "generator produced " + std::to_string(g.edges().size()) + " edges"};
      Schedule s = heft_schedule(g, CostModel(p, 5, 1.0));
      const double ep = static_cast<double>(e) * static_cast<double>(p);
      x.push_back(ep);
      y.push_back(static_cast<double>(schedule_cost(s)));
      worst = std::max(worst, y.back() / ep);
    }
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double cov = sxy - sx * sy / n;
  const double r2 = cov * cov / ((sxx - sx * sx / n) * (syy - sy * sy / n));
  std::string detail = fmt("max count/(e*p) %.3f", worst) + fmt(" <= C=%.1f", kScheduleCostConstant) +
                       fmt(", R^2 %.5f", r2);
  return {worst <= kScheduleCostConstant && r2 >= 0.99, detail};
}

// ---------------------------------------------------------------------------
// 8. Determinism.

Verdict determinism() {
  BenchSpec spec;
  spec.pattern = Pattern::Stencil1D;
  spec.width = 6;
  spec.steps = 6;
  spec.iterations_per_task = 40000;
  spec.buffer_bytes = 300;
  TaskGraph g = derive_edges(generate(spec));
  auto once = [&] {
    TraceLog t;
    RunConfig cfg;
    cfg.workers = 3;
    cfg.net.latency = 4;
    cfg.net.bandwidth = 2;
    cfg.net.send_overhead = 1;
    cfg.net.jitter = 7;
    cfg.net.seed = 1234;
    cfg.trace = &t;
    std::ostringstream frames;
    cfg.capture = &frames;
    RunReport r = run_graph(g, cfg);
    std::ostringstream os;
    write_report(os, r);
    write_events_csv(os, t.events());
    write_data_csv(os, t.data());
    write_tasks_csv(os, t.tasks());
    return std::make_pair(os.str(), frames.str());
  };
  const auto first = once();
  int same = 0;
  for (int i = 0; i < 20; ++i) same += once() == first;
  return {same == 20 && first.first.rfind("ok = true", 0) == 0,
          std::to_string(same) + "/20 byte-identical (" + std::to_string(first.first.size() + first.second.size()) +
              " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments pick criteria by number.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  // Fork-based criteria run first, before any helper threads exist.
  const std::vector<std::pair<int, Criterion>> order{
      {4, {"event isolation over tcp", event_fuzz}},
      {5, {"overhead trend over tcp", overhead_trend}},
      {1, {"heft matches reference", scheduler_oracle}},
      {2, {"schedule validity", schedule_validity}},
      {3, {"coherence", coherence}},
      {6, {"weak scaling", [] { return weak_scaling(kFrameCostUs); }}},
      {7, {"scheduling cost", scheduling_cost}},
      {8, {"determinism", determinism}},
  };
  std::map<int, std::string> lines;
  bool all = true;
  for (const auto& [id, c] : order) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all &= v.pass;
    lines[id] = std::string(v.pass ? "PASS" : "FAIL") + " " + std::to_string(id) + " " + c.name + ": " + v.detail;
    std::fprintf(stderr, "%s\n", lines[id].c_str());
  }
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  return all ? 0 : 1;
}
