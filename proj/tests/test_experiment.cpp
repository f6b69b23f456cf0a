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

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "taskmesh/experiment.hpp"

using namespace taskmesh;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config text round trip") {
  ExperimentConfig c;
  c.transport = TransportKind::Tcp;
  c.nodes = 3;
  c.pattern = Pattern::FFT;
  c.width = 8;
  c.ccr = 0.5;
  c.repeats = 4;
  c.weak_scaling = true;
  c.latency_us = 1.25;
  c.sweep_axis = "ccr";
  c.sweep_values = {0.5, 1, 2};
  c.output = "out.csv";
  std::stringstream ss;
  write_config(ss, c);
  CHECK(parse_config(ss) == c);
  CHECK(parse_config_string("") == ExperimentConfig{});
}

TEST_CASE("comments and spacing") {
  auto c = parse_config_string("# header\n  nodes=5   # trailing\n\npattern = stencil1d\r\n");
  CHECK(c.nodes == 5);
  CHECK(c.pattern == Pattern::Stencil1D);
}

TEST_CASE("parse errors carry the line number") {
  auto line_of = [](const std::string& text) {
    try {
      parse_config_string(text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(line_of("nodes = 2\npattern = ring\n").find("line 2") != std::string::npos);
  CHECK(line_of("# x\n\nnodes = -1\n").find("line 3") != std::string::npos);
  CHECK(line_of("colour = red\n").find("line 1") != std::string::npos);
  CHECK(line_of("nodes 4\n").find("line 1") != std::string::npos);
  CHECK(line_of("ccr = 1.0x\n").find("line 1") != std::string::npos);
}

TEST_CASE("validation rejects bad values") {
  ExperimentConfig c;
  CHECK_NOTHROW(validate_config(c));
  auto rejects = [&](auto mutate) {
    ExperimentConfig bad;
    mutate(bad);
    CHECK_THROWS_AS(validate_config(bad), Error);
  };
  rejects([](ExperimentConfig& x) { x.repeats = 0; });
  rejects([](ExperimentConfig& x) { x.nodes = 0; });
  rejects([](ExperimentConfig& x) { x.ccr = 0; });
  rejects([](ExperimentConfig& x) { x.bandwidth = 0; });
  rejects([](ExperimentConfig& x) { x.channels = 0; });
  rejects([](ExperimentConfig& x) { x.sweep_axis = "width"; });
  rejects([](ExperimentConfig& x) {
    x.pattern = Pattern::Tree;
    x.width = 3;
  });
}

TEST_CASE("weak scaling overrides width and steps") {
  ExperimentConfig c;
  c.weak_scaling = true;
  c.nodes = 5;
  c.width = 1;
  auto s = bench_spec(c, 200);
  CHECK(s.width == 10);
  CHECK(s.steps == 32);
  auto r = run_config(c, 200);
  CHECK(r.workers == 5);
  CHECK(r.sim_iterations_per_us == 200);
}

TEST_CASE("summary statistics") {
  auto s = summarize({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.mean == doctest::Approx(5));
  CHECK(s.sd == doctest::Approx(std::sqrt(32.0 / 7)));
  CHECK(summarize({3}).sd == 0);
  CHECK(summarize({}).mean == 0);
}

TEST_CASE("runs csv layout") {
  ExperimentConfig c;
  c.iterations = 2000;
  c.repeats = 3;
  std::vector<RunReport> runs;
  for (int i = 0; i < 3; ++i) {
    RunReport r;
    r.wall_us = 100 + 10 * i;
    r.busy_us = {0, 50};
    runs.push_back(r);
  }
  std::ostringstream os;
  RunsCsv csv(os, false);
  for (std::size_t i = 0; i < runs.size(); ++i) csv.row(c, i, runs[i]);
  csv.summary(c, runs);
  auto lines = lines_of(os.str());
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "# taskmesh-runs v1");
  auto header = fields_of(lines[1]);
  const std::size_t m = metric_columns().size();
  CHECK(header.size() == 9 + 2 * m);
  CHECK(header[9] == "wall_us");
  for (std::size_t i = 2; i < 6; ++i) CHECK(fields_of(lines[i]).size() == header.size());
  CHECK(lines[2].rfind("run,0,sim,trivial,2,4,4,2000,1,100.000,", 0) == 0);
  auto summary = fields_of(lines[5]);
  CHECK(summary[0] == "summary");
  CHECK(summary[1] == "3");
  // Recompute the summary from the run rows.
  std::vector<double> walls;
  for (std::size_t i = 2; i < 5; ++i) walls.push_back(std::stod(fields_of(lines[i])[9]));
  auto st = summarize(walls);
  CHECK(std::stod(summary[9]) == doctest::Approx(st.mean));
  CHECK(std::stod(summary[9 + m]) == doctest::Approx(st.sd).epsilon(1e-3));

  std::ostringstream swept;
  RunsCsv axis(swept, true);
  axis.row(c, 0, runs[0], "ccr", 0.5);
  CHECK(lines_of(swept.str())[1].rfind("axis,axis_value,kind,", 0) == 0);
  CHECK(lines_of(swept.str())[2].rfind("ccr,0.5,run,0,", 0) == 0);
}

TEST_CASE("repeated simulated runs give identical wall time") {
  ExperimentConfig c;
  c.pattern = Pattern::Stencil1D;
  c.nodes = 3;
  c.width = 6;
  c.steps = 5;
  c.iterations = 20000;
  c.jitter_us = 4;
  c.seed = 9;
  auto spec = bench_spec(c, 200);
  auto cfg = run_config(c, 200);
  auto g = derive_edges(generate(spec));
  std::vector<double> walls;
  for (int i = 0; i < 3; ++i) {
    auto r = run_graph(g, cfg);
    REQUIRE(r.ok);
    walls.push_back(r.wall_us);
  }
  CHECK(walls[0] == walls[1]);
  CHECK(walls[1] == walls[2]);
}

}  // TEST_SUITE
