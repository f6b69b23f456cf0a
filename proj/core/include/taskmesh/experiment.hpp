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
#include <string>
#include <vector>

#include "taskmesh/bench.hpp"
#include "taskmesh/runtime.hpp"

namespace taskmesh {

/// Experiment parameters. Text form: one `key = value` per line, `#` starts a comment.
struct ExperimentConfig {
  TransportKind transport = TransportKind::Sim;
  std::size_t nodes = 2;
  Pattern pattern = Pattern::Trivial;
  std::uint32_t width = 4;
  std::uint32_t steps = 4;
  std::uint64_t iterations = 1000000;
  double ccr = 1.0;
  std::size_t repeats = 1;
  std::uint64_t seed = 1;
  std::uint16_t channels = 8;
  std::size_t handlers = 0;
  std::size_t max_inflight = 0;
  /// Width = 2 * nodes and steps = 32.
  bool weak_scaling = false;
  Micros latency_us = 2.0;
  double bandwidth = 1.0;
  Micros send_overhead_us = 1.0;
  Micros jitter_us = 0.0;
  /// Kernel speed; 0 calibrates on tcp and uses 200 on sim.
  double iterations_per_us = 0;
  Micros schedule_unit_us = 0.01;
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::string output;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError with the offending line number.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_string(const std::string& text);
void write_config(std::ostream& os, const ExperimentConfig& cfg);

/// Applies one `key = value` assignment (also used for command-line overrides).
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Checks every field before any run starts. Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

/// Bench spec and run config derived from the experiment. `rate` is iterations per microsecond.
BenchSpec bench_spec(const ExperimentConfig& cfg, double rate);
RunConfig run_config(const ExperimentConfig& cfg, double rate);

struct Stats {
  double mean = 0;
  double sd = 0;  ///< sample standard deviation, 0 for a single value
};

Stats summarize(const std::vector<double>& values);

/// Metric columns of the runs CSV, in order.
const std::vector<std::string>& metric_columns();
std::vector<double> metric_values(const RunReport& r);

/// CSV of runs. Header comment `# taskmesh-runs v1`, then
///   [axis,axis_value,]kind,index,transport,pattern,nodes,width,steps,iterations,ccr,<metrics>,<metric>_sd...
/// kind is `run` (sd columns empty) or `summary` (means and sample deviations).
class RunsCsv {
 public:
  RunsCsv(std::ostream& os, bool with_axis);

  void row(const ExperimentConfig& cfg, std::size_t index, const RunReport& r, const std::string& axis = "",
           double axis_value = 0);
  void summary(const ExperimentConfig& cfg, const std::vector<RunReport>& runs, const std::string& axis = "",
               double axis_value = 0);

 private:
  void prefix(const ExperimentConfig& cfg, const std::string& kind, const std::string& index,
              const std::string& axis, double axis_value);

  std::ostream& os_;
  bool with_axis_;
};

}  // namespace taskmesh
