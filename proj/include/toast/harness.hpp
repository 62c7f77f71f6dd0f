// Copyright 2026 The TOAST Authors
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

// Two-rate experiment loop, multi-mode comparison and the end-to-end
// pipeline.
//
// Every n_fast fast steps the planner runs from the measured state and, in
// toast mode, a gain schedule is synthesized along its nominal trajectory.
// Each fast step applies the held feedforward action, plus the TVLQR
// correction in toast mode. Disturbances act on the true simulator only.

#ifndef TOAST_HARNESS_HPP_
#define TOAST_HARNESS_HPP_

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "toast/config.hpp"
#include "toast/environments.hpp"
#include "toast/nn_dynamics.hpp"

namespace toast {

using LogFn = std::function<void(const std::string&)>;

struct MetricsReport {
  std::uint64_t seed = 0;
  std::string mode;
  int fast_steps = 0;
  int plan_calls = 0;
  double rms_tracking_error = 0.0;  // RMS |x - nominal| over fast steps
  double task_cost = 0.0;           // mean running cost per fast step
  double chattering = 0.0;          // mean |u_{k+1} - u_k| of applied actions
  double recovery_time = 0.0;       // s after the first disturbance onset
  double max_task_error = 0.0;
  double final_task_error = 0.0;
  double mean_feedback = 0.0;       // mean |feedback| per fast step
  double planner_ms = 0.0;          // wall time per plan; not written to CSVs
  bool failed = false;
  std::string failure;
};

struct EpisodeResult {
  EpisodeLog log;
  MetricsReport metrics;
};

// Planner seed for an episode, derived from the config seed and the episode
// seed.
std::uint64_t episode_planner_seed(std::uint64_t config_seed, std::uint64_t episode_seed);

EpisodeResult run_episode(const ExperimentConfig& config, const DynamicsModel& model,
                          std::uint64_t seed);

// Metrics of a (possibly partial) log.
MetricsReport compute_metrics(const ExperimentConfig& config, const EpisodeLog& log);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one sample
  int count = 0;
};

struct ComparisonReport {
  std::vector<std::string> modes;       // one per config, in order
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<MetricsReport>> runs;  // [config][seed]

  static const std::vector<std::string>& metric_names();
  static double metric(const MetricsReport& m, const std::string& name);

  // Aggregate over the successful runs of config i.
  MetricSummary summarize(int config, const std::string& metric) const;
  // Seeds where config a is strictly lower than config b on `metric`.
  int wins(int a, int b, const std::string& metric) const;
  int failures(int config) const;

  std::string metrics_csv() const;
  std::string summary_text() const;
};

// Runs the cross product configs x seeds. Configs must differ only in
// controller.mode. When out_dir is non-empty, per-episode logs go to
// out_dir/<mode>/episode_<seed>.csv and the report to metrics.csv and
// summary.txt.
ComparisonReport compare(const std::vector<ExperimentConfig>& configs,
                         const std::vector<std::uint64_t>& seeds, const DynamicsModel& model,
                         const std::string& out_dir, const LogFn& log = nullptr);

// Raised by the pipeline with the name of the stage that failed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineResult {
  std::vector<std::string> stages;    // planned or executed stage names
  std::vector<std::string> manifest;  // files written
  ComparisonReport report;
  double validation_rmse = 0.0;
};

// Creates `dir` if needed and checks it is writable.
void ensure_output_dir(const std::string& dir);

// Writes effective_config.json and effective_config.hash.
void write_effective_config(const ExperimentConfig& config, const std::string& dir);

// collect -> train -> save model -> compare (or load model -> compare).
// With dry_run the config is validated and the stage plan returned.
PipelineResult pipeline(const ExperimentConfig& config, bool dry_run, const LogFn& log = nullptr);

// Builds or loads the model for a config (collect + train when training).
DynamicsModel obtain_model(const ExperimentConfig& config, double* validation_rmse = nullptr,
                           const LogFn& log = nullptr);

}  // namespace toast

#endif  // TOAST_HARNESS_HPP_
