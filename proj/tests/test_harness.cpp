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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "toast/config.hpp"
#include "toast/harness.hpp"
#include "toast/model_io.hpp"

using namespace toast;
using namespace toast::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentConfig linear_config(const std::string& mode, double duration = 10.0) {
  json doc = {{"env", {{"id", "linear"}}},
              {"controller", {{"mode", mode}}},
              {"planner", {{"samples", 32}, {"horizon", 10}}},
              {"episode", {{"duration", duration}, {"seeds", {0, 1}}}}};
  return parse_config(doc);
}

// Exact discretization of x' = -a x + g u over one planning interval.
DynamicsModel perfect_linear_model(const ExperimentConfig& c) {
  const double a = c.env.param("decay"), g = c.env.param("gain"), T = c.controller.plan_dt();
  const double e = std::exp(-a * T);
  return affine_model(Mat::Constant(1, 1, e - 1.0), Mat::Constant(1, 1, g / a * (1.0 - e)),
                      c.model.spec.history);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("toast_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("a 10 s episode has 1000 fast steps and 200 plan updates") {
  for (const char* mode : {"mppi_only", "zoh_mppi", "toast"}) {
    CAPTURE(mode);
    const ExperimentConfig c = linear_config(mode);
    const EpisodeResult r = run_episode(c, perfect_linear_model(c), 0);
    CHECK_FALSE(r.log.failed);
    CHECK(r.metrics.fast_steps == 1000);
    CHECK(r.metrics.plan_calls == 200);
    int flagged = 0;
    for (size_t k = 0; k < r.log.records.size(); ++k) {
      flagged += r.log.records[k].replanned ? 1 : 0;
      CHECK(r.log.records[k].replanned == (k % 5 == 0));
      CHECK(r.log.records[k].time == doctest::Approx(0.01 * k));
    }
    CHECK(flagged == 200);
  }
}

TEST_CASE("zoh and toast agree until the first nonzero feedback") {
  const ExperimentConfig z = linear_config("zoh_mppi", 2.0);
  const ExperimentConfig t = linear_config("toast", 2.0);
  const DynamicsModel m = perfect_linear_model(z);
  const auto rz = run_episode(z, m, 1).log.records;
  const auto rt = run_episode(t, m, 1).log.records;
  size_t first = 0;
  while (first < rt.size() && rt[first].feedback.isZero(0.0)) ++first;
  REQUIRE(first >= 1);  // knot 0 sits on the nominal exactly
  REQUIRE(first < rt.size());
  for (size_t k = 0; k <= first; ++k) {
    CHECK(rz[k].state == rt[k].state);
    CHECK(rz[k].feedforward == rt[k].feedforward);
  }
  for (size_t k = 0; k < first; ++k) CHECK(rz[k].applied == rt[k].applied);
}

TEST_CASE("with a perfect model toast feedback stays negligible") {
  const ExperimentConfig c = linear_config("toast");
  const EpisodeResult r = run_episode(c, perfect_linear_model(c), 0);
  CHECK(r.metrics.mean_feedback < 1e-3);
  CHECK(r.metrics.rms_tracking_error < 1e-3);
  // The controller reaches the goal of the default linear task.
  CHECK(r.metrics.final_task_error < 0.05);
}

TEST_CASE("mppi_only without compute delay is the zoh controller") {
  const ExperimentConfig a = linear_config("mppi_only", 2.0);
  const ExperimentConfig b = linear_config("zoh_mppi", 2.0);
  const DynamicsModel m = perfect_linear_model(a);
  const auto ra = run_episode(a, m, 3).log.records;
  const auto rb = run_episode(b, m, 3).log.records;
  REQUIRE(ra.size() == rb.size());
  for (size_t k = 0; k < ra.size(); ++k) CHECK(ra[k].applied == rb[k].applied);
}

TEST_CASE("compute delay holds the previous command during the planning step") {
  ExperimentConfig c = with_override(linear_config("mppi_only", 1.0), "controller.compute_delay",
                                     true);
  const auto rec = run_episode(c, perfect_linear_model(c), 0).log.records;
  for (size_t k = 5; k < rec.size(); k += 5) {
    CHECK(rec[k].replanned);
    CHECK(rec[k].applied == rec[k - 1].applied);
  }
}

TEST_CASE("episodes are deterministic") {
  const ExperimentConfig c = linear_config("toast", 3.0);
  const DynamicsModel m = perfect_linear_model(c);
  CHECK(run_episode(c, m, 4).log.to_csv() == run_episode(c, m, 4).log.to_csv());
  CHECK(run_episode(c, m, 4).log.to_csv() != run_episode(c, m, 5).log.to_csv());
  ExperimentConfig threaded = with_override(c, "planner.workers", 3);
  // Same trajectory; only the hash in the header comment differs.
  auto strip = [](std::string s) { return s.substr(s.find('\n')); };
  CHECK(strip(run_episode(threaded, m, 4).log.to_csv()) == strip(run_episode(c, m, 4).log.to_csv()));
}

TEST_CASE("disturbances are logged and applied") {
  ExperimentConfig c = linear_config("zoh_mppi", 2.0);
  c = with_override(c, "disturbances",
                    json::parse(R"([{"kind": "step", "magnitude": 0.5, "t_start": 1.0,
                                     "t_end": 1.5},
                                    {"kind": "parameter_shift", "parameter": "gain",
                                     "magnitude": 0.25, "t_start": 0.5, "t_end": 0.7}])"));
  const auto rec = run_episode(c, perfect_linear_model(c), 0).log.records;
  for (const auto& r : rec) {
    const bool in_step = r.time >= 1.0 - 1e-12 && r.time < 1.5 - 1e-12;
    CHECK(r.disturbance[0] == (in_step ? 0.5 : 0.0));
    const bool in_shift = r.time >= 0.5 - 1e-12 && r.time < 0.7 - 1e-12;
    CHECK(r.parameter == (in_shift ? 0.25 : 0.0));
  }
}

TEST_CASE("metrics from a hand-built log") {
  ExperimentConfig c = linear_config("zoh_mppi", 0.05);
  c = with_override(c, "disturbances",
                    json::parse(R"([{"kind": "step", "magnitude": 1, "t_start": 0.01,
                                     "t_end": 0.02}])"));
  c = with_override(c, "episode.recovery_band", 0.5);
  EpisodeLog log;
  const double dev[] = {0.0, 1.0, 0.8, 0.2, 0.1};
  const double act[] = {0.0, 1.0, 0.0, 0.0, 0.5};
  for (int k = 0; k < 5; ++k) {
    EpisodeRecord r;
    r.time = 0.01 * k;
    r.deviation = dev[k];
    r.applied = Vec::Constant(1, act[k]);
    r.feedback = Vec::Constant(1, k == 2 ? -0.4 : 0.0);
    r.cost = k;
    r.task_error = 5 - k;
    r.replanned = k == 0;
    log.records.push_back(r);
  }
  const MetricsReport m = compute_metrics(c, log);
  CHECK(m.fast_steps == 5);
  CHECK(m.plan_calls == 1);
  CHECK(m.rms_tracking_error == doctest::Approx(std::sqrt((1 + 0.64 + 0.04 + 0.01) / 5)));
  CHECK(m.task_cost == doctest::Approx(2.0));
  CHECK(m.chattering == doctest::Approx((1 + 1 + 0 + 0.5) / 4));
  CHECK(m.mean_feedback == doctest::Approx(0.08));
  CHECK(m.max_task_error == 5.0);
  CHECK(m.final_task_error == 1.0);
  // Last step outside the band starts at 0.02 and ends at 0.03; onset 0.01.
  CHECK(m.recovery_time == doctest::Approx(0.02));
}

TEST_CASE("divergent models end the episode with a failure flag") {
  ExperimentConfig c = linear_config("zoh_mppi", 1.0);
  DynamicsModel m = affine_model(Mat::Constant(1, 1, 1e300), Mat::Constant(1, 1, 1e300),
                                 c.model.spec.history);
  m.mutable_layers()[0].bias.setConstant(1e300);  // every rollout overflows by its second step
  const EpisodeResult r = run_episode(c, m, 0);
  CHECK(r.log.failed);
  CHECK(r.metrics.failed);
  CHECK_FALSE(r.log.failure.empty());
  CHECK(r.log.to_csv().find("# failed:") != std::string::npos);
}

TEST_CASE("comparison reports") {
  ComparisonReport rep;
  rep.modes = {"zoh_mppi", "toast"};
  rep.seeds = {0, 1, 2};
  auto mk = [](double rms, bool failed = false) {
    MetricsReport m;
    m.rms_tracking_error = rms;
    m.failed = failed;
    return m;
  };
  rep.runs = {{mk(1.0), mk(2.0), mk(3.0)}, {mk(0.5), mk(2.0), mk(0.0, true)}};
  CHECK(rep.wins(1, 0, "rms_tracking_error") == 1);  // ties are not wins
  CHECK(rep.wins(0, 1, "rms_tracking_error") == 1);  // failures lose
  CHECK(rep.failures(1) == 1);
  const MetricSummary s = rep.summarize(0, "rms_tracking_error");
  CHECK(s.count == 3);
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.stddev == doctest::Approx(1.0));
  CHECK(rep.summarize(1, "rms_tracking_error").count == 2);
  CHECK_THROWS_AS(ComparisonReport::metric(mk(0), "speed"), ContractError);
  const std::string csv = rep.metrics_csv();
  CHECK(csv.rfind("mode,seed,failed,fast_steps,plan_calls,rms_tracking_error", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("compare writes per-mode logs and rejects mismatched configs") {
  const fs::path dir = scratch_dir("compare");
  const ExperimentConfig z = linear_config("zoh_mppi", 0.5);
  const ExperimentConfig t = linear_config("toast", 0.5);
  const DynamicsModel m = perfect_linear_model(z);
  const ComparisonReport rep = compare({z, t}, {0, 1}, m, dir.string(), nullptr);
  CHECK(rep.modes == std::vector<std::string>{"zoh_mppi", "toast"});
  for (const char* f : {"metrics.csv", "summary.txt", "timing.txt", "zoh_mppi/episode_0.csv",
                        "toast/episode_1.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  const std::string first = slurp(dir / "metrics.csv");
  compare({z, t}, {0, 1}, m, dir.string(), nullptr);
  CHECK(slurp(dir / "metrics.csv") == first);
  const ExperimentConfig other = with_override(t, "planner.samples", 16);
  CHECK_THROWS_AS(compare({z, other}, {0}, m, "", nullptr), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("pipeline stages and artifacts") {
  const fs::path dir = scratch_dir("pipeline");
  json doc = {{"env", {{"id", "linear"}}},
              {"model", {{"collect", {{"episodes", 5}, {"steps", 40}}}, {"train", {{"epochs", 20}}}}},
              {"planner", {{"samples", 16}, {"horizon", 8}}},
              {"episode", {{"duration", 0.5}, {"seeds", {0}}}},
              {"output", {{"dir", dir.string()}}}};
  const ExperimentConfig c = parse_config(doc);
  CHECK(pipeline(c, true).stages ==
        std::vector<std::string>{"collect", "train", "save_model", "compare", "report"});
  CHECK_FALSE(fs::exists(dir));

  std::vector<std::string> messages;
  const PipelineResult r = pipeline(c, false, [&](const std::string& s) { messages.push_back(s); });
  for (const auto& f : r.manifest) CHECK(fs::exists(f));
  CHECK(slurp(dir / "effective_config.hash") == "fnv1a64 " + c.hash() + "\n");
  CHECK(json::parse(slurp(dir / "effective_config.json")) == c.tree);
  CHECK(load_model((dir / "model.toastnn").string()).state_dim() == 1);
  CHECK_FALSE(messages.empty());

  const ExperimentConfig loaded =
      with_override(with_override(c, "model.path", (dir / "missing.toastnn").string()),
                    "model.source", "load");
  CHECK(pipeline(loaded, true).stages ==
        std::vector<std::string>{"load_model", "compare", "report"});
  try {
    pipeline(loaded, false);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "load_model");
  }
  fs::remove_all(dir);
}
