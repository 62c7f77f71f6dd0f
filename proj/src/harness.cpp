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

#include "toast/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "toast/csv.hpp"
#include "toast/model_io.hpp"
#include "toast/smppi.hpp"
#include "toast/training.hpp"
#include "toast/tvlqr.hpp"

namespace toast {

namespace fs = std::filesystem;

std::uint64_t episode_planner_seed(std::uint64_t config_seed, std::uint64_t episode_seed) {
  // splitmix64 finalizer over the combined seeds
  std::uint64_t z = config_seed + 0x9e3779b97f4a7c15ULL * (episode_seed + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

struct ActivePlan {
  LiftedPlan plan;
  std::optional<GainSchedule> schedule;
  std::int64_t start = 0;  // fast step at which knot 0 begins
};

// Nominal physical state `frac` of the way from knot to knot + 1.
Vec plan_nominal(const LiftedPlan& plan, int knot, double frac, const std::vector<bool>& mask) {
  const Vec x0 = plan.nominal(knot);
  if (frac == 0.0) return x0;
  const Vec x1 = plan.nominal(knot + 1);
  if (frac == 1.0) return x1;
  return x0 + frac * angle_aware_diff(x1, x0, mask);
}

// Environment with the parameter overrides active at time t.
class EnvAtTime {
 public:
  EnvAtTime(const EnvSpec& base, const std::vector<Disturbance>& d) : base_(base), dist_(d) {}

  const EnvSpec& at(double t, double* parameter) {
    std::vector<int> key;
    *parameter = 0.0;
    for (size_t i = 0; i < dist_.size(); ++i) {
      if (dist_[i].kind == DisturbanceKind::kParameterShift && active(dist_[i], t)) {
        key.push_back(static_cast<int>(i));
        *parameter = dist_[i].magnitude;
      }
    }
    if (key.empty()) return base_;
    if (key != key_) {
      key_ = key;
      current_ = base_;
      for (int i : key) current_.params[dist_[i].parameter] = dist_[i].magnitude;
    }
    return current_;
  }

 private:
  const EnvSpec& base_;
  const std::vector<Disturbance>& dist_;
  std::vector<int> key_;
  EnvSpec current_;
};

}  // namespace

EpisodeResult run_episode(const ExperimentConfig& config, const DynamicsModel& model,
                          std::uint64_t seed) {
  const EnvSpec& env = config.env;
  const ControllerConfig& ctl = config.controller;
  const ControllerMode mode = config.controller.mode;
  require_dim(model.state_dim(), env.n_x, "model state dimension");
  require_dim(model.action_dim(), env.n_u, "model action dimension");
  const int N = ctl.n_fast;
  const std::int64_t steps = std::llround(config.duration / ctl.fast_dt);
  const int H = model.history_len();
  const std::vector<bool> mask = env.angle_mask();
  const bool toast_mode = mode == ControllerMode::kToast;
  const bool augmented = toast_mode && config.tracking.augmented;
  if (augmented && H < 1) throw ConfigError("augmented tracking needs a model with history >= 1");

  MppiConfig mcfg = config.mppi;
  mcfg.rng_seed = episode_planner_seed(config.mppi.rng_seed, seed);
  SmppiPlanner planner(mcfg);

  std::vector<Disturbance> dist;
  for (const auto& d : config.disturbances) dist.push_back(d.realize(seed));
  EnvAtTime env_at(env, dist);

  std::unique_ptr<TaskCost> cost = config.make_cost();
  cost->reset();

  const int aug_dim = augmented ? model.augmented_dim() : env.n_x;
  const TrackingCost tracking =
      toast_mode ? config.tracking_cost(aug_dim) : TrackingCost{};

  EpisodeResult res;
  EpisodeLog& log = res.log;
  log.state_names = env.state_names;
  log.action_names = env.action_names;
  log.seed = seed;
  log.mode = mode_name(mode);
  log.config_hash = config.hash();
  log.records.reserve(static_cast<size_t>(steps));

  Vec x = env.initial_state;
  cost->observe(x);
  // The system is taken to be at rest with zero input before t = 0.
  HistoryWindow hist(env.n_x, env.n_u, H);
  const Vec u_zero = Vec::Zero(env.n_u);
  for (int i = 0; i < H; ++i) hist.push(x, u_zero);

  std::optional<ActivePlan> active_plan;
  std::optional<ActivePlan> pending;
  Vec last_command = u_zero;
  Vec interval_sum = Vec::Zero(env.n_u);
  Vec x_knot = x;
  double planner_ms = 0.0;
  int plan_calls = 0;

  try {
    for (std::int64_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * ctl.fast_dt;
      bool replanned = false;
      if (k % N == 0) {
        if (k > 0 && H > 0) hist.push(x_knot, interval_sum / static_cast<double>(N));
        interval_sum.setZero();
        x_knot = x;
        const LiftedPlan incumbent =
            active_plan ? shift(active_plan->plan)
                        : zero_plan(mcfg.horizon, env.n_x, u_zero, mcfg.dt, mcfg.lifted);
        const auto t0 = std::chrono::steady_clock::now();
        ActivePlan next;
        next.plan = planner.plan(model, x, hist, incumbent, *cost);
        if (toast_mode) {
          next.schedule =
              synthesize_schedule(model, next.plan, hist, tracking, augmented, env.bounds);
        }
        planner_ms += std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        ++plan_calls;
        replanned = true;
        next.start = k;
        if (ctl.compute_delay && active_plan) next.start = k + 1;
        if (next.schedule) next.schedule->valid_from = next.start;
        if (next.start > k) {
          pending = std::move(next);
        } else {
          active_plan = std::move(next);
        }
      }
      if (pending && k >= pending->start) {
        active_plan = std::move(pending);
        pending.reset();
      }

      const ActivePlan& ap = *active_plan;
      const std::int64_t offset = k - ap.start;
      const int knot = static_cast<int>(offset / N);
      const int sub = static_cast<int>(offset % N);
      if (knot >= ap.plan.horizon()) throw ContractError("fast step ran past the plan horizon");

      EpisodeRecord rec;
      rec.time = t;
      rec.state = x;
      rec.replanned = replanned;
      if (mode == ControllerMode::kMppiOnly && pending) {
        rec.feedforward = last_command;  // new plan not yet available
      } else {
        rec.feedforward = ap.plan.action(knot);
      }
      rec.feedback = Vec::Zero(env.n_u);
      if (toast_mode && ap.schedule) {
        const GainSchedule& gs = *ap.schedule;
        const GainSample g = interpolate_gain(gs, knot, sub, N);
        Vec z_nom = gs.nominal_states[knot];
        z_nom.head(env.n_x) = g.nominal_state.head(env.n_x);
        const Vec z = augmented ? augmented_state(x, hist) : x;
        rec.feedback = -g.gain * angle_aware_diff(z, z_nom, gs.angle_mask);
      }
      rec.command = rec.feedforward + rec.feedback;
      rec.applied = env.bounds.clamp(rec.command);
      rec.clamped = (rec.applied - rec.command).cwiseAbs().maxCoeff() > 0.0;
      last_command = rec.applied;

      rec.disturbance = Vec::Zero(env.n_u);
      for (const auto& d : dist) {
        if (d.kind != DisturbanceKind::kParameterShift) rec.disturbance[d.channel] += inject(d, t);
      }
      const EnvSpec& env_now = env_at.at(t, &rec.parameter);
      const Vec x_next = advance(env_now, x, rec.applied, rec.disturbance, ctl.substeps);
      if (!x_next.allFinite()) throw DivergenceError("simulator state became non-finite");

      // Nominal at the end of this fast step, under the plan in force.
      const Vec x_nom = plan_nominal(ap.plan, knot + (sub + 1) / N,
                                     static_cast<double>((sub + 1) % N) / N, mask);
      rec.deviation = angle_aware_diff(x_next, x_nom, mask).norm();
      cost->observe(x_next);
      CostScratch scratch = cost->begin();
      rec.cost = cost->running(x_next, scratch);
      rec.task_error = cost->task_error(x_next, scratch);
      interval_sum += rec.applied;
      log.records.push_back(std::move(rec));
      x = x_next;
    }
  } catch (const DivergenceError& e) {
    log.failed = true;
    log.failure = e.what();
  } catch (const ContractError& e) {
    log.failed = true;
    log.failure = e.what();
  }

  res.metrics = compute_metrics(config, log);
  res.metrics.plan_calls = plan_calls;
  res.metrics.planner_ms = plan_calls > 0 ? planner_ms / plan_calls : 0.0;
  return res;
}

MetricsReport compute_metrics(const ExperimentConfig& config, const EpisodeLog& log) {
  MetricsReport m;
  m.seed = log.seed;
  m.mode = log.mode;
  m.failed = log.failed;
  m.failure = log.failure;
  const auto& r = log.records;
  m.fast_steps = static_cast<int>(r.size());
  for (const auto& rec : r) m.plan_calls += rec.replanned ? 1 : 0;
  if (r.empty()) return m;
  double sq = 0.0, cost = 0.0, fb = 0.0;
  for (const auto& rec : r) {
    sq += rec.deviation * rec.deviation;
    cost += rec.cost;
    fb += rec.feedback.norm();
    m.max_task_error = std::max(m.max_task_error, rec.task_error);
  }
  const double n = static_cast<double>(r.size());
  m.rms_tracking_error = std::sqrt(sq / n);
  m.task_cost = cost / n;
  m.mean_feedback = fb / n;
  m.final_task_error = r.back().task_error;
  if (r.size() > 1) {
    double ch = 0.0;
    for (size_t i = 1; i < r.size(); ++i) ch += (r[i].applied - r[i - 1].applied).norm();
    m.chattering = ch / static_cast<double>(r.size() - 1);
  }
  // Recovery: time from the first disturbance onset until the deviation last
  // leaves the band.
  double onset = std::numeric_limits<double>::infinity();
  for (const auto& d : config.disturbances) onset = std::min(onset, d.realize(log.seed).t_start);
  if (std::isfinite(onset)) {
    const double dt = config.controller.fast_dt;
    double last_out = -1.0;
    for (const auto& rec : r) {
      if (rec.time + 1e-12 >= onset && rec.deviation > config.recovery_band) last_out = rec.time;
    }
    if (last_out >= 0.0) m.recovery_time = std::max(0.0, last_out + dt - onset);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Comparison

const std::vector<std::string>& ComparisonReport::metric_names() {
  static const std::vector<std::string> names = {
      "rms_tracking_error", "task_cost",      "chattering",       "recovery_time",
      "max_task_error",     "final_task_error", "mean_feedback"};
  return names;
}

double ComparisonReport::metric(const MetricsReport& m, const std::string& name) {
  if (name == "rms_tracking_error") return m.rms_tracking_error;
  if (name == "task_cost") return m.task_cost;
  if (name == "chattering") return m.chattering;
  if (name == "recovery_time") return m.recovery_time;
  if (name == "max_task_error") return m.max_task_error;
  if (name == "final_task_error") return m.final_task_error;
  if (name == "mean_feedback") return m.mean_feedback;
  throw ContractError("unknown metric '" + name + "'");
}

MetricSummary ComparisonReport::summarize(int config, const std::string& name) const {
  MetricSummary s;
  double sum = 0.0;
  for (const auto& m : runs.at(config)) {
    if (m.failed) continue;
    sum += metric(m, name);
    ++s.count;
  }
  if (s.count == 0) return s;
  s.mean = sum / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (const auto& m : runs.at(config)) {
      if (!m.failed) ss += (metric(m, name) - s.mean) * (metric(m, name) - s.mean);
    }
    s.stddev = std::sqrt(ss / (s.count - 1));
  }
  return s;
}

int ComparisonReport::wins(int a, int b, const std::string& name) const {
  int w = 0;
  for (size_t s = 0; s < seeds.size(); ++s) {
    const auto& ma = runs.at(a).at(s);
    const auto& mb = runs.at(b).at(s);
    if (!ma.failed && (mb.failed || metric(ma, name) < metric(mb, name))) ++w;
  }
  return w;
}

int ComparisonReport::failures(int config) const {
  int f = 0;
  for (const auto& m : runs.at(config)) f += m.failed ? 1 : 0;
  return f;
}

std::string ComparisonReport::metrics_csv() const {
  std::ostringstream o;
  o << "mode,seed,failed,fast_steps,plan_calls";
  for (const auto& n : metric_names()) o << "," << n;
  o << "\n";
  for (size_t c = 0; c < runs.size(); ++c) {
    for (const auto& m : runs[c]) {
      o << modes[c] << "," << m.seed << "," << (m.failed ? 1 : 0) << "," << m.fast_steps << ","
        << m.plan_calls;
      for (const auto& n : metric_names()) o << "," << fmt_double(metric(m, n));
      o << "\n";
    }
  }
  return o.str();
}

std::string ComparisonReport::summary_text() const {
  std::ostringstream o;
  char buf[256];
  o << "seeds: " << seeds.size() << "\n\n";
  for (size_t c = 0; c < runs.size(); ++c) {
    o << "mode " << modes[c] << " (" << runs[c].size() - failures(static_cast<int>(c)) << " ok, "
      << failures(static_cast<int>(c)) << " failed)\n";
    for (const auto& n : metric_names()) {
      const MetricSummary s = summarize(static_cast<int>(c), n);
      std::snprintf(buf, sizeof(buf), "  %-20s %.6g +/- %.6g (n=%d)\n", n.c_str(), s.mean,
                    s.stddev, s.count);
      o << buf;
    }
    for (const auto& m : runs[c]) {
      if (m.failed) o << "  FAILED seed " << m.seed << ": " << m.failure << "\n";
    }
  }
  if (runs.size() > 1) {
    o << "\nper-seed wins (row strictly lower than column)\n";
    for (const auto& n : metric_names()) {
      o << "  " << n << "\n";
      for (size_t a = 0; a < runs.size(); ++a) {
        for (size_t b = 0; b < runs.size(); ++b) {
          if (a == b) continue;
          o << "    " << modes[a] << " vs " << modes[b] << ": "
            << wins(static_cast<int>(a), static_cast<int>(b), n) << "/" << seeds.size() << "\n";
        }
      }
    }
  }
  return o.str();
}

namespace {

nlohmann::json without_mode(const ExperimentConfig& c) {
  nlohmann::json t = c.tree;
  t["controller"].erase("mode");
  return t;
}

}  // namespace

ComparisonReport compare(const std::vector<ExperimentConfig>& configs,
                         const std::vector<std::uint64_t>& seeds, const DynamicsModel& model,
                         const std::string& out_dir, const LogFn& log) {
  require(!configs.empty(), "compare needs at least one config");
  require(!seeds.empty(), "compare needs at least one seed");
  const nlohmann::json ref = without_mode(configs.front());
  for (size_t i = 1; i < configs.size(); ++i) {
    if (without_mode(configs[i]) != ref) {
      throw ConfigError("compared configs must differ only in controller.mode (config " +
                        std::to_string(i) + " differs)");
    }
  }
  ComparisonReport rep;
  rep.seeds = seeds;
  std::ostringstream timing;
  timing << "mode,seed,planner_ms_per_update\n";
  for (const auto& cfg : configs) {
    const std::string mode = mode_name(cfg.controller.mode);
    rep.modes.push_back(mode);
    std::vector<MetricsReport> row;
    for (std::uint64_t s : seeds) {
      EpisodeResult r = run_episode(cfg, model, s);
      if (log) {
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%s seed %llu: rms %.4g chatter %.4g max_err %.4g%s",
                      mode.c_str(), static_cast<unsigned long long>(s),
                      r.metrics.rms_tracking_error, r.metrics.chattering,
                      r.metrics.max_task_error, r.metrics.failed ? " FAILED" : "");
        log(buf);
      }
      if (!out_dir.empty()) {
        fs::create_directories(fs::path(out_dir) / mode);
        r.log.write_csv((fs::path(out_dir) / mode / ("episode_" + std::to_string(s) + ".csv"))
                            .string());
      }
      timing << mode << "," << s << "," << r.metrics.planner_ms << "\n";
      row.push_back(std::move(r.metrics));
    }
    rep.runs.push_back(std::move(row));
  }
  if (!out_dir.empty()) {
    write_text_file((fs::path(out_dir) / "metrics.csv").string(), rep.metrics_csv());
    write_text_file((fs::path(out_dir) / "summary.txt").string(), rep.summary_text());
    write_text_file((fs::path(out_dir) / "timing.txt").string(), timing.str());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Pipeline

void ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  }
  const fs::path probe = fs::path(dir) / ".toast_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

void write_effective_config(const ExperimentConfig& config, const std::string& dir) {
  write_text_file((fs::path(dir) / "effective_config.json").string(), config.dump() + "\n");
  write_text_file((fs::path(dir) / "effective_config.hash").string(),
                  "fnv1a64 " + config.hash() + "\n");
}

DynamicsModel obtain_model(const ExperimentConfig& config, double* validation_rmse,
                           const LogFn& log) {
  if (config.model.load) {
    DynamicsModel m = load_model(config.model.path);
    require_dim(m.state_dim(), config.env.n_x, "loaded model state dimension");
    require_dim(m.action_dim(), config.env.n_u, "loaded model action dimension");
    return m;
  }
  EnvSpec env = config.env;
  const auto data = collect_dataset(env, config.model.collect);
  if (log) log("collected " + std::to_string(data.size()) + " transitions");
  auto [model, report] = train(data, config.model.spec, config.model.train);
  if (validation_rmse) *validation_rmse = report.final_validation_rmse();
  if (log) log("validation normalized RMSE " + std::to_string(report.final_validation_rmse()));
  return model;
}

PipelineResult pipeline(const ExperimentConfig& config, bool dry_run, const LogFn& log) {
  PipelineResult res;
  if (config.model.load) {
    res.stages = {"load_model", "compare", "report"};
  } else {
    res.stages = {"collect", "train", "save_model", "compare", "report"};
  }
  if (dry_run) return res;

  const std::string out = config.output_dir;
  try {
    ensure_output_dir(out);
    write_effective_config(config, out);
  } catch (const std::exception& e) {
    throw StageError("prepare", e.what());
  }
  res.manifest.push_back((fs::path(out) / "effective_config.json").string());
  res.manifest.push_back((fs::path(out) / "effective_config.hash").string());

  DynamicsModel model;
  const fs::path model_path = fs::path(out) / "model.toastnn";
  if (config.model.load) {
    try {
      model = obtain_model(config, nullptr, log);
    } catch (const std::exception& e) {
      throw StageError("load_model", e.what());
    }
  } else {
    std::vector<TransitionSample> data;
    try {
      data = collect_dataset(config.env, config.model.collect);
      const std::string p = (fs::path(out) / "dataset.csv").string();
      write_dataset_csv(data, p);
      res.manifest.push_back(p);
      if (log) log("collect: " + std::to_string(data.size()) + " transitions");
    } catch (const std::exception& e) {
      throw StageError("collect", e.what());
    }
    try {
      auto [m, report] = train(data, config.model.spec, config.model.train);
      model = std::move(m);
      res.validation_rmse = report.final_validation_rmse();
      std::ostringstream o;
      o << "epoch,train_mse,validation_mse\n";
      for (size_t i = 0; i < report.train_loss.size(); ++i) {
        o << i + 1 << "," << fmt_double(report.train_loss[i]) << ","
          << fmt_double(i < report.validation_loss.size() ? report.validation_loss[i] : 0.0)
          << "\n";
      }
      const std::string p = (fs::path(out) / "training.csv").string();
      write_text_file(p, o.str());
      res.manifest.push_back(p);
      if (log) log("train: validation normalized RMSE " + std::to_string(res.validation_rmse));
    } catch (const std::exception& e) {
      throw StageError("train", e.what());
    }
    try {
      save_model(model, model_path.string());
      res.manifest.push_back(model_path.string());
    } catch (const std::exception& e) {
      throw StageError("save_model", e.what());
    }
  }

  try {
    std::vector<ExperimentConfig> cfgs;
    for (ControllerMode m : config.compare_modes) {
      cfgs.push_back(with_override(config, "controller.mode", mode_name(m)));
    }
    res.report = compare(cfgs, config.seeds, model, out, log);
  } catch (const std::exception& e) {
    throw StageError("compare", e.what());
  }
  for (const auto& mode : res.report.modes) {
    for (std::uint64_t s : config.seeds) {
      res.manifest.push_back(
          (fs::path(out) / mode / ("episode_" + std::to_string(s) + ".csv")).string());
    }
  }
  for (const char* f : {"metrics.csv", "summary.txt", "timing.txt"}) {
    res.manifest.push_back((fs::path(out) / f).string());
  }
  if (log) {
    log("manifest:");
    for (const auto& f : res.manifest) log("  " + f);
  }
  return res;
}

}  // namespace toast
