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

#include "toast/toast.h"

#include <cstring>
#include <filesystem>
#include <mutex>
#include <string>

#include "toast/config.hpp"
#include "toast/harness.hpp"
#include "toast/model_io.hpp"

struct toast_config {
  toast::ExperimentConfig cfg;
};

struct toast_model {
  toast::DynamicsModel model;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
toast_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

toast::LogFn logger() {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (!g_log_fn) return nullptr;
  toast_log_fn fn = g_log_fn;
  void* user = g_log_user;
  return [fn, user](const std::string& m) { fn(m.c_str(), user); };
}

toast_status fail(toast_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <typename F>
toast_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return TOAST_OK;
  } catch (const toast::DimensionError& e) {
    return fail(TOAST_ERR_DIMENSION, e.what());
  } catch (const toast::ContractError& e) {
    return fail(TOAST_ERR_INVALID_ARGUMENT, e.what());
  } catch (const toast::FormatError& e) {
    return fail(TOAST_ERR_FORMAT, e.what());
  } catch (const toast::ConfigError& e) {
    return fail(TOAST_ERR_CONFIG, e.what());
  } catch (const toast::IoError& e) {
    return fail(TOAST_ERR_IO, e.what());
  } catch (const toast::DivergenceError& e) {
    return fail(TOAST_ERR_DIVERGENCE, e.what());
  } catch (const toast::StageError& e) {
    return fail(TOAST_ERR_STAGE, e.what());
  } catch (const std::exception& e) {
    return fail(TOAST_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TOAST_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (!p) throw toast::ContractError(std::string(name) + " must not be null");
}

toast::HistoryWindow make_history(const toast::DynamicsModel& m, const double* past_states,
                                  const double* past_actions) {
  const int H = m.history_len(), n_x = m.state_dim(), n_u = m.action_dim();
  toast::HistoryWindow h(n_x, n_u, H);
  if (H == 0) return h;
  need(past_states, "past_states");
  need(past_actions, "past_actions");
  for (int i = 0; i < H; ++i) {
    h.push(Eigen::Map<const toast::Vec>(past_states + i * n_x, n_x),
           Eigen::Map<const toast::Vec>(past_actions + i * n_u, n_u));
  }
  return h;
}

void copy_row_major(const toast::Mat& m, double* dst) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) dst[r * m.cols() + c] = m(r, c);
  }
}

void fill_metrics(const toast::MetricsReport& m, toast_metrics* out) {
  out->seed = m.seed;
  out->fast_steps = m.fast_steps;
  out->plan_calls = m.plan_calls;
  out->failed = m.failed ? 1 : 0;
  out->rms_tracking_error = m.rms_tracking_error;
  out->task_cost = m.task_cost;
  out->chattering = m.chattering;
  out->recovery_time = m.recovery_time;
  out->max_task_error = m.max_task_error;
  out->final_task_error = m.final_task_error;
  out->mean_feedback = m.mean_feedback;
  out->planner_ms = m.planner_ms;
}

}  // namespace

extern "C" {

const char* toast_version(void) { return "1.0.0"; }

const char* toast_last_error(void) { return g_last_error.c_str(); }

const char* toast_status_name(toast_status s) {
  switch (s) {
    case TOAST_OK: return "ok";
    case TOAST_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TOAST_ERR_DIMENSION: return "dimension mismatch";
    case TOAST_ERR_FORMAT: return "format error";
    case TOAST_ERR_CONFIG: return "config error";
    case TOAST_ERR_IO: return "io error";
    case TOAST_ERR_DIVERGENCE: return "divergence";
    case TOAST_ERR_STAGE: return "stage failure";
    case TOAST_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case TOAST_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void toast_set_log_callback(toast_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

toast_status toast_config_load(const char* path, toast_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new toast_config{toast::load_config(path)};
  });
}

toast_status toast_config_parse(const char* json_text, toast_config** out) {
  return guarded([&] {
    need(json_text, "json_text");
    need(out, "out");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
      throw toast::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    *out = new toast_config{toast::parse_config(doc)};
  });
}

toast_status toast_config_set(toast_config* cfg, const char* dotted_key, const char* json_value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(dotted_key, "dotted_key");
    need(json_value, "json_value");
    nlohmann::json v;
    try {
      v = nlohmann::json::parse(json_value);
    } catch (const nlohmann::json::parse_error& e) {
      throw toast::ConfigError(std::string("value for '") + dotted_key +
                               "' is not valid JSON: " + e.what());
    }
    cfg->cfg = toast::with_override(cfg->cfg, dotted_key, v);
  });
}

toast_status toast_config_dump(const toast_config* cfg, char* buf, size_t len, size_t* needed) {
  toast_status s = guarded([&] { need(cfg, "cfg"); });
  if (s != TOAST_OK) return s;
  const std::string d = cfg->cfg.dump();
  if (needed) *needed = d.size() + 1;
  if (!buf || len < d.size() + 1) return fail(TOAST_ERR_BUFFER_TOO_SMALL, "buffer too small");
  std::memcpy(buf, d.c_str(), d.size() + 1);
  return TOAST_OK;
}

toast_status toast_config_get(const toast_config* cfg, const char* dotted_key, char* buf,
                              size_t len, size_t* needed) {
  std::string d;
  toast_status s = guarded([&] {
    need(cfg, "cfg");
    need(dotted_key, "dotted_key");
    const nlohmann::json* node = &cfg->cfg.tree;
    std::string key(dotted_key);
    size_t pos = 0;
    while (true) {
      const size_t dot = key.find('.', pos);
      const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
      if (!node->is_object() || !node->contains(part)) {
        throw toast::ConfigError("unknown config key '" + key + "'");
      }
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    d = node->dump();
  });
  if (s != TOAST_OK) return s;
  if (needed) *needed = d.size() + 1;
  if (!buf || len < d.size() + 1) return fail(TOAST_ERR_BUFFER_TOO_SMALL, "buffer too small");
  std::memcpy(buf, d.c_str(), d.size() + 1);
  return TOAST_OK;
}

toast_status toast_config_hash(const toast_config* cfg, char* buf, size_t len) {
  toast_status s = guarded([&] {
    need(cfg, "cfg");
    need(buf, "buf");
  });
  if (s != TOAST_OK) return s;
  const std::string h = cfg->cfg.hash();
  if (len < h.size() + 1) return fail(TOAST_ERR_BUFFER_TOO_SMALL, "buffer too small");
  std::memcpy(buf, h.c_str(), h.size() + 1);
  return TOAST_OK;
}

void toast_config_free(toast_config* cfg) { delete cfg; }

toast_status toast_model_load(const char* path, toast_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new toast_model{toast::load_model(path)};
  });
}

toast_status toast_model_save(const toast_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    toast::save_model(model->model, path);
  });
}

toast_status toast_model_dims(const toast_model* model, int32_t* state_dim, int32_t* action_dim,
                              int32_t* history) {
  return guarded([&] {
    need(model, "model");
    if (state_dim) *state_dim = model->model.state_dim();
    if (action_dim) *action_dim = model->model.action_dim();
    if (history) *history = model->model.history_len();
  });
}

toast_status toast_model_forward(const toast_model* model, const double* state,
                                 const double* action, const double* past_states,
                                 const double* past_actions, double* next_state) {
  return guarded([&] {
    need(model, "model");
    need(state, "state");
    need(action, "action");
    need(next_state, "next_state");
    const auto& m = model->model;
    const auto h = make_history(m, past_states, past_actions);
    const toast::Vec x = Eigen::Map<const toast::Vec>(state, m.state_dim());
    const toast::Vec u = Eigen::Map<const toast::Vec>(action, m.action_dim());
    const toast::Vec y = m.forward(x, u, h);
    std::memcpy(next_state, y.data(), sizeof(double) * static_cast<size_t>(y.size()));
  });
}

toast_status toast_model_jacobians(const toast_model* model, const double* state,
                                   const double* action, const double* past_states,
                                   const double* past_actions, double* a, double* b) {
  return guarded([&] {
    need(model, "model");
    need(state, "state");
    need(action, "action");
    need(a, "a");
    need(b, "b");
    const auto& m = model->model;
    const auto h = make_history(m, past_states, past_actions);
    const toast::Vec x = Eigen::Map<const toast::Vec>(state, m.state_dim());
    const toast::Vec u = Eigen::Map<const toast::Vec>(action, m.action_dim());
    const auto [ja, jb] = m.jacobians(x, u, h);
    copy_row_major(ja, a);
    copy_row_major(jb, b);
  });
}

void toast_model_free(toast_model* model) { delete model; }

toast_status toast_collect(const toast_config* cfg, const char* dataset_path) {
  return guarded([&] {
    need(cfg, "cfg");
    need(dataset_path, "dataset_path");
    const auto data = toast::collect_dataset(cfg->cfg.env, cfg->cfg.model.collect);
    toast::write_dataset_csv(data, dataset_path);
    if (auto log = logger()) log("collected " + std::to_string(data.size()) + " transitions");
  });
}

toast_status toast_train(const toast_config* cfg, const char* dataset_path, toast_model** out,
                         double* validation_rmse) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    const auto data = dataset_path
                          ? toast::read_dataset_csv(dataset_path)
                          : toast::collect_dataset(cfg->cfg.env, cfg->cfg.model.collect);
    auto [m, report] = toast::train(data, cfg->cfg.model.spec, cfg->cfg.model.train);
    if (validation_rmse) *validation_rmse = report.final_validation_rmse();
    if (auto log = logger()) {
      log("trained on " + std::to_string(report.train_count) + " samples, validation " +
          "normalized RMSE " + std::to_string(report.final_validation_rmse()));
    }
    *out = new toast_model{std::move(m)};
  });
}

toast_status toast_obtain_model(const toast_config* cfg, toast_model** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = new toast_model{toast::obtain_model(cfg->cfg, nullptr, logger())};
  });
}

toast_status toast_run(const toast_config* cfg, const toast_model* model, uint64_t seed,
                       const char* out_dir, toast_metrics* metrics) {
  return guarded([&] {
    need(cfg, "cfg");
    need(model, "model");
    auto r = toast::run_episode(cfg->cfg, model->model, seed);
    if (out_dir) {
      toast::ensure_output_dir(out_dir);
      r.log.write_csv(
          (std::filesystem::path(out_dir) / ("episode_" + std::to_string(seed) + ".csv")).string());
    }
    if (metrics) fill_metrics(r.metrics, metrics);
    if (auto log = logger()) {
      log(r.log.mode + " seed " + std::to_string(seed) + ": rms tracking error " +
          std::to_string(r.metrics.rms_tracking_error) + (r.metrics.failed ? " FAILED" : ""));
    }
  });
}

toast_status toast_compare(const toast_config* cfg, const toast_model* model, const char* out_dir) {
  return guarded([&] {
    need(cfg, "cfg");
    need(model, "model");
    need(out_dir, "out_dir");
    toast::ensure_output_dir(out_dir);
    std::vector<toast::ExperimentConfig> cfgs;
    for (auto m : cfg->cfg.compare_modes) {
      cfgs.push_back(toast::with_override(cfg->cfg, "controller.mode", toast::mode_name(m)));
    }
    toast::compare(cfgs, cfg->cfg.seeds, model->model, out_dir, logger());
  });
}

toast_status toast_pipeline(const toast_config* cfg, int dry_run) {
  return guarded([&] {
    need(cfg, "cfg");
    auto log = logger();
    const auto res = toast::pipeline(cfg->cfg, dry_run != 0, log);
    if (dry_run && log) {
      log("config hash " + cfg->cfg.hash());
      log("stages:");
      for (const auto& s : res.stages) log("  " + s);
      log("output dir " + cfg->cfg.output_dir);
    }
  });
}

toast_status toast_write_effective_config(const toast_config* cfg, const char* dir) {
  return guarded([&] {
    need(cfg, "cfg");
    need(dir, "dir");
    toast::ensure_output_dir(dir);
    toast::write_effective_config(cfg->cfg, dir);
  });
}

}  // extern "C"
