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

// Command-line front end. Uses only the C interface of libtoast.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "toast/toast.h"

namespace {

struct Options {
  std::string config;
  std::string env = "pendulum";
  std::string out;
  std::string mode;
  std::string model;
  long long seed = -1;
  bool dry_run = false;
};

class Failure : public std::runtime_error {
 public:
  Failure(toast_status s, const std::string& what)
      : std::runtime_error(what), status(s) {}
  toast_status status;
};

void check(toast_status s, const char* what) {
  if (s != TOAST_OK) {
    throw Failure(s, std::string(what) + ": " + toast_status_name(s) + ": " + toast_last_error());
  }
}

void print_log(const char* msg, void*) { std::fprintf(stderr, "%s\n", msg); }

using ConfigPtr = std::unique_ptr<toast_config, decltype(&toast_config_free)>;
using ModelPtr = std::unique_ptr<toast_model, decltype(&toast_model_free)>;

ConfigPtr load(const Options& o, bool single_mode) {
  toast_config* raw = nullptr;
  if (!o.config.empty()) {
    check(toast_config_load(o.config.c_str(), &raw), "loading config");
  } else {
    const std::string doc = "{\"env\": {\"id\": \"" + o.env + "\"}}";
    check(toast_config_parse(doc.c_str(), &raw), "building default config");
  }
  ConfigPtr cfg(raw, toast_config_free);
  if (!o.out.empty()) {
    check(toast_config_set(cfg.get(), "output.dir", ("\"" + o.out + "\"").c_str()), "--out");
  }
  if (o.seed >= 0) {
    check(toast_config_set(cfg.get(), "episode.seeds", ("[" + std::to_string(o.seed) + "]").c_str()),
          "--seed");
  }
  if (!o.mode.empty()) {
    const std::string m = "\"" + o.mode + "\"";
    check(toast_config_set(cfg.get(), "controller.mode", m.c_str()), "--mode");
    if (!single_mode) {
      check(toast_config_set(cfg.get(), "compare.modes", ("[" + m + "]").c_str()), "--mode");
    }
  }
  if (!o.model.empty()) {
    check(toast_config_set(cfg.get(), "model.path", ("\"" + o.model + "\"").c_str()), "--model");
    check(toast_config_set(cfg.get(), "model.source", "\"load\""), "--model");
  }
  return cfg;
}

nlohmann::json get(const toast_config* cfg, const char* key) {
  size_t needed = 0;
  toast_config_get(cfg, key, nullptr, 0, &needed);
  std::string buf(needed, '\0');
  check(toast_config_get(cfg, key, buf.data(), buf.size(), &needed), key);
  return nlohmann::json::parse(buf.c_str());
}

ModelPtr obtain(const toast_config* cfg) {
  toast_model* raw = nullptr;
  check(toast_obtain_model(cfg, &raw), "obtaining model");
  return ModelPtr(raw, toast_model_free);
}

void print_hash(const toast_config* cfg) {
  char h[17];
  check(toast_config_hash(cfg, h, sizeof(h)), "hashing config");
  std::printf("config hash %s\n", h);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TOAST: smooth MPPI planning with TVLQR tracking on learned dynamics"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&o](CLI::App* sc) {
    sc->add_option("--config", o.config, "JSON experiment config");
    sc->add_option("--env", o.env, "environment defaults when no config is given")
        ->check(CLI::IsMember({"pendulum", "cartpole", "vehicle", "linear"}));
    sc->add_option("--out", o.out, "output directory");
    sc->add_option("--seed", o.seed, "episode seed (replaces episode.seeds)")
        ->check(CLI::NonNegativeNumber);
    sc->add_option("--mode", o.mode, "controller mode")
        ->check(CLI::IsMember({"mppi_only", "zoh_mppi", "toast"}));
    sc->add_option("--model", o.model, "load this model instead of training");
    sc->add_flag("--dry-run", o.dry_run, "validate and print the plan only");
  };
  auto* collect = app.add_subcommand("collect", "collect a dataset (dataset.csv)");
  auto* train = app.add_subcommand("train", "train a model (model.toastnn)");
  auto* run = app.add_subcommand("run", "run episodes in one mode");
  auto* cmp = app.add_subcommand("compare", "compare controller modes over seeds");
  auto* pipe = app.add_subcommand("pipeline", "collect, train, compare, report");
  for (auto* sc : {collect, train, run, cmp, pipe}) add_common(sc);
  CLI11_PARSE(app, argc, argv);

  toast_set_log_callback(print_log, nullptr);
  namespace fs = std::filesystem;
  try {
    if (pipe->parsed()) {
      ConfigPtr cfg = load(o, false);
      print_hash(cfg.get());
      check(toast_pipeline(cfg.get(), o.dry_run ? 1 : 0), "pipeline");
      return 0;
    }
    const bool single = run->parsed();
    ConfigPtr cfg = load(o, single);
    print_hash(cfg.get());
    const std::string out = get(cfg.get(), "output.dir").get<std::string>();
    if (o.dry_run) {
      std::printf("dry run: config valid, output dir %s\n", out.c_str());
      return 0;
    }
    check(toast_write_effective_config(cfg.get(), out.c_str()), "writing effective config");
    if (collect->parsed()) {
      const std::string p = (fs::path(out) / "dataset.csv").string();
      check(toast_collect(cfg.get(), p.c_str()), "collect");
      std::printf("%s\n", p.c_str());
    } else if (train->parsed()) {
      const std::string data = (fs::path(out) / "dataset.csv").string();
      toast_model* raw = nullptr;
      double rmse = 0.0;
      check(toast_train(cfg.get(), fs::exists(data) ? data.c_str() : nullptr, &raw, &rmse),
            "train");
      ModelPtr model(raw, toast_model_free);
      const std::string p = (fs::path(out) / "model.toastnn").string();
      check(toast_model_save(model.get(), p.c_str()), "saving model");
      std::printf("validation normalized RMSE %.6g\n%s\n", rmse, p.c_str());
    } else if (run->parsed()) {
      ModelPtr model = obtain(cfg.get());
      const std::string mode = get(cfg.get(), "controller.mode").get<std::string>();
      std::printf("mode,seed,failed,rms_tracking_error,chattering,max_task_error,recovery_time\n");
      for (const auto s : get(cfg.get(), "episode.seeds").get<std::vector<std::uint64_t>>()) {
        toast_metrics m{};
        check(toast_run(cfg.get(), model.get(), s, out.c_str(), &m), "run");
        std::printf("%s,%llu,%d,%.6g,%.6g,%.6g,%.6g\n", mode.c_str(),
                    static_cast<unsigned long long>(s), m.failed, m.rms_tracking_error,
                    m.chattering, m.max_task_error, m.recovery_time);
      }
    } else if (cmp->parsed()) {
      ModelPtr model = obtain(cfg.get());
      check(toast_compare(cfg.get(), model.get(), out.c_str()), "compare");
      std::printf("%s\n", (fs::path(out) / "summary.txt").string().c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.what());
    return 1 + static_cast<int>(f.status) % 100;
  }
  return 0;
}
