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

// Experiment configuration. A config file is a JSON document that is merged
// over per-environment defaults; keys absent from the defaults are rejected.

#ifndef TOAST_CONFIG_HPP_
#define TOAST_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "toast/environments.hpp"
#include "toast/smppi.hpp"
#include "toast/tasks.hpp"
#include "toast/training.hpp"
#include "toast/tvlqr.hpp"

namespace toast {

enum class ControllerMode { kMppiOnly, kZohMppi, kToast };

ControllerMode parse_mode(const std::string& s);
std::string mode_name(ControllerMode m);

struct ModelSource {
  bool load = false;  // false: train fresh
  std::string path;
  ModelSpec spec;
  CollectOptions collect;
  TrainConfig train;
};

struct TrackingConfig {
  Vec q;
  Vec r;
  Vec q_terminal;
  bool augmented = true;
};

struct ControllerConfig {
  ControllerMode mode = ControllerMode::kToast;
  int n_fast = 5;
  double fast_dt = 0.01;
  int substeps = 1;  // simulator steps per fast step
  bool compute_delay = false;

  double plan_dt() const { return fast_dt * n_fast; }
};

struct ExperimentConfig {
  nlohmann::json tree;  // effective (merged) document

  EnvSpec env;
  ModelSource model;
  MppiConfig mppi;
  TrackingConfig tracking;
  ControllerConfig controller;
  std::vector<Disturbance> disturbances;
  double duration = 10.0;
  std::vector<std::uint64_t> seeds;
  double recovery_band = 0.1;
  std::vector<ControllerMode> compare_modes;
  std::string output_dir;

  // Fresh task cost for one episode.
  std::unique_ptr<TaskCost> make_cost() const;
  TrackingCost tracking_cost(int augmented_dim) const;

  std::string hash() const;
  std::string dump() const;  // pretty-printed effective config
};

// Default document for an environment id.
nlohmann::json default_config_tree(const std::string& env_id);

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

// Re-parses after editing a single dotted key, e.g. "controller.mode".
ExperimentConfig with_override(const ExperimentConfig& cfg, const std::string& dotted_key,
                               const nlohmann::json& value);

// FNV-1a 64-bit, hex.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace toast

#endif  // TOAST_CONFIG_HPP_
