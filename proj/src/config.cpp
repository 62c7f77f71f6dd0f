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

#include "toast/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace toast {

using nlohmann::json;

ControllerMode parse_mode(const std::string& s) {
  if (s == "mppi_only") return ControllerMode::kMppiOnly;
  if (s == "zoh_mppi") return ControllerMode::kZohMppi;
  if (s == "toast") return ControllerMode::kToast;
  throw ConfigError("unknown controller mode '" + s + "' (expected mppi_only|zoh_mppi|toast)");
}

std::string mode_name(ControllerMode m) {
  switch (m) {
    case ControllerMode::kMppiOnly: return "mppi_only";
    case ControllerMode::kZohMppi: return "zoh_mppi";
    case ControllerMode::kToast: return "toast";
  }
  return "?";
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Defaults

json default_config_tree(const std::string& env_id) {
  json common = {
      {"model",
       {{"source", "train"},
        {"path", ""},
        {"hidden", {64, 64}},
        {"history", 1},
        {"collect", {{"policy", "uniform"}, {"episodes", 50}, {"steps", 200}, {"seed", 1}}},
        {"train",
         {{"batch_size", 256},
          {"epochs", 200},
          {"learning_rate", 1e-3},
          {"adam_beta1", 0.9},
          {"adam_beta2", 0.999},
          {"adam_epsilon", 1e-8},
          {"validation_fraction", 0.1},
          {"seed", 7},
          {"lr_final_factor", 0.1}}}}},
      {"controller",
       {{"mode", "toast"}, {"n_fast", 5}, {"fast_dt", 0.01}, {"compute_delay", false}}},
      {"episode", {{"duration", 10.0}, {"seeds", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}},
                   {"recovery_band", 0.1}}},
      {"compare", {{"modes", {"zoh_mppi", "toast"}}}},
      {"output", {{"dir", "out"}}},
  };
  json env;
  json planner = {{"samples", 256},       {"horizon", 30},   {"temperature", 1.0},
                  {"omega_action", 0.0},  {"omega_rate", 0.0}, {"lifted", true},
                  {"seed", 0},            {"workers", 1}};
  json cost, tracking, disturbances;
  if (env_id == "pendulum") {
    env = {{"id", "pendulum"}, {"params", json::object()}, {"initial_state", {kPi, 0.0}},
           {"substeps", 1}};
    planner["noise_stddev"] = {6.0};
    planner["action_noise_stddev"] = {1.0};
    planner["temperature"] = 0.05;
    planner["omega_action"] = 0.01;
    planner["omega_rate"] = 1e-4;
    cost = {{"type", "quadratic"}, {"goal", {0.0, 0.0}}, {"q", {5.0, 0.1}},
            {"q_terminal", {50.0, 1.0}}};
    tracking = {{"q", {100.0, 50.0}}, {"r", {0.01}}, {"q_terminal", {100.0, 50.0}},
                {"augmented", true}};
    disturbances = json::array({{{"kind", "step"},
                                 {"channel", 0},
                                 {"magnitude", 2.5},
                                 {"units", "N*m"},
                                 {"t_start", 5.0},
                                 {"t_end", 6.0}}});
  } else if (env_id == "cartpole") {
    env = {{"id", "cartpole"}, {"params", json::object()}, {"initial_state", {0.0, 0.0, 0.2, 0.0}},
           {"substeps", 1}};
    planner["samples"] = 512;
    planner["horizon"] = 20;
    planner["noise_stddev"] = {30.0};
    planner["action_noise_stddev"] = {2.0};
    planner["temperature"] = 0.05;
    planner["omega_action"] = 0.001;
    planner["omega_rate"] = 1e-5;
    cost = {{"type", "quadratic"}, {"goal", {0.0, 0.0, 0.0, 0.0}}, {"q", {1.0, 0.5, 10.0, 0.5}},
            {"q_terminal", {10.0, 5.0, 100.0, 5.0}}};
    tracking = {{"q", {1.0, 0.1, 10.0, 0.1}}, {"r", {0.01}}, {"q_terminal", {1.0, 0.1, 10.0, 0.1}},
                {"augmented", true}};
    disturbances = json::array({{{"kind", "pulse_train"},
                                 {"channel", 0},
                                 {"magnitude", 4.0},
                                 {"units", "N"},
                                 {"t_start", 2.0},
                                 {"t_end", 8.0},
                                 {"period", 1.0},
                                 {"duty", 0.2}}});
    // Short episodes keep the samples near the balancing region.
    common["model"]["collect"]["episodes"] = 1000;
    common["model"]["collect"]["steps"] = 10;
  } else if (env_id == "vehicle") {
    env = {{"id", "vehicle"},
           {"params", json::object()},
           {"initial_state", {0.0, 0.0, kPi / 2, 9.0, 0.0, 0.0, 0.17}},
           {"substeps", 1}};
    planner["noise_stddev"] = {6.0, 30.0};
    planner["action_noise_stddev"] = {0.5, 2.0};
    planner["omega_action"] = 0.01;
    planner["omega_rate"] = 1e-4;
    cost = {{"type", "figure_eight"},
            {"radius", 15.0},
            {"spacing", 0.25},
            {"lateral", 2.0},
            {"heading", 5.0},
            {"speed", 0.5},
            {"target_speed", 9.0},
            {"lateral_velocity", 0.5},
            {"steer", 2.0},
            {"terminal_factor", 5.0},
            {"track_half_width", 2.5},
            {"off_track_penalty", 500.0}};
    tracking = {{"q", {10.0, 10.0, 10.0, 1.0, 10.0, 10.0, 1.0}},
                {"r", {1.0, 0.01}},
                {"q_terminal", {10.0, 10.0, 10.0, 1.0, 10.0, 10.0, 1.0}},
                {"augmented", true}};
    disturbances = json::array({{{"kind", "parameter_shift"},
                                 {"parameter", "mu"},
                                 {"magnitude", 0.6},
                                 {"units", "-"},
                                 {"t_start", 10.0},
                                 {"t_end", 1e9}}});
    common["episode"]["duration"] = 20.0;
    common["model"]["collect"]["episodes"] = 200;
    common["model"]["collect"]["steps"] = 100;
  } else if (env_id == "linear") {
    env = {{"id", "linear"}, {"params", json::object()}, {"initial_state", {0.0}}, {"substeps", 1}};
    planner["noise_stddev"] = {2.0};
    planner["action_noise_stddev"] = {0.3};
    planner["temperature"] = 0.1;
    cost = {{"type", "quadratic"}, {"goal", {1.0}}, {"q", {1.0}}, {"q_terminal", {10.0}}};
    tracking = {{"q", {1.0}}, {"r", {0.1}}, {"q_terminal", {1.0}}, {"augmented", true}};
    disturbances = json::array();
    common["model"]["hidden"] = json::array();
  } else {
    throw ConfigError("unknown environment '" + env_id + "'");
  }
  json doc = common;
  doc["env"] = env;
  doc["planner"] = planner;
  doc["cost"] = cost;
  doc["tracking"] = tracking;
  doc["disturbances"] = disturbances;
  return doc;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

// Deep merge that rejects keys the defaults do not know. Free-form maps
// ("env.params") and lists are replaced wholesale.
void merge_checked(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("config node '" + path + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& dst = base[it.key()];
    if (key == "env.params" || key == "disturbances") {
      dst = it.value();
    } else if (dst.is_object()) {
      merge_checked(dst, it.value(), key);
    } else {
      const bool num_ok = dst.is_number() && it.value().is_number();
      if (!num_ok && dst.type() != it.value().type() && !dst.is_array()) {
        throw ConfigError("config key '" + key + "' has the wrong type");
      }
      dst = it.value();
    }
  }
}

template <typename T>
T get(const json& node, const char* key, const std::string& path) {
  try {
    return node.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + path + "." + key + "': " + e.what());
  }
}

Vec get_vec(const json& node, const char* key, const std::string& path) {
  auto v = get<std::vector<double>>(node, key, path);
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_keys(const json& node, std::initializer_list<const char*> allowed,
                const std::string& path) {
  if (!node.is_object()) throw ConfigError("config node '" + path + "' must be an object");
  for (auto it = node.begin(); it != node.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown config key '" + path + "." + it.key() + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  std::string env_id = "pendulum";
  if (doc.contains("env") && doc["env"].contains("id")) {
    env_id = get<std::string>(doc["env"], "id", "env");
  }
  json tree = default_config_tree(env_id);
  merge_checked(tree, doc, "");

  ExperimentConfig c;
  c.tree = tree;

  // env
  const json& e = tree["env"];
  std::map<std::string, double> params;
  if (!e["params"].is_object()) throw ConfigError("config key 'env.params' must be an object");
  for (auto it = e["params"].begin(); it != e["params"].end(); ++it) {
    if (!it.value().is_number()) {
      throw ConfigError("config key 'env.params." + it.key() + "' must be a number");
    }
    params[it.key()] = it.value().get<double>();
  }
  c.env = make_env(env_id, params);
  c.env.initial_state = get_vec(e, "initial_state", "env");
  require_dim(c.env.initial_state.size(), c.env.n_x, "env.initial_state");

  // controller
  const json& ctl = tree["controller"];
  c.controller.mode = parse_mode(get<std::string>(ctl, "mode", "controller"));
  c.controller.n_fast = get<int>(ctl, "n_fast", "controller");
  c.controller.fast_dt = get<double>(ctl, "fast_dt", "controller");
  c.controller.compute_delay = get<bool>(ctl, "compute_delay", "controller");
  c.controller.substeps = get<int>(e, "substeps", "env");
  if (c.controller.n_fast < 1) throw ConfigError("controller.n_fast must be >= 1");
  if (!(c.controller.fast_dt > 0.0)) throw ConfigError("controller.fast_dt must be positive");
  if (c.controller.substeps < 1) throw ConfigError("env.substeps must be >= 1");
  c.env.dt = c.controller.fast_dt / c.controller.substeps;

  // model
  const json& m = tree["model"];
  const std::string source = get<std::string>(m, "source", "model");
  if (source != "train" && source != "load") {
    throw ConfigError("model.source must be 'train' or 'load'");
  }
  c.model.load = source == "load";
  c.model.path = get<std::string>(m, "path", "model");
  if (c.model.load && c.model.path.empty()) throw ConfigError("model.source 'load' needs model.path");
  c.model.spec.state_dim = c.env.n_x;
  c.model.spec.action_dim = c.env.n_u;
  c.model.spec.history = get<int>(m, "history", "model");
  c.model.spec.features = c.env.features;
  c.model.spec.hidden = get<std::vector<int>>(m, "hidden", "model");
  const json& col = m["collect"];
  check_keys(col, {"policy", "episodes", "steps", "seed"}, "model.collect");
  c.model.collect.policy = parse_policy(get<std::string>(col, "policy", "model.collect"));
  c.model.collect.episodes = get<int>(col, "episodes", "model.collect");
  c.model.collect.steps = get<int>(col, "steps", "model.collect");
  c.model.collect.rng_seed = get<std::uint64_t>(col, "seed", "model.collect");
  c.model.collect.history = c.model.spec.history;
  c.model.collect.steps_per_action = c.controller.n_fast * c.controller.substeps;
  const json& tr = m["train"];
  c.model.train.batch_size = get<int>(tr, "batch_size", "model.train");
  c.model.train.epochs = get<int>(tr, "epochs", "model.train");
  c.model.train.learning_rate = get<double>(tr, "learning_rate", "model.train");
  c.model.train.adam_beta1 = get<double>(tr, "adam_beta1", "model.train");
  c.model.train.adam_beta2 = get<double>(tr, "adam_beta2", "model.train");
  c.model.train.adam_epsilon = get<double>(tr, "adam_epsilon", "model.train");
  c.model.train.validation_fraction = get<double>(tr, "validation_fraction", "model.train");
  c.model.train.rng_seed = get<std::uint64_t>(tr, "seed", "model.train");
  c.model.train.lr_final_factor = get<double>(tr, "lr_final_factor", "model.train");
  try {
    c.model.spec.validate();
    c.model.train.validate();
  } catch (const ContractError& err) {
    throw ConfigError(std::string("model: ") + err.what());
  }

  // planner
  const json& p = tree["planner"];
  c.mppi.samples = get<int>(p, "samples", "planner");
  c.mppi.horizon = get<int>(p, "horizon", "planner");
  c.mppi.temperature = get<double>(p, "temperature", "planner");
  c.mppi.noise_stddev = get_vec(p, "noise_stddev", "planner");
  c.mppi.action_noise_stddev = get_vec(p, "action_noise_stddev", "planner");
  c.mppi.omega_action = get<double>(p, "omega_action", "planner");
  c.mppi.omega_rate = get<double>(p, "omega_rate", "planner");
  c.mppi.lifted = get<bool>(p, "lifted", "planner");
  c.mppi.rng_seed = get<std::uint64_t>(p, "seed", "planner");
  c.mppi.workers = get<int>(p, "workers", "planner");
  c.mppi.bounds = c.env.bounds;
  c.mppi.dt = c.controller.plan_dt();
  try {
    c.mppi.validate();
  } catch (const ContractError& err) {
    throw ConfigError(std::string("planner: ") + err.what());
  }

  // cost
  const json& cost = tree["cost"];
  const std::string type = get<std::string>(cost, "type", "cost");
  if (type == "quadratic") {
    check_keys(cost, {"type", "goal", "q", "q_terminal"}, "cost");
    require_dim(get_vec(cost, "goal", "cost").size(), c.env.n_x, "cost.goal");
    require_dim(get_vec(cost, "q", "cost").size(), c.env.n_x, "cost.q");
    require_dim(get_vec(cost, "q_terminal", "cost").size(), c.env.n_x, "cost.q_terminal");
  } else if (type == "figure_eight") {
    if (c.env.id != EnvId::kVehicle) throw ConfigError("figure_eight cost needs the vehicle env");
  } else {
    throw ConfigError("unknown cost type '" + type + "'");
  }

  // tracking
  const json& tk = tree["tracking"];
  c.tracking.q = get_vec(tk, "q", "tracking");
  c.tracking.r = get_vec(tk, "r", "tracking");
  c.tracking.q_terminal = get_vec(tk, "q_terminal", "tracking");
  c.tracking.augmented = get<bool>(tk, "augmented", "tracking");
  require_dim(c.tracking.q.size(), c.env.n_x, "tracking.q");
  require_dim(c.tracking.q_terminal.size(), c.env.n_x, "tracking.q_terminal");
  require_dim(c.tracking.r.size(), c.env.n_u, "tracking.r");
  if ((c.tracking.r.array() <= 0.0).any()) throw ConfigError("tracking.r must be positive");
  if ((c.tracking.q.array() < 0.0).any() || (c.tracking.q_terminal.array() < 0.0).any()) {
    throw ConfigError("tracking.q must be nonnegative");
  }
  if (c.tracking.augmented && c.model.spec.history < 1) {
    throw ConfigError("tracking.augmented needs model.history >= 1");
  }

  // disturbances
  if (!tree["disturbances"].is_array()) throw ConfigError("'disturbances' must be a list");
  int idx = 0;
  for (const json& d : tree["disturbances"]) {
    const std::string path = "disturbances[" + std::to_string(idx++) + "]";
    check_keys(d,
               {"kind", "channel", "parameter", "magnitude", "units", "t_start", "t_end", "period",
                "duty", "onset_jitter", "seed"},
               path);
    Disturbance dist;
    dist.kind = parse_disturbance_kind(get<std::string>(d, "kind", path));
    dist.channel = d.value("channel", 0);
    dist.parameter = d.value("parameter", std::string());
    dist.magnitude = get<double>(d, "magnitude", path);
    dist.units = d.value("units", std::string());
    dist.t_start = get<double>(d, "t_start", path);
    dist.t_end = get<double>(d, "t_end", path);
    dist.period = d.value("period", 1.0);
    dist.duty = d.value("duty", 0.5);
    dist.onset_jitter = d.value("onset_jitter", 0.0);
    dist.rng_seed = d.value("seed", std::uint64_t{0});
    try {
      dist.validate(c.env);
    } catch (const ContractError& err) {
      throw ConfigError(path + ": " + err.what());
    }
    c.disturbances.push_back(dist);
  }

  // episode, compare, output
  const json& ep = tree["episode"];
  c.duration = get<double>(ep, "duration", "episode");
  c.seeds = get<std::vector<std::uint64_t>>(ep, "seeds", "episode");
  c.recovery_band = get<double>(ep, "recovery_band", "episode");
  if (!(c.duration > 0.0)) throw ConfigError("episode.duration must be positive");
  if (c.seeds.empty()) throw ConfigError("episode.seeds must not be empty");
  const double steps = c.duration / c.controller.fast_dt;
  if (std::abs(steps - std::round(steps)) > 1e-9 * steps) {
    throw ConfigError("episode.duration must be a whole number of fast steps");
  }
  for (const auto& s : get<std::vector<std::string>>(tree["compare"], "modes", "compare")) {
    c.compare_modes.push_back(parse_mode(s));
  }
  if (c.compare_modes.empty()) throw ConfigError("compare.modes must not be empty");
  c.output_dir = get<std::string>(tree["output"], "dir", "output");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(f, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig with_override(const ExperimentConfig& cfg, const std::string& dotted_key,
                               const json& value) {
  json tree = cfg.tree;
  json* node = &tree;
  std::stringstream ss(dotted_key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) throw ConfigError("unknown config key '" + dotted_key + "'");
    node = &(*node)[parts[i]];
  }
  if (!node->contains(parts.back())) throw ConfigError("unknown config key '" + dotted_key + "'");
  (*node)[parts.back()] = value;
  return parse_config(tree);
}

std::unique_ptr<TaskCost> ExperimentConfig::make_cost() const {
  const json& cost = tree["cost"];
  if (cost["type"] == "quadratic") {
    return std::make_unique<QuadraticCost>(get_vec(cost, "goal", "cost"), get_vec(cost, "q", "cost"),
                                           get_vec(cost, "q_terminal", "cost"), env.angle_mask());
  }
  FigureEightWeights w;
  w.lateral = cost.value("lateral", w.lateral);
  w.heading = cost.value("heading", w.heading);
  w.speed = cost.value("speed", w.speed);
  w.target_speed = cost.value("target_speed", w.target_speed);
  w.lateral_velocity = cost.value("lateral_velocity", w.lateral_velocity);
  w.steer = cost.value("steer", w.steer);
  w.terminal_factor = cost.value("terminal_factor", w.terminal_factor);
  w.track_half_width = cost.value("track_half_width", w.track_half_width);
  w.off_track_penalty = cost.value("off_track_penalty", w.off_track_penalty);
  return std::make_unique<FigureEightCost>(
      FigureEightPath(cost.value("radius", 15.0), cost.value("spacing", 0.25)), w);
}

TrackingCost ExperimentConfig::tracking_cost(int augmented_dim) const {
  return TrackingCost::from_diagonals(tracking.q, tracking.r, tracking.q_terminal, augmented_dim);
}

std::string ExperimentConfig::dump() const { return tree.dump(2); }

std::string ExperimentConfig::hash() const { return fnv1a_hex(tree.dump()); }

}  // namespace toast
