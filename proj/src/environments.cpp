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

#include "toast/environments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "toast/csv.hpp"

namespace toast {

// ---------------------------------------------------------------------------
// Specs

double EnvSpec::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw ContractError("environment '" + name + "' has no parameter " + key);
  return it->second;
}

void EnvSpec::validate() const {
  require(n_x > 0 && n_u > 0, "environment dimensions must be positive");
  require(dt > 0.0, "environment dt must be positive");
  require_dim(static_cast<Eigen::Index>(features.size()), n_x, "environment feature map");
  require_dim(static_cast<Eigen::Index>(state_names.size()), n_x, "state names");
  require_dim(static_cast<Eigen::Index>(action_names.size()), n_u, "action names");
  require_dim(bounds.size(), n_u, "action bounds");
  bounds.validate("action bounds");
  require_dim(initial_state.size(), n_x, "initial state");
  require_dim(explore_low.size(), n_x, "exploration box");
  require_dim(explore_high.size(), n_x, "exploration box");
  for (const auto& [k, v] : params) {
    if (k.find("damping") != std::string::npos || k.find("friction") == 0) {
      require(v >= 0.0, "parameter " + k + " must be nonnegative");
    } else {
      require(v > 0.0, "parameter " + k + " must be positive");
    }
  }
}

EnvId parse_env_id(const std::string& id) {
  if (id == "pendulum") return EnvId::kPendulum;
  if (id == "cartpole") return EnvId::kCartpole;
  if (id == "vehicle") return EnvId::kVehicle;
  if (id == "linear") return EnvId::kLinear;
  throw ConfigError("unknown environment '" + id + "'");
}

std::string env_name(EnvId id) {
  switch (id) {
    case EnvId::kPendulum: return "pendulum";
    case EnvId::kCartpole: return "cartpole";
    case EnvId::kVehicle: return "vehicle";
    case EnvId::kLinear: return "linear";
  }
  return "?";
}

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// sin with an exact zero at +-pi.
double sin_exact(double a) {
  if (a > kPi / 2) return -std::sin(a - kPi);
  if (a < -kPi / 2) return -std::sin(a + kPi);
  return std::sin(a);
}

double cos_exact(double a) {
  if (a > kPi / 2) return -std::cos(a - kPi);
  if (a < -kPi / 2) return -std::cos(a + kPi);
  return std::cos(a);
}

}  // namespace

EnvSpec make_env(const std::string& id, const std::map<std::string, double>& overrides) {
  EnvSpec s;
  s.id = parse_env_id(id);
  s.name = id;
  using F = StateFeature;
  switch (s.id) {
    case EnvId::kPendulum:
      s.n_x = 2;
      s.n_u = 1;
      s.state_names = {"theta[rad]", "theta_dot[rad/s]"};
      s.action_names = {"torque[N*m]"};
      s.features = {F::kAngle, F::kPlain};
      s.params = {{"mass", 1.0}, {"length", 1.0}, {"gravity", 9.81}, {"damping", 0.1},
                  {"torque_max", 5.0}};
      s.initial_state = vec({kPi, 0.0});
      s.explore_low = vec({-kPi, -8.0});
      s.explore_high = vec({kPi, 8.0});
      break;
    case EnvId::kCartpole:
      s.n_x = 4;
      s.n_u = 1;
      s.state_names = {"p[m]", "p_dot[m/s]", "theta[rad]", "theta_dot[rad/s]"};
      s.action_names = {"force[N]"};
      s.features = {F::kPlain, F::kPlain, F::kAngle, F::kPlain};
      s.params = {{"cart_mass", 1.0}, {"pole_mass", 0.1},  {"pole_half_length", 0.5},
                  {"gravity", 9.81},  {"damping", 0.0},    {"force_max", 10.0}};
      s.initial_state = vec({0.0, 0.0, 0.2, 0.0});
      s.explore_low = vec({-1.0, -1.5, -0.6, -2.0});
      s.explore_high = vec({1.0, 1.5, 0.6, 2.0});
      break;
    case EnvId::kVehicle:
      s.n_x = 7;
      s.n_u = 2;
      s.state_names = {"X[m]",      "Y[m]",  "psi[rad]",  "vx[m/s]",
                       "vy[m/s]",   "r[rad/s]", "delta[rad]"};
      s.action_names = {"steer_rate[rad/s]", "accel[m/s^2]"};
      s.features = {F::kDropped, F::kDropped, F::kAngle, F::kPlain,
                    F::kPlain,   F::kPlain,   F::kPlain};
      s.params = {{"mass", 1500.0},   {"yaw_inertia", 2500.0}, {"lf", 1.2},
                  {"lr", 1.3},        {"cf", 80000.0},         {"cr", 80000.0},
                  {"mu", 1.0},        {"gravity", 9.81},       {"steer_max", 0.5},
                  {"steer_rate_max", 1.5}, {"accel_max", 4.0}};
      s.initial_state = vec({0.0, 0.0, kPi / 2, 10.0, 0.0, 0.0, 0.0});
      s.explore_low = vec({-20.0, -20.0, -kPi, 4.0, -1.0, -1.0, -0.3});
      s.explore_high = vec({20.0, 20.0, kPi, 16.0, 1.0, 1.0, 0.3});
      break;
    case EnvId::kLinear:
      s.n_x = 1;
      s.n_u = 1;
      s.state_names = {"x[-]"};
      s.action_names = {"u[-]"};
      s.features = {F::kPlain};
      s.params = {{"decay", 0.2}, {"gain", 0.5}, {"input_max", 1.0}};
      s.initial_state = vec({0.0});
      s.explore_low = vec({-2.0});
      s.explore_high = vec({2.0});
      break;
  }
  for (const auto& [k, v] : overrides) {
    if (!s.params.count(k)) {
      throw ConfigError("unknown parameter '" + k + "' for environment '" + id + "'");
    }
    s.params[k] = v;
  }
  switch (s.id) {
    case EnvId::kPendulum:
      s.bounds = {vec({-s.param("torque_max")}), vec({s.param("torque_max")})};
      break;
    case EnvId::kCartpole:
      s.bounds = {vec({-s.param("force_max")}), vec({s.param("force_max")})};
      break;
    case EnvId::kVehicle:
      s.bounds = {vec({-s.param("steer_rate_max"), -s.param("accel_max")}),
                  vec({s.param("steer_rate_max"), s.param("accel_max")})};
      break;
    case EnvId::kLinear:
      s.bounds = {vec({-s.param("input_max")}), vec({s.param("input_max")})};
      break;
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Dynamics

namespace {

Vec pendulum_rhs(const EnvSpec& s, const Vec& x, const Vec& u) {
  const double m = s.param("mass"), l = s.param("length"), g = s.param("gravity");
  const double b = s.param("damping");
  Vec d(2);
  d[0] = x[1];
  // m l^2 theta_dd = m g l sin(theta) - b theta_d + tau  (theta = 0 upright)
  d[1] = (m * g * l * sin_exact(x[0]) - b * x[1] + u[0]) / (m * l * l);
  return d;
}

Vec cartpole_rhs(const EnvSpec& s, const Vec& x, const Vec& u) {
  const double mc = s.param("cart_mass"), mp = s.param("pole_mass");
  const double l = s.param("pole_half_length"), g = s.param("gravity");
  const double b = s.param("damping");
  const double total = mc + mp;
  const double st = sin_exact(x[2]), ct = cos_exact(x[2]);
  const double force = u[0] - b * x[1];
  const double temp = (force + mp * l * x[3] * x[3] * st) / total;
  const double theta_acc = (g * st - ct * temp) / (l * (4.0 / 3.0 - mp * ct * ct / total));
  const double p_acc = temp - mp * l * theta_acc * ct / total;
  Vec d(4);
  d << x[1], p_acc, x[3], theta_acc;
  return d;
}

struct TireForces {
  double front;
  double rear;
};

TireForces tires(const EnvSpec& s, const Vec& x) {
  const double m = s.param("mass"), g = s.param("gravity");
  const double lf = s.param("lf"), lr = s.param("lr"), mu = s.param("mu");
  const double vx = std::max(x[3], 1.0);
  const double vy = x[4], r = x[5], delta = x[6];
  const double alpha_f = delta - std::atan2(vy + lf * r, vx);
  const double alpha_r = -std::atan2(vy - lr * r, vx);
  const double fz_f = m * g * lr / (lf + lr);
  const double fz_r = m * g * lf / (lf + lr);
  const double lim_f = mu * fz_f, lim_r = mu * fz_r;
  return {std::clamp(s.param("cf") * alpha_f, -lim_f, lim_f),
          std::clamp(s.param("cr") * alpha_r, -lim_r, lim_r)};
}

Vec vehicle_rhs(const EnvSpec& s, const Vec& x, const Vec& u) {
  const double m = s.param("mass"), iz = s.param("yaw_inertia");
  const double lf = s.param("lf"), lr = s.param("lr"), steer_max = s.param("steer_max");
  const double psi = x[2], vx = x[3], vy = x[4], r = x[5], delta = x[6];
  const TireForces f = tires(s, x);
  double steer_rate = u[0];
  if ((delta >= steer_max && steer_rate > 0.0) || (delta <= -steer_max && steer_rate < 0.0)) {
    steer_rate = 0.0;
  }
  Vec d(7);
  d[0] = vx * std::cos(psi) - vy * std::sin(psi);
  d[1] = vx * std::sin(psi) + vy * std::cos(psi);
  d[2] = r;
  d[3] = u[1] - f.front * std::sin(delta) / m + vy * r;
  d[4] = (f.front * std::cos(delta) + f.rear) / m - vx * r;
  d[5] = (lf * f.front * std::cos(delta) - lr * f.rear) / iz;
  d[6] = steer_rate;
  return d;
}

}  // namespace

Vec env_derivative(const EnvSpec& spec, const Vec& state, const Vec& input) {
  switch (spec.id) {
    case EnvId::kPendulum: return pendulum_rhs(spec, state, input);
    case EnvId::kCartpole: return cartpole_rhs(spec, state, input);
    case EnvId::kVehicle: return vehicle_rhs(spec, state, input);
    case EnvId::kLinear: {
      Vec d(1);
      d[0] = -spec.param("decay") * state[0] + spec.param("gain") * input[0];
      return d;
    }
  }
  throw ContractError("unknown environment");
}

Vec rk4_step(const EnvSpec& spec, const Vec& x, const Vec& u, double dt) {
  const Vec k1 = env_derivative(spec, x, u);
  const Vec k2 = env_derivative(spec, x + 0.5 * dt * k1, u);
  const Vec k3 = env_derivative(spec, x + 0.5 * dt * k2, u);
  const Vec k4 = env_derivative(spec, x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec step(const EnvSpec& spec, const Vec& state, const Vec& action, const Vec& disturbance) {
  require_dim(state.size(), spec.n_x, "state");
  require_dim(action.size(), spec.n_u, "action");
  require_dim(disturbance.size(), spec.n_u, "disturbance");
  if (!state.allFinite() || !action.allFinite() || !disturbance.allFinite()) {
    throw ContractError("step: non-finite input");
  }
  const Vec input = spec.bounds.clamp(action) + disturbance;
  Vec next = rk4_step(spec, state, input, spec.dt);
  for (int i = 0; i < spec.n_x; ++i) {
    if (spec.features[i] == StateFeature::kAngle) next[i] = wrap_angle(next[i]);
  }
  if (spec.id == EnvId::kVehicle) {
    const double m = spec.param("steer_max");
    next[6] = std::clamp(next[6], -m, m);
  }
  return next;
}

Vec advance(const EnvSpec& spec, const Vec& state, const Vec& action, const Vec& disturbance,
            int count) {
  Vec x = state;
  for (int i = 0; i < count; ++i) x = step(spec, x, action, disturbance);
  return x;
}

double pendulum_energy(const EnvSpec& spec, const Vec& state) {
  const double m = spec.param("mass"), l = spec.param("length"), g = spec.param("gravity");
  return 0.5 * m * l * l * state[1] * state[1] + m * g * l * std::cos(state[0]);
}

std::pair<double, double> vehicle_tire_forces(const EnvSpec& spec, const Vec& state) {
  const TireForces f = tires(spec, state);
  return {f.front, f.rear};
}

// ---------------------------------------------------------------------------
// Disturbances

DisturbanceKind parse_disturbance_kind(const std::string& s) {
  if (s == "step") return DisturbanceKind::kStep;
  if (s == "pulse_train") return DisturbanceKind::kPulseTrain;
  if (s == "parameter_shift") return DisturbanceKind::kParameterShift;
  throw ConfigError("unknown disturbance kind '" + s + "'");
}

std::string disturbance_kind_name(DisturbanceKind k) {
  switch (k) {
    case DisturbanceKind::kStep: return "step";
    case DisturbanceKind::kPulseTrain: return "pulse_train";
    case DisturbanceKind::kParameterShift: return "parameter_shift";
  }
  return "?";
}

void Disturbance::validate(const EnvSpec& env) const {
  require(t_start < t_end, "disturbance window needs t_start < t_end");
  require(onset_jitter >= 0.0, "disturbance onset jitter must be nonnegative");
  if (kind == DisturbanceKind::kParameterShift) {
    require(env.params.count(parameter) > 0,
            "disturbance parameter '" + parameter + "' unknown for " + env.name);
  } else {
    require(channel >= 0 && channel < env.n_u,
            "disturbance channel " + std::to_string(channel) + " invalid for " + env.name);
  }
  if (kind == DisturbanceKind::kPulseTrain) {
    require(period > 0.0, "pulse train period must be positive");
    require(duty > 0.0 && duty <= 1.0, "pulse train duty must lie in (0, 1]");
  }
}

Disturbance Disturbance::realize(std::uint64_t seed) const {
  Disturbance d = *this;
  if (onset_jitter > 0.0) {
    std::mt19937_64 rng(rng_seed ^ (seed * 0x9E3779B97F4A7C15ULL));
    const double shift = std::uniform_real_distribution<double>(0.0, onset_jitter)(rng);
    d.t_start += shift;
    d.t_end += shift;
  }
  return d;
}

bool active(const Disturbance& d, double t) {
  if (t < d.t_start || t >= d.t_end) return false;
  if (d.kind == DisturbanceKind::kPulseTrain) {
    return std::fmod(t - d.t_start, d.period) < d.duty * d.period;
  }
  return true;
}

double inject(const Disturbance& d, double t) { return active(d, t) ? d.magnitude : 0.0; }

// ---------------------------------------------------------------------------
// Dataset collection

ExplorationPolicy parse_policy(const std::string& s) {
  if (s == "uniform") return ExplorationPolicy::kUniform;
  if (s == "sine") return ExplorationPolicy::kSine;
  throw ConfigError("unknown exploration policy '" + s + "'");
}

std::vector<TransitionSample> collect_dataset(const EnvSpec& spec, const CollectOptions& opts) {
  spec.validate();
  require(opts.episodes > 0 && opts.steps > 0, "collect_dataset: counts must be positive");
  require(opts.steps_per_action > 0, "collect_dataset: steps_per_action must be positive");
  require(opts.history >= 0, "collect_dataset: history must be nonnegative");
  const int H = opts.history;
  const int n_x = spec.n_x, n_u = spec.n_u;
  const double control_dt = spec.dt * opts.steps_per_action;
  const auto mask = spec.angle_mask();
  std::mt19937_64 rng(opts.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec zero_d = Vec::Zero(n_u);

  std::vector<TransitionSample> data;
  data.reserve(static_cast<size_t>(opts.episodes) * std::max(0, opts.steps - H));
  for (int ep = 0; ep < opts.episodes; ++ep) {
    Vec x(n_x);
    for (int i = 0; i < n_x; ++i) {
      x[i] = spec.explore_low[i] + unit(rng) * (spec.explore_high[i] - spec.explore_low[i]);
    }
    Vec freq(n_u), phase(n_u);
    for (int j = 0; j < n_u; ++j) {
      freq[j] = 0.1 + 1.9 * unit(rng);  // Hz
      phase[j] = 2.0 * kPi * unit(rng);
    }
    std::vector<Vec> states{x};
    std::vector<Vec> actions;
    for (int k = 0; k < opts.steps; ++k) {
      Vec u(n_u);
      for (int j = 0; j < n_u; ++j) {
        const double lo = spec.bounds.lower[j], hi = spec.bounds.upper[j];
        if (opts.policy == ExplorationPolicy::kUniform) {
          u[j] = lo + unit(rng) * (hi - lo);
        } else {
          const double s = std::sin(2.0 * kPi * freq[j] * k * control_dt + phase[j]);
          u[j] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * s;
        }
      }
      x = advance(spec, x, u, zero_d, opts.steps_per_action);
      actions.push_back(u);
      states.push_back(x);
    }
    for (int k = H; k < opts.steps; ++k) {
      TransitionSample s;
      s.input.resize((n_x + n_u) * (H + 1));
      for (int lag = 0; lag <= H; ++lag) {
        s.input.segment(lag * n_x, n_x) = states[k - lag];
        s.input.segment(n_x * (H + 1) + lag * n_u, n_u) = actions[k - lag];
      }
      s.target = angle_aware_diff(states[k + 1], states[k], mask);
      data.push_back(std::move(s));
    }
  }
  return data;
}

void write_dataset_csv(const std::vector<TransitionSample>& data, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  if (data.empty()) return;
  const Eigen::Index ni = data.front().input.size(), nt = data.front().target.size();
  for (Eigen::Index i = 0; i < ni; ++i) f << (i ? "," : "") << "in" << i;
  for (Eigen::Index i = 0; i < nt; ++i) f << ",target" << i;
  f << "\n";
  for (const auto& s : data) {
    for (Eigen::Index i = 0; i < ni; ++i) f << (i ? "," : "") << fmt_double(s.input[i]);
    for (Eigen::Index i = 0; i < nt; ++i) f << "," << fmt_double(s.target[i]);
    f << "\n";
  }
  if (!f) throw IoError("write to '" + path + "' failed");
}

std::vector<TransitionSample> read_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(f, line)) return {};
  Eigen::Index ni = 0, nt = 0;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell.rfind("in", 0) == 0) ++ni;
      else if (cell.rfind("target", 0) == 0) ++nt;
      else throw FormatError("unexpected dataset column '" + cell + "'");
    }
  }
  std::vector<TransitionSample> data;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    TransitionSample s{Vec(ni), Vec(nt)};
    Eigen::Index c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= ni + nt) throw FormatError("dataset row has too many columns");
      const double v = std::stod(cell);
      if (c < ni) s.input[c] = v;
      else s.target[c - ni] = v;
      ++c;
    }
    if (c != ni + nt) throw FormatError("dataset row has too few columns");
    data.push_back(std::move(s));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Episode log

std::string EpisodeLog::to_csv() const {
  std::ostringstream o;
  o << "# time[s]; states:";
  for (const auto& n : state_names) o << " " << n;
  o << "; actions:";
  for (const auto& n : action_names) o << " " << n;
  o << "; ff/fb/cmd/applied in action units; seed=" << seed << "; mode=" << mode
    << "; config_hash=" << config_hash << "\n";
  auto bare = [](const std::string& n) { return n.substr(0, n.find('[')); };
  o << "time";
  for (const auto& n : state_names) o << "," << bare(n);
  for (const char* p : {"ff_", "fb_", "cmd_", "applied_", "dist_"}) {
    for (const auto& n : action_names) o << "," << p << bare(n);
  }
  o << ",clamped,parameter,cost,deviation,task_error,replanned\n";
  for (const auto& r : records) {
    o << fmt_double(r.time);
    auto put = [&o](const Vec& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) o << "," << fmt_double(v[i]);
    };
    put(r.state);
    put(r.feedforward);
    put(r.feedback);
    put(r.command);
    put(r.applied);
    put(r.disturbance);
    o << "," << (r.clamped ? 1 : 0) << "," << fmt_double(r.parameter) << ","
      << fmt_double(r.cost) << "," << fmt_double(r.deviation) << "," << fmt_double(r.task_error)
      << "," << (r.replanned ? 1 : 0) << "\n";
  }
  if (failed) o << "# failed: " << failure << "\n";
  return o.str();
}

void EpisodeLog::write_csv(const std::string& path) const { write_text_file(path, to_csv()); }

}  // namespace toast
