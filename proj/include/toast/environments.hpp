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

// Ground-truth simulators, disturbances and dataset collection.
//
// Conventions
//   pendulum  x = [theta, theta_dot], u = [torque]; theta = 0 is upright.
//   cartpole  x = [p, p_dot, theta, theta_dot], u = [force]; theta = 0 upright.
//   vehicle   x = [X, Y, psi, vx, vy, r, delta], u = [steer_rate, accel];
//             dynamic bicycle, linear tires clipped at mu * axle load.
//   linear    x = [x], u = [u]; xdot = -a x + b u. Used for exact-fit tests.

#ifndef TOAST_ENVIRONMENTS_HPP_
#define TOAST_ENVIRONMENTS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "toast/common.hpp"
#include "toast/nn_dynamics.hpp"
#include "toast/training.hpp"

namespace toast {

enum class EnvId { kPendulum, kCartpole, kVehicle, kLinear };

struct EnvSpec {
  EnvId id = EnvId::kPendulum;
  std::string name;
  int n_x = 0;
  int n_u = 0;
  std::vector<std::string> state_names;   // with units, e.g. "theta[rad]"
  std::vector<std::string> action_names;
  std::vector<StateFeature> features;
  Bounds bounds;
  std::map<std::string, double> params;
  double dt = 0.01;  // RK4 step
  Vec initial_state;
  // Box of initial states used by dataset collection.
  Vec explore_low;
  Vec explore_high;

  std::vector<bool> angle_mask() const { return toast::angle_mask(features); }
  double param(const std::string& key) const;
  void validate() const;
};

EnvId parse_env_id(const std::string& id);
std::string env_name(EnvId id);

// Default parameters for an environment, then the named overrides applied.
// Unknown override keys are rejected.
EnvSpec make_env(const std::string& id, const std::map<std::string, double>& overrides = {});

// Continuous-time derivative under the total (clamped + disturbance) input.
Vec env_derivative(const EnvSpec& spec, const Vec& state, const Vec& input);

// One RK4 integration step of length `dt` without wrapping or clipping.
Vec rk4_step(const EnvSpec& spec, const Vec& state, const Vec& input, double dt);

// Clamps the action, adds the additive disturbance (size n_u), integrates
// one RK4 step of spec.dt and wraps angles to (-pi, pi].
Vec step(const EnvSpec& spec, const Vec& state, const Vec& action, const Vec& disturbance);

// `count` consecutive calls to step() with the same inputs.
Vec advance(const EnvSpec& spec, const Vec& state, const Vec& action, const Vec& disturbance,
            int count);

// Pendulum mechanical energy, zero at the pivot height.
double pendulum_energy(const EnvSpec& spec, const Vec& state);

// Front and rear lateral tire forces of the vehicle at `state`.
std::pair<double, double> vehicle_tire_forces(const EnvSpec& spec, const Vec& state);

// ---------------------------------------------------------------------------
// Disturbances

enum class DisturbanceKind { kStep, kPulseTrain, kParameterShift };

DisturbanceKind parse_disturbance_kind(const std::string& s);
std::string disturbance_kind_name(DisturbanceKind k);

struct Disturbance {
  DisturbanceKind kind = DisturbanceKind::kStep;
  int channel = 0;          // action channel for additive kinds
  std::string parameter;    // parameter name for kParameterShift
  double magnitude = 0.0;   // additive value, or the overriding parameter value
  std::string units;
  double t_start = 0.0;
  double t_end = 0.0;
  double period = 1.0;      // pulse train only
  double duty = 0.5;        // pulse train only, fraction of the period that is on
  double onset_jitter = 0.0;  // window shifted by U[0, jitter) drawn from the seed
  std::uint64_t rng_seed = 0;

  void validate(const EnvSpec& env) const;
  // Copy with the seeded onset shift applied.
  Disturbance realize(std::uint64_t seed) const;
};

// Value of the disturbance at time t: 0 outside [t_start, t_end).
double inject(const Disturbance& d, double t);

// True inside the window (and inside a pulse for pulse trains).
bool active(const Disturbance& d, double t);

// ---------------------------------------------------------------------------
// Dataset collection

enum class ExplorationPolicy { kUniform, kSine };

ExplorationPolicy parse_policy(const std::string& s);

struct CollectOptions {
  ExplorationPolicy policy = ExplorationPolicy::kUniform;
  int episodes = 50;
  int steps = 200;              // transitions per episode at the control rate
  int steps_per_action = 1;     // simulator steps per control step
  int history = 1;
  std::uint64_t rng_seed = 0;
};

// Rolls out the simulator under the exploration policy and emits one sample
// per control step once H previous steps exist.
std::vector<TransitionSample> collect_dataset(const EnvSpec& spec, const CollectOptions& opts);

// Dataset CSV (inputs then targets, %.17g).
void write_dataset_csv(const std::vector<TransitionSample>& data, const std::string& path);
std::vector<TransitionSample> read_dataset_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Episode log

struct EpisodeRecord {
  double time = 0.0;
  Vec state;        // state at the start of the step
  Vec feedforward;
  Vec feedback;
  Vec command;      // feedforward + feedback, before clamping
  Vec applied;      // after clamping
  bool clamped = false;
  Vec disturbance;  // additive value per action channel
  double parameter = 0.0;  // active parameter override, 0 when none
  double cost = 0.0;
  double deviation = 0.0;  // |x - nominal| after the step
  double task_error = 0.0;  // task-level error after the step
  bool replanned = false;
};

struct EpisodeLog {
  std::vector<std::string> state_names;
  std::vector<std::string> action_names;
  std::vector<EpisodeRecord> records;
  std::uint64_t seed = 0;
  std::string mode;
  std::string config_hash;
  bool failed = false;
  std::string failure;

  std::string to_csv() const;
  void write_csv(const std::string& path) const;
};

}  // namespace toast

#endif  // TOAST_ENVIRONMENTS_HPP_
