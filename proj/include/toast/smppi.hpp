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

// Smooth MPPI: sampling-based trajectory optimization over action
// derivatives. The applied actions are the running integral of the
// derivative sequence, so sampled noise never reaches the actuator directly.
//
// Setting MppiConfig::lifted = false turns the same machinery into vanilla
// MPPI (perturb actions directly), used as the chattering baseline.

#ifndef TOAST_SMPPI_HPP_
#define TOAST_SMPPI_HPP_

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "toast/nn_dynamics.hpp"
#include "toast/tasks.hpp"

namespace toast {

struct MppiConfig {
  int samples = 256;
  int horizon = 30;
  double temperature = 1.0;
  Vec noise_stddev;         // per channel; derivative space when lifted
  Vec action_noise_stddev;  // per channel; action space, vanilla mode only
  double omega_action = 0.0;  // weight on |a_t|^2
  double omega_rate = 0.0;    // weight on |a_dot_t|^2
  Bounds bounds;
  double dt = 0.05;
  std::uint64_t rng_seed = 0;
  bool lifted = true;
  int workers = 1;  // rollout threads; results do not depend on this

  int action_dim() const { return static_cast<int>(bounds.size()); }
  void validate() const;
};

struct LiftedPlan {
  Mat derivative_seq;  // T x n_u
  Mat action_seq;      // T x n_u
  Mat nominal_states;  // (T + 1) x n_x
  Vec base_action;     // a_0, the action preceding action_seq row 0
  double dt = 0.05;
  bool lifted = true;
  double cost = std::numeric_limits<double>::quiet_NaN();

  int horizon() const { return static_cast<int>(derivative_seq.rows()); }
  Vec action(int t) const { return action_seq.row(t).transpose(); }
  Vec nominal(int t) const { return nominal_states.row(t).transpose(); }
};

// All-zero derivative plan holding `base_action`.
LiftedPlan zero_plan(int horizon, int n_x, const Vec& base_action, double dt, bool lifted = true);

// a_t = clamp(a_{t-1} + dt * d_t), a_{-1} = base. Without active bounds this
// is exactly base + dt * running sum of d.
Mat integrate_actions(const Vec& base, const Mat& derivatives, double dt, const Bounds& bounds);

struct RolloutResult {
  double cost = 0.0;
  Mat actions;  // T x n_u, realized (clamped)
  Mat states;   // (T + 1) x n_x; rows past a divergence are NaN
  bool diverged = false;
};

using Perturbation = Mat;  // T x n_u

// K perturbations; index 0 is always the zero perturbation.
std::vector<Perturbation> sample_perturbations(const MppiConfig& config, std::mt19937_64& rng);

// Single rollout from (state, history) under plan + perturbation. The cost is
//   sum_t [ running(x_{t+1}) + w1 |a_t|^2 + w2 |a_dot_t|^2 ] + terminal(x_T).
RolloutResult rollout(const DynamicsModel& model, const Vec& state, const HistoryWindow& history,
                      const LiftedPlan& plan, const Perturbation& perturbation,
                      const MppiConfig& config, const TaskCost& cost);

// Costs of all perturbations, evaluated as one batch per time step.
std::vector<double> rollout_costs(const DynamicsModel& model, const Vec& state,
                                  const HistoryWindow& history, const LiftedPlan& plan,
                                  const std::vector<Perturbation>& perturbations,
                                  const MppiConfig& config, const TaskCost& cost);

// w_k = exp(-(S_k - min S) / lambda) / eta; non-finite costs get weight 0.
Vec mppi_weights(const std::vector<double>& costs, double lambda);

// sum_k w_k eps_k.
Mat weighted_update(const std::vector<double>& costs, const std::vector<Perturbation>& perturbations,
                    double lambda);

// Drops step 0, appends a zero derivative and advances the base action.
LiftedPlan shift(const LiftedPlan& plan);

struct PlanDiagnostics {
  double min_sample_cost = 0.0;
  double effective_samples = 0.0;
  int diverged = 0;
};

// Stateful planner: owns the random stream so repeated calls draw fresh
// noise while staying reproducible under the seed.
class SmppiPlanner {
 public:
  explicit SmppiPlanner(MppiConfig config);

  const MppiConfig& config() const { return config_; }

  // One full iteration: sample, roll out, weighted update, re-integrate and
  // recompute the nominal trajectory with one noiseless rollout.
  LiftedPlan plan(const DynamicsModel& model, const Vec& state, const HistoryWindow& history,
                  const LiftedPlan& incumbent, const TaskCost& cost);

  const PlanDiagnostics& diagnostics() const { return diag_; }

 private:
  MppiConfig config_;
  std::mt19937_64 rng_;
  PlanDiagnostics diag_;
};

}  // namespace toast

#endif  // TOAST_SMPPI_HPP_
