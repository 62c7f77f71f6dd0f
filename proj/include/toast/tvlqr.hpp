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

// Time-varying LQR around the planner's nominal trajectory, built from the
// Jacobians of the same network the planner rolls out.
//
// In augmented mode the Riccati pass runs over
//   z_t = [x_t, x_{t-1}, ..., x_{t-H}, u_{t-1}, ..., u_{t-H}]
// so the history partials shape the gains, while only the x_t block is
// penalized.

#ifndef TOAST_TVLQR_HPP_
#define TOAST_TVLQR_HPP_

#include <cstdint>
#include <vector>

#include "toast/nn_dynamics.hpp"
#include "toast/smppi.hpp"

namespace toast {

struct LinearizationSeq {
  std::vector<Mat> a;
  std::vector<Mat> b;
  bool augmented = false;
  // Linearization points: T + 1 (augmented) states and T actions.
  std::vector<Vec> points;
  std::vector<Vec> actions;
  std::vector<bool> angle_mask;  // over the (augmented) state

  int horizon() const { return static_cast<int>(a.size()); }
};

struct TrackingCost {
  Mat q;
  Mat r;
  Mat q_terminal;

  // Diagonal weights on the physical state; zero on any history blocks when
  // `augmented_dim` exceeds the state dimension.
  static TrackingCost from_diagonals(const Vec& q_diag, const Vec& r_diag, const Vec& qf_diag,
                                     int augmented_dim);
  void validate() const;
};

struct GainSchedule {
  std::vector<Mat> gains;   // T matrices, n_u x n_z
  std::vector<Mat> values;  // P_0..P_T
  std::vector<Vec> nominal_states;   // T + 1, over z
  std::vector<Vec> nominal_actions;  // T
  std::vector<bool> angle_mask;
  bool augmented = false;
  Bounds bounds;
  double dt = 0.05;
  std::int64_t valid_from = 0;  // fast step index of the plan

  int horizon() const { return static_cast<int>(gains.size()); }
};

// Stacks x and the history window into z (unfilled slots are zero).
Vec augmented_state(const Vec& state, const HistoryWindow& history);

// Evaluates the network Jacobians at each nominal knot, rolling the history
// forward along the nominal trajectory.
LinearizationSeq linearize_along(const DynamicsModel& model, const LiftedPlan& plan,
                                 const HistoryWindow& start_history, bool augmented);

// P_T = Q_f; K_t = (R + B'PB)^-1 B'PA; P_t = Q + K'RK + (A-BK)'P(A-BK),
// symmetrized each step.
GainSchedule riccati_backward(const LinearizationSeq& lin, const TrackingCost& cost);

// Convenience: linearize + Riccati + metadata.
GainSchedule synthesize_schedule(const DynamicsModel& model, const LiftedPlan& plan,
                                 const HistoryWindow& start_history, const TrackingCost& cost,
                                 bool augmented, const Bounds& bounds);

// clamp(feedforward - K_t * wrap(measured - nominal_t)).
Vec feedback_action(const GainSchedule& schedule, int t_local, const Vec& measured,
                    const Vec& feedforward);

// Same, with explicit gain and nominal (used between knots).
Vec feedback_action(const GainSchedule& schedule, const Mat& gain, const Vec& nominal,
                    const Vec& measured, const Vec& feedforward);

struct GainSample {
  Mat gain;
  Vec nominal_state;
  Vec nominal_action;
  int knot = 0;
};

// Zero-order hold on the gain, linear interpolation of the nominal state and
// action between knots. offset in [0, T * dt).
GainSample interpolate_gain(const GainSchedule& schedule, double offset);

// Integer form: knot index plus fraction step / steps_per_knot.
GainSample interpolate_gain(const GainSchedule& schedule, int knot, int step, int steps_per_knot);

}  // namespace toast

#endif  // TOAST_TVLQR_HPP_
