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

#include "toast/tvlqr.hpp"

#include <cmath>

namespace toast {

Vec augmented_state(const Vec& state, const HistoryWindow& history) {
  const int H = history.capacity();
  const int n_x = static_cast<int>(state.size());
  const int n_u = history.action_dim();
  Vec z = Vec::Zero(n_x * (H + 1) + n_u * H);
  z.head(n_x) = state;
  for (int lag = 1; lag <= history.filled(); ++lag) {
    z.segment(lag * n_x, n_x) = history.state(lag);
    z.segment(n_x * (H + 1) + (lag - 1) * n_u, n_u) = history.action(lag);
  }
  return z;
}

namespace {

std::vector<bool> augmented_mask(const std::vector<bool>& state_mask, int H, int n_u) {
  std::vector<bool> m;
  for (int lag = 0; lag <= H; ++lag) m.insert(m.end(), state_mask.begin(), state_mask.end());
  m.insert(m.end(), static_cast<size_t>(n_u * H), false);
  return m;
}

}  // namespace

LinearizationSeq linearize_along(const DynamicsModel& model, const LiftedPlan& plan,
                                 const HistoryWindow& start_history, bool augmented) {
  const int T = plan.horizon();
  require(plan.nominal_states.rows() == T + 1 && plan.nominal_states.cols() == model.state_dim(),
          "plan nominal states must be (T + 1) x n_x");
  require(plan.nominal_states.allFinite(), "plan nominal states must be finite");
  if (augmented) require(model.history_len() >= 1, "augmented linearization needs history >= 1");

  LinearizationSeq lin;
  lin.augmented = augmented;
  lin.angle_mask = augmented
                       ? augmented_mask(model.angle_mask(), model.history_len(), model.action_dim())
                       : model.angle_mask();
  HistoryWindow hist = start_history;
  for (int t = 0; t < T; ++t) {
    const Vec x = plan.nominal(t);
    const Vec u = plan.action(t);
    if (augmented) {
      AugmentedJacobian j = model.augmented_jacobian(x, u, hist);
      lin.a.push_back(std::move(j.a));
      lin.b.push_back(std::move(j.b));
      lin.points.push_back(augmented_state(x, hist));
    } else {
      auto [a, b] = model.jacobians(x, u, hist);
      lin.a.push_back(std::move(a));
      lin.b.push_back(std::move(b));
      lin.points.push_back(x);
    }
    lin.actions.push_back(u);
    if (model.history_len() > 0) hist.push(x, u);
  }
  const Vec x_end = plan.nominal(T);
  lin.points.push_back(augmented ? augmented_state(x_end, hist) : x_end);
  return lin;
}

TrackingCost TrackingCost::from_diagonals(const Vec& q_diag, const Vec& r_diag,
                                          const Vec& qf_diag, int augmented_dim) {
  const Eigen::Index n_x = q_diag.size();
  require_dim(qf_diag.size(), n_x, "terminal tracking weights");
  require(augmented_dim >= n_x, "augmented dimension smaller than state dimension");
  TrackingCost c;
  c.q = Mat::Zero(augmented_dim, augmented_dim);
  c.q_terminal = Mat::Zero(augmented_dim, augmented_dim);
  c.q.topLeftCorner(n_x, n_x) = q_diag.asDiagonal();
  c.q_terminal.topLeftCorner(n_x, n_x) = qf_diag.asDiagonal();
  c.r = r_diag.asDiagonal();
  return c;
}

void TrackingCost::validate() const {
  require(q.rows() == q.cols() && q_terminal.rows() == q.rows() && q_terminal.cols() == q.cols(),
          "tracking Q and Q_f must be square and the same size");
  require(r.rows() == r.cols() && r.rows() > 0, "tracking R must be square");
  require((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "tracking Q must be symmetric");
  require((q_terminal - q_terminal.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "tracking Q_f must be symmetric");
  require((r - r.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "tracking R must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(r);
  require(es.eigenvalues().minCoeff() > 0.0, "tracking R must be positive definite");
}

GainSchedule riccati_backward(const LinearizationSeq& lin, const TrackingCost& cost) {
  cost.validate();
  const int T = lin.horizon();
  require(T >= 1, "linearization sequence is empty");
  require(static_cast<int>(lin.b.size()) == T, "A and B sequences differ in length");
  const Eigen::Index n_z = lin.a.front().rows();
  const Eigen::Index n_u = lin.b.front().cols();
  require_dim(cost.q.rows(), n_z, "tracking Q");
  require_dim(cost.r.rows(), n_u, "tracking R");

  GainSchedule s;
  s.augmented = lin.augmented;
  s.angle_mask = lin.angle_mask;
  s.nominal_states = lin.points;
  s.nominal_actions = lin.actions;
  s.gains.resize(T);
  s.values.resize(T + 1);
  Mat P = cost.q_terminal;
  s.values[T] = P;
  for (int t = T - 1; t >= 0; --t) {
    const Mat& A = lin.a[t];
    const Mat& B = lin.b[t];
    require(A.allFinite() && B.allFinite(), "non-finite linearization at step " + std::to_string(t));
    const Mat PB = P * B;
    const Mat S = cost.r + B.transpose() * PB;
    Eigen::LLT<Mat> llt(S);
    if (llt.info() != Eigen::Success) {
      throw ContractError("R + B'PB is not positive definite at step " + std::to_string(t));
    }
    Mat K = llt.solve(PB.transpose() * A);
    const Mat Acl = A - B * K;
    P = cost.q + K.transpose() * cost.r * K + Acl.transpose() * P * Acl;
    P = 0.5 * (P + P.transpose());
    if (!K.allFinite() || !P.allFinite()) {
      throw ContractError("Riccati recursion produced non-finite values at step " +
                          std::to_string(t));
    }
    s.gains[t] = std::move(K);
    s.values[t] = P;
  }
  return s;
}

GainSchedule synthesize_schedule(const DynamicsModel& model, const LiftedPlan& plan,
                                 const HistoryWindow& start_history, const TrackingCost& cost,
                                 bool augmented, const Bounds& bounds) {
  GainSchedule s = riccati_backward(linearize_along(model, plan, start_history, augmented), cost);
  s.bounds = bounds;
  s.dt = plan.dt;
  return s;
}

Vec feedback_action(const GainSchedule& schedule, const Mat& gain, const Vec& nominal,
                    const Vec& measured, const Vec& feedforward) {
  require_dim(measured.size(), nominal.size(), "measured state");
  require_dim(feedforward.size(), gain.rows(), "feedforward action");
  const Vec dev = angle_aware_diff(measured, nominal, schedule.angle_mask);
  const Vec u = feedforward - gain * dev;
  return schedule.bounds.size() == u.size() ? schedule.bounds.clamp(u) : u;
}

Vec feedback_action(const GainSchedule& schedule, int t_local, const Vec& measured,
                    const Vec& feedforward) {
  if (t_local < 0 || t_local >= schedule.horizon()) {
    throw ContractError("schedule index " + std::to_string(t_local) + " outside [0, " +
                        std::to_string(schedule.horizon()) + ")");
  }
  return feedback_action(schedule, schedule.gains[t_local], schedule.nominal_states[t_local],
                         measured, feedforward);
}

namespace {

GainSample sample_between(const GainSchedule& s, int t, double alpha) {
  GainSample g;
  g.knot = t;
  g.gain = s.gains[t];
  const Vec& z0 = s.nominal_states[t];
  const Vec& z1 = s.nominal_states[t + 1];
  g.nominal_state = z0 + alpha * angle_aware_diff(z1, z0, s.angle_mask);
  const Vec& u0 = s.nominal_actions[t];
  const Vec& u1 = t + 1 < s.horizon() ? s.nominal_actions[t + 1] : u0;
  g.nominal_action = u0 + alpha * (u1 - u0);
  return g;
}

}  // namespace

GainSample interpolate_gain(const GainSchedule& schedule, double offset) {
  const int T = schedule.horizon();
  if (!(offset >= 0.0) || offset >= T * schedule.dt) {
    throw ContractError("gain offset " + std::to_string(offset) + " outside [0, T*dt)");
  }
  int t = static_cast<int>(std::floor(offset / schedule.dt));
  // Offsets that land on a knot up to rounding belong to that knot.
  if (t + 1 < T && std::abs(offset - (t + 1) * schedule.dt) <= 1e-12 * schedule.dt) ++t;
  t = std::min(t, T - 1);
  double alpha = (offset - t * schedule.dt) / schedule.dt;
  if (std::abs(alpha) <= 1e-12) alpha = 0.0;
  return sample_between(schedule, t, std::clamp(alpha, 0.0, 1.0));
}

GainSample interpolate_gain(const GainSchedule& schedule, int knot, int step,
                            int steps_per_knot) {
  require(steps_per_knot >= 1, "steps_per_knot must be >= 1");
  require(step >= 0 && step < steps_per_knot, "step must lie in [0, steps_per_knot)");
  if (knot < 0 || knot >= schedule.horizon()) {
    throw ContractError("knot index " + std::to_string(knot) + " outside schedule");
  }
  return sample_between(schedule, knot, static_cast<double>(step) / steps_per_knot);
}

}  // namespace toast
