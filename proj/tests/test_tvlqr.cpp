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

#include <doctest.h>

#include "test_util.hpp"
#include "toast/tvlqr.hpp"

using namespace toast;
using namespace toast::testing;

namespace {

LinearizationSeq constant_seq(const Mat& A, const Mat& B, int T) {
  LinearizationSeq lin;
  lin.a.assign(T, A);
  lin.b.assign(T, B);
  lin.points.assign(T + 1, Vec::Zero(A.rows()));
  lin.actions.assign(T, Vec::Zero(B.cols()));
  lin.angle_mask.assign(A.rows(), false);
  return lin;
}

TrackingCost plain_cost(const Mat& Q, const Mat& R, const Mat& Qf) { return {Q, R, Qf}; }

double min_eig(const Mat& P) {
  return Eigen::SelfAdjointEigenSolver<Mat>(P).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("scalar Riccati converges to the golden-ratio gain") {
  const Mat one = Mat::Identity(1, 1);
  const GainSchedule s = riccati_backward(constant_seq(one, one, 200), plain_cost(one, one, one));
  // P = 1 + P - P^2 / (1 + P) gives P = (1 + sqrt 5) / 2 and K = P / (1 + P).
  CHECK(std::abs(s.gains[0](0, 0) - 0.6180339887) < 1e-9);
  CHECK(std::abs(s.values[0](0, 0) - (1 + std::sqrt(5.0)) / 2) < 1e-9);
}

TEST_CASE("double integrator: standard-form DARE agreement and a stable closed loop") {
  const double dt = 0.1;
  Mat A(2, 2), B(2, 1);
  A << 1, dt, 0, 1;
  B << 0.5 * dt * dt, dt;
  const Mat Q = Mat::Identity(2, 2), R = Mat::Identity(1, 1);
  const GainSchedule s = riccati_backward(constant_seq(A, B, 400), plain_cost(Q, R, Q));

  // Independent fixed point iteration in the standard (non-Joseph) form.
  Mat P = Q;
  for (int i = 0; i < 5000; ++i) {
    const Mat S = R + B.transpose() * P * B;
    P = Q + A.transpose() * P * A -
        A.transpose() * P * B * S.inverse() * B.transpose() * P * A;
  }
  const Mat K = (R + B.transpose() * P * B).inverse() * B.transpose() * P * A;
  CHECK((s.gains[0] - K).cwiseAbs().maxCoeff() < 1e-9);
  const Mat Acl = A - B * s.gains[0];
  const double rho = Acl.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(rho < 1.0);
  CHECK(A.eigenvalues().cwiseAbs().maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("value matrices are symmetric positive semidefinite") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4, m = 2, T = 50;
    LinearizationSeq lin;
    for (int t = 0; t < T; ++t) {
      Mat A = Mat::Identity(n, n) + 0.3 * Mat(random_vec(rng, n * n, -1, 1).reshaped(n, n));
      lin.a.push_back(A);
      lin.b.push_back(Mat(random_vec(rng, n * m, -1, 1).reshaped(n, m)));
    }
    lin.points.assign(T + 1, Vec::Zero(n));
    lin.actions.assign(T, Vec::Zero(m));
    lin.angle_mask.assign(n, false);
    Vec qd = random_vec(rng, n, 0, 2);
    qd[0] = 0.0;  // semidefinite Q
    const TrackingCost c = TrackingCost::from_diagonals(qd, random_vec(rng, m, 0.01, 1), qd, n);
    const GainSchedule s = riccati_backward(lin, c);
    for (const Mat& P : s.values) {
      CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, P.norm()));
      CHECK(min_eig(P) >= -1e-10 * std::max(1.0, P.norm()));
    }
  }
}

TEST_CASE("cost to go equals the simulated closed-loop cost") {
  std::mt19937_64 rng(3);
  const int n = 3, m = 1, T = 25;
  LinearizationSeq lin;
  for (int t = 0; t < T; ++t) {
    lin.a.push_back(Mat::Identity(n, n) + 0.2 * Mat(random_vec(rng, n * n, -1, 1).reshaped(n, n)));
    lin.b.push_back(Mat(random_vec(rng, n * m, -1, 1).reshaped(n, m)));
  }
  lin.points.assign(T + 1, Vec::Zero(n));
  lin.actions.assign(T, Vec::Zero(m));
  lin.angle_mask.assign(n, false);
  const TrackingCost c =
      TrackingCost::from_diagonals(Vec::Ones(n), Vec::Constant(m, 0.5), Vec::Constant(n, 3), n);
  const GainSchedule s = riccati_backward(lin, c);
  auto simulate = [&](const Vec& x0, double gain_scale) {
    Vec x = x0;
    double J = 0;
    for (int t = 0; t < T; ++t) {
      const Vec u = -gain_scale * s.gains[t] * x;
      J += x.dot(c.q * x) + u.dot(c.r * u);
      x = lin.a[t] * x + lin.b[t] * u;
    }
    return J + x.dot(c.q_terminal * x);
  };
  for (int i = 0; i < 5; ++i) {
    const Vec x0 = random_vec(rng, n, -1, 1);
    const double J = simulate(x0, 1.0);
    CHECK(J == doctest::Approx(x0.dot(s.values[0] * x0)).epsilon(1e-10));
    // The Riccati gains are optimal, so scaling them costs more.
    CHECK(simulate(x0, 0.9) > J);
    CHECK(simulate(x0, 1.1) > J);
  }
}

TEST_CASE("tracking cost layout and validation") {
  Vec q(2), r(1), qf(2);
  q << 100, 50;
  r << 0.01;
  qf << 7, 8;
  const TrackingCost c = TrackingCost::from_diagonals(q, r, qf, 5);
  CHECK(c.q.rows() == 5);
  CHECK(c.q(0, 0) == 100);
  CHECK(c.q(1, 1) == 50);
  CHECK(c.q.bottomRightCorner(3, 3).isZero(0.0));
  CHECK(c.q_terminal(1, 1) == 8);
  CHECK_NOTHROW(c.validate());
  TrackingCost bad = c;
  bad.r(0, 0) = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = c;
  bad.q(0, 1) = 1.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK_THROWS_AS(riccati_backward(constant_seq(Mat::Identity(3, 3), Mat::Ones(3, 1), 4), c),
                  DimensionError);
}

TEST_CASE("linearization follows the plan and the history it implies") {
  const int n_x = 2, n_u = 1, H = 2;
  DynamicsModel m =
      random_model(spec_of(n_x, n_u, H, {StateFeature::kAngle, StateFeature::kPlain}), 31);
  std::mt19937_64 rng(6);
  const int T = 6;
  LiftedPlan plan = zero_plan(T, n_x, Vec::Zero(1), 0.05);
  for (int t = 0; t < T; ++t) plan.action_seq(t, 0) = random_vec(rng, 1, -1, 1)[0];
  HistoryWindow h0(n_x, n_u, H);
  h0.push(random_vec(rng, n_x, -1, 1), random_vec(rng, n_u, -1, 1));
  h0.push(random_vec(rng, n_x, -1, 1), random_vec(rng, n_u, -1, 1));
  HistoryWindow h = h0;
  plan.nominal_states.row(0) = random_vec(rng, n_x, -1, 1).transpose();
  std::vector<HistoryWindow> hs;
  for (int t = 0; t < T; ++t) {
    hs.push_back(h);
    const Vec x = plan.nominal(t);
    plan.nominal_states.row(t + 1) = m.forward(x, plan.action(t), h).transpose();
    h.push(x, plan.action(t));
  }
  const LinearizationSeq aug = linearize_along(m, plan, h0, true);
  const LinearizationSeq phys = linearize_along(m, plan, h0, false);
  REQUIRE(aug.horizon() == T);
  REQUIRE(aug.points.size() == static_cast<size_t>(T + 1));
  CHECK(aug.angle_mask == std::vector<bool>{true, false, true, false, true, false, false, false});
  for (int t = 0; t < T; ++t) {
    const AugmentedJacobian J = m.augmented_jacobian(plan.nominal(t), plan.action(t), hs[t]);
    CHECK(aug.a[t] == J.a);
    CHECK(aug.b[t] == J.b);
    CHECK(aug.points[t] == augmented_state(plan.nominal(t), hs[t]));
    CHECK(phys.a[t] == m.jacobians(plan.nominal(t), plan.action(t), hs[t]).first);
    CHECK(phys.points[t] == plan.nominal(t));
  }
  // Consecutive augmented points are related by the augmented map.
  for (int t = 0; t < T; ++t) {
    CHECK((augmented_step(m, aug.points[t], plan.action(t)) - aug.points[t + 1]).norm() == 0.0);
  }
  LiftedPlan broken = plan;
  broken.nominal_states(3, 0) = std::nan("");
  CHECK_THROWS_AS(linearize_along(m, broken, h0, true), ContractError);
}

TEST_CASE("feedback law wraps angles and clamps") {
  GainSchedule s;
  s.gains = {Mat::Constant(1, 2, 1.0)};
  s.nominal_states = {(Vec(2) << kPi - 0.05, 0.0).finished(), Vec::Zero(2)};
  s.nominal_actions = {Vec::Constant(1, 0.0)};
  s.angle_mask = {true, false};
  s.bounds = {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
  // Measured angle -pi + 0.05 is 0.1 rad past the nominal, not 2 pi - 0.1.
  const Vec x = (Vec(2) << -kPi + 0.05, 0.2).finished();
  const Vec u = feedback_action(s, 0, x, Vec::Constant(1, 0.5));
  CHECK(u[0] == doctest::Approx(0.5 - 0.1 - 0.2));
  const Vec sat = feedback_action(s, 0, x, Vec::Constant(1, 3.0));
  CHECK(sat[0] == 1.0);
  CHECK_THROWS_AS(feedback_action(s, 1, x, Vec::Zero(1)), ContractError);
}

TEST_CASE("gain interpolation between knots") {
  GainSchedule s;
  s.dt = 0.05;
  s.angle_mask = {true};
  s.gains = {Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 2.0)};
  s.nominal_states = {Vec::Constant(1, kPi - 0.1), Vec::Constant(1, -kPi + 0.1),
                      Vec::Constant(1, -kPi + 0.3)};
  s.nominal_actions = {Vec::Constant(1, 0.0), Vec::Constant(1, 1.0)};

  GainSample g = interpolate_gain(s, 0.0);
  CHECK(g.knot == 0);
  CHECK(g.nominal_state[0] == kPi - 0.1);
  g = interpolate_gain(s, 0.025);
  CHECK(g.gain(0, 0) == 1.0);  // zero-order hold
  // Halfway along the short arc through pi.
  CHECK(wrap_angle(g.nominal_state[0]) == doctest::Approx(kPi));
  CHECK(g.nominal_action[0] == doctest::Approx(0.5));
  // Three knot-rate steps of 0.05 / 5 land on the second knot despite rounding.
  g = interpolate_gain(s, 0.01 * 5);
  CHECK(g.knot == 1);
  CHECK(g.nominal_state[0] == -kPi + 0.1);
  // Last interval holds the last action.
  g = interpolate_gain(s, 0.075);
  CHECK(g.nominal_action[0] == 1.0);
  CHECK(g.nominal_state[0] == doctest::Approx(-kPi + 0.2));

  for (int step = 0; step < 5; ++step) {
    const GainSample a = interpolate_gain(s, 1, step, 5);
    const GainSample b = interpolate_gain(s, 0.05 + step * 0.01);
    CHECK(a.knot == b.knot);
    CHECK(a.nominal_state[0] == doctest::Approx(b.nominal_state[0]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(interpolate_gain(s, 0.1), ContractError);
  CHECK_THROWS_AS(interpolate_gain(s, -0.01), ContractError);
  CHECK_THROWS_AS(interpolate_gain(s, 2, 0, 5), ContractError);
  CHECK_THROWS_AS(interpolate_gain(s, 0, 5, 5), ContractError);
}
