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
#include "toast/smppi.hpp"

using namespace toast;
using namespace toast::testing;

namespace {

Bounds box(double lim, int n = 1) { return {Vec::Constant(n, -lim), Vec::Constant(n, lim)}; }

MppiConfig small_config(bool lifted = true) {
  MppiConfig c;
  c.samples = 64;
  c.horizon = 10;
  c.temperature = 0.5;
  c.noise_stddev = Vec::Constant(1, 4.0);
  c.action_noise_stddev = Vec::Constant(1, 0.3);
  c.bounds = box(1.0);
  c.dt = 0.1;
  c.rng_seed = 5;
  c.lifted = lifted;
  return c;
}

// x' = x + 0.1 (-0.2 x + 0.5 u)
DynamicsModel scalar_model(int H = 0) {
  return affine_model(Mat::Constant(1, 1, -0.02), Mat::Constant(1, 1, 0.05), H);
}

QuadraticCost goal_cost(double goal) {
  return QuadraticCost(Vec::Constant(1, goal), Vec::Ones(1), Vec::Constant(1, 10.0), {false});
}

}  // namespace

TEST_CASE("softmax weights of two costs") {
  const Vec w = mppi_weights({0.0, std::log(3.0)}, 1.0);
  CHECK(std::abs(w[0] - 0.75) < 1e-12);
  CHECK(std::abs(w[1] - 0.25) < 1e-12);
}

TEST_CASE("softmax weights are shift and scale invariant") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> c(32);
    for (double& v : c) v = u(rng);
    const double lambda = 0.5 + trial * 0.3;
    const Vec w = mppi_weights(c, lambda);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
    std::vector<double> shifted(c), scaled(c);
    for (double& v : shifted) v += 1234.5;
    for (double& v : scaled) v *= 7.0;
    CHECK((mppi_weights(shifted, lambda) - w).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mppi_weights(scaled, 7.0 * lambda) - w).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("diverged rollouts get zero weight") {
  const double inf = std::numeric_limits<double>::infinity();
  const Vec w = mppi_weights({inf, 1.0, 1.0}, 1.0);
  CHECK(w[0] == 0.0);
  CHECK(w[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(mppi_weights({inf, inf}, 1.0), DivergenceError);
  CHECK_THROWS_AS(mppi_weights({1.0}, 0.0), ContractError);
  const Mat upd = weighted_update({0.0, std::log(3.0)},
                                  {Mat::Constant(2, 1, 4.0), Mat::Constant(2, 1, -4.0)}, 1.0);
  CHECK(upd(1, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("action integration clamps the running sum") {
  Mat d(4, 1);
  d << 5.0, 5.0, 5.0, -20.0;
  const Mat a = integrate_actions(Vec::Constant(1, 0.2), d, 0.1, box(1.0));
  CHECK(a(0, 0) == doctest::Approx(0.7));
  CHECK(a(1, 0) == 1.0);
  CHECK(a(2, 0) == 1.0);
  // Clamping discards the excess, so the descent starts from the bound.
  CHECK(a(3, 0) == doctest::Approx(-1.0));
}

TEST_CASE("perturbation sampling") {
  MppiConfig c = small_config();
  c.samples = 4000;
  std::mt19937_64 rng(3);
  const auto eps = sample_perturbations(c, rng);
  REQUIRE(eps.size() == 4000);
  CHECK(eps[0].isZero(0.0));
  double sum = 0, sq = 0;
  int n = 0;
  for (size_t k = 1; k < eps.size(); ++k) {
    sum += eps[k].sum();
    sq += eps[k].squaredNorm();
    n += static_cast<int>(eps[k].size());
  }
  const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.05);
  CHECK(sd == doctest::Approx(4.0).epsilon(0.02));
  std::mt19937_64 rng2(3);
  CHECK(sample_perturbations(c, rng2)[7] == eps[7]);
}

TEST_CASE("rollout cost of a hand-computed trajectory") {
  DynamicsModel m = scalar_model();
  MppiConfig c = small_config();
  c.horizon = 2;
  c.omega_action = 0.5;
  c.omega_rate = 0.01;
  LiftedPlan p = zero_plan(2, 1, Vec::Constant(1, 0.1), c.dt);
  p.derivative_seq << 2.0, -1.0;
  Mat eps(2, 1);
  eps << 1.0, 0.0;
  QuadraticCost cost = goal_cost(0.0);
  const RolloutResult r = rollout(m, Vec::Constant(1, 1.0), HistoryWindow(1, 1, 0), p, eps, c, cost);
  // a1 = 0.1 + 0.1 * 3 = 0.4, a2 = 0.4 - 0.1 = 0.3
  const double x1 = 1.0 - 0.02 * 1.0 + 0.05 * 0.4;
  const double x2 = x1 - 0.02 * x1 + 0.05 * 0.3;
  const double expect = x1 * x1 + 0.5 * 0.16 + 0.01 * 9.0 + x2 * x2 + 0.5 * 0.09 + 0.01 * 1.0 +
                        10.0 * x2 * x2;
  CHECK(r.cost == doctest::Approx(expect).epsilon(1e-14));
  CHECK(r.actions(0, 0) == doctest::Approx(0.4));
  CHECK(r.states(2, 0) == doctest::Approx(x2));
  CHECK_FALSE(r.diverged);
}

TEST_CASE("batched and threaded rollouts agree bitwise with single rollouts") {
  DynamicsModel m = random_model(spec_of(2, 1, 1, {StateFeature::kAngle, StateFeature::kPlain}), 8);
  MppiConfig c = small_config();
  c.samples = 33;
  std::mt19937_64 rng(2);
  const auto eps = sample_perturbations(c, rng);
  LiftedPlan p = zero_plan(c.horizon, 2, Vec::Constant(1, 0.1), c.dt);
  QuadraticCost cost(Vec::Zero(2), Vec::Ones(2), Vec::Ones(2), {true, false});
  const Vec x = (Vec(2) << 2.0, 0.3).finished();
  HistoryWindow h(2, 1, 1);
  h.push(Vec::Constant(2, 1.9), Vec::Constant(1, 0.05));
  const auto batch = rollout_costs(m, x, h, p, eps, c, cost);
  c.workers = 4;
  const auto threaded = rollout_costs(m, x, h, p, eps, c, cost);
  CHECK(batch == threaded);
  for (size_t k = 0; k < eps.size(); ++k) {
    CHECK(rollout(m, x, h, p, eps[k], c, cost).cost == batch[k]);
  }
}

TEST_CASE("shift keeps the remaining actions") {
  MppiConfig c = small_config();
  LiftedPlan p = zero_plan(c.horizon, 1, Vec::Constant(1, 0.0), c.dt);
  std::mt19937_64 rng(4);
  p.derivative_seq = 6.0 * Mat::Random(c.horizon, 1);
  p.action_seq = integrate_actions(p.base_action, p.derivative_seq, c.dt, c.bounds);
  const LiftedPlan s = shift(p);
  CHECK(s.base_action[0] == p.action_seq(0, 0));
  CHECK(s.action_seq == integrate_actions(s.base_action, s.derivative_seq, c.dt, c.bounds));
  CHECK(s.action_seq.topRows(c.horizon - 1) == p.action_seq.bottomRows(c.horizon - 1));
  CHECK(s.derivative_seq(c.horizon - 1, 0) == 0.0);
}

TEST_CASE("planner iterations reduce the cost on a known model") {
  for (bool lifted : {true, false}) {
    SUBCASE(lifted ? "lifted" : "vanilla") {
      DynamicsModel m = scalar_model();
      MppiConfig c = small_config(lifted);
      c.samples = 256;
      QuadraticCost cost = goal_cost(5.0);
      SmppiPlanner planner(c);
      const Vec x = Vec::Constant(1, 0.0);
      HistoryWindow h(1, 1, 0);
      LiftedPlan plan = zero_plan(c.horizon, 1, Vec::Zero(1), c.dt, lifted);
      const Mat none = Mat::Zero(c.horizon, 1);
      const double idle = rollout(m, x, h, plan, none, c, cost).cost;
      // Full input at every step is optimal for a goal beyond reach.
      LiftedPlan full = zero_plan(c.horizon, 1, Vec::Zero(1), c.dt, false);
      full.action_seq.setOnes();
      const double best = rollout(m, x, h, full, none, small_config(false), cost).cost;
      for (int i = 0; i < 20; ++i) plan = planner.plan(m, x, h, plan, cost);
      CHECK(plan.cost < idle);
      CHECK(plan.cost < best + 0.05 * (idle - best));
      // Pushing toward a far goal saturates the input.
      CHECK(plan.action(c.horizon - 1)[0] > 0.9);
      for (int t = 0; t < c.horizon; ++t) CHECK(c.bounds.contains(plan.action(t)));
      if (lifted) {
        CHECK(plan.action_seq ==
              integrate_actions(plan.base_action, plan.derivative_seq, c.dt, c.bounds));
      }
      CHECK(planner.diagnostics().effective_samples >= 1.0);
      CHECK(planner.diagnostics().diverged == 0);
      // The nominal trajectory is the noiseless rollout of the new plan.
      const RolloutResult r = rollout(m, x, h, plan, Mat::Zero(c.horizon, 1), c, cost);
      CHECK(r.states == plan.nominal_states);
    }
  }
}

TEST_CASE("planner is reproducible and zero noise leaves the plan unchanged") {
  DynamicsModel m = scalar_model();
  MppiConfig c = small_config();
  QuadraticCost cost = goal_cost(1.0);
  const Vec x = Vec::Constant(1, 0.2);
  HistoryWindow h(1, 1, 0);
  LiftedPlan p0 = zero_plan(c.horizon, 1, Vec::Zero(1), c.dt);
  SmppiPlanner a(c), b(c);
  CHECK(a.plan(m, x, h, p0, cost).derivative_seq == b.plan(m, x, h, p0, cost).derivative_seq);

  c.noise_stddev.setZero();
  SmppiPlanner quiet(c);
  p0.derivative_seq.setConstant(0.3);
  p0.action_seq = integrate_actions(p0.base_action, p0.derivative_seq, c.dt, c.bounds);
  const LiftedPlan p1 = quiet.plan(m, x, h, p0, cost);
  CHECK(p1.derivative_seq == p0.derivative_seq);
}

TEST_CASE("planner contract checks") {
  MppiConfig c = small_config();
  c.temperature = 0.0;
  CHECK_THROWS_AS(SmppiPlanner{c}, ContractError);
  c = small_config();
  c.noise_stddev = Vec::Ones(2);
  CHECK_THROWS_AS(c.validate(), DimensionError);
  c = small_config();
  SmppiPlanner p(c);
  QuadraticCost cost = goal_cost(0.0);
  LiftedPlan wrong = zero_plan(c.horizon + 1, 1, Vec::Zero(1), c.dt);
  CHECK_THROWS_AS(p.plan(scalar_model(), Vec::Zero(1), HistoryWindow(1, 1, 0), wrong, cost),
                  DimensionError);
  LiftedPlan vanilla = zero_plan(c.horizon, 1, Vec::Zero(1), c.dt, false);
  CHECK_THROWS_AS(p.plan(scalar_model(), Vec::Zero(1), HistoryWindow(1, 1, 0), vanilla, cost),
                  ContractError);
}
