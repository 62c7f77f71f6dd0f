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

#include "toast/smppi.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace toast {

void MppiConfig::validate() const {
  require(samples >= 1, "MPPI samples must be >= 1");
  require(horizon >= 1, "MPPI horizon must be >= 1");
  require(temperature > 0.0, "MPPI temperature must be positive");
  require(dt > 0.0, "MPPI dt must be positive");
  require(workers >= 1, "MPPI workers must be >= 1");
  bounds.validate("MPPI action bounds");
  require_dim(noise_stddev.size(), bounds.size(), "MPPI noise_stddev");
  require((noise_stddev.array() >= 0.0).all(), "MPPI noise_stddev must be nonnegative");
  if (!lifted) {
    require_dim(action_noise_stddev.size(), bounds.size(), "MPPI action_noise_stddev");
    require((action_noise_stddev.array() >= 0.0).all(),
            "MPPI action_noise_stddev must be nonnegative");
  }
  require(omega_action >= 0.0 && omega_rate >= 0.0, "smoothness weights must be nonnegative");
}

LiftedPlan zero_plan(int horizon, int n_x, const Vec& base_action, double dt, bool lifted) {
  require(horizon >= 1, "plan horizon must be >= 1");
  const Eigen::Index n_u = base_action.size();
  LiftedPlan p;
  p.derivative_seq = Mat::Zero(horizon, n_u);
  p.action_seq = base_action.transpose().replicate(horizon, 1);
  p.nominal_states = Mat::Zero(horizon + 1, n_x);
  p.base_action = base_action;
  p.dt = dt;
  p.lifted = lifted;
  return p;
}

Mat integrate_actions(const Vec& base, const Mat& derivatives, double dt, const Bounds& bounds) {
  require_dim(derivatives.cols(), base.size(), "derivative sequence width");
  Mat a(derivatives.rows(), derivatives.cols());
  for (Eigen::Index j = 0; j < derivatives.cols(); ++j) {
    double prev = base[j];
    for (Eigen::Index t = 0; t < derivatives.rows(); ++t) {
      prev = std::clamp(prev + dt * derivatives(t, j), bounds.lower[j], bounds.upper[j]);
      a(t, j) = prev;
    }
  }
  return a;
}

std::vector<Perturbation> sample_perturbations(const MppiConfig& config, std::mt19937_64& rng) {
  config.validate();
  const int T = config.horizon;
  const int n_u = config.action_dim();
  const Vec& sigma = config.lifted ? config.noise_stddev : config.action_noise_stddev;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Perturbation> eps;
  eps.reserve(config.samples);
  eps.push_back(Mat::Zero(T, n_u));
  for (int k = 1; k < config.samples; ++k) {
    Mat e(T, n_u);
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < n_u; ++j) e(t, j) = sigma[j] * normal(rng);
    }
    eps.push_back(std::move(e));
  }
  return eps;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ChunkOutput {
  std::vector<double> costs;
  RolloutResult* record = nullptr;  // filled for single-sample calls
};

// Rolls out perturbations [begin, end) as one batch per time step. Each
// column follows the same arithmetic regardless of the batch size.
void simulate(const DynamicsModel& model, const Vec& state, const HistoryWindow& history,
              const LiftedPlan& plan, const std::vector<const Perturbation*>& eps,
              const MppiConfig& config, const TaskCost& cost, ChunkOutput& out) {
  const int T = plan.horizon();
  const int n_x = model.state_dim();
  const int n_u = model.action_dim();
  const Eigen::Index K = static_cast<Eigen::Index>(eps.size());
  const double dt = plan.dt;

  std::vector<Vec> xs(K, state);
  std::vector<HistoryWindow> hists(K, history);
  std::vector<Vec> prev(K, plan.base_action);
  std::vector<Vec> act(K, Vec(n_u));
  std::vector<Vec> rate(K, Vec(n_u));
  std::vector<CostScratch> scratch(K, cost.begin());
  std::vector<char> alive(K, 1);
  out.costs.assign(K, 0.0);

  RowMat input(model.input_dim(), K);
  BatchWorkspace ws;
  Vec inc(n_x);
  Vec next(n_x);

  if (out.record) {
    out.record->actions = Mat::Zero(T, n_u);
    out.record->states = Mat::Constant(T + 1, n_x, std::numeric_limits<double>::quiet_NaN());
    out.record->states.row(0) = state.transpose();
  }

  for (int t = 0; t < T; ++t) {
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!alive[k]) {
        for (Eigen::Index r = 0; r < input.rows(); ++r) input(r, k) = 0.0;
        continue;
      }
      const Perturbation& e = *eps[k];
      for (int j = 0; j < n_u; ++j) {
        const double lo = config.bounds.lower[j], hi = config.bounds.upper[j];
        if (plan.lifted) {
          const double d = plan.derivative_seq(t, j) + e(t, j);
          act[k][j] = std::clamp(prev[k][j] + dt * d, lo, hi);
          rate[k][j] = d;
        } else {
          act[k][j] = std::clamp(plan.action_seq(t, j) + e(t, j), lo, hi);
          rate[k][j] = (act[k][j] - prev[k][j]) / dt;
        }
      }
      model.write_input(xs[k], act[k], hists[k], input.data() + k, K);
    }
    const RowMat& y = model.evaluate_batch(input, ws);
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!alive[k]) continue;
      model.increment_from_output(y, k, inc);
      next = xs[k] + inc;
      if (!next.allFinite()) {
        alive[k] = 0;
        out.costs[k] = kInf;
        if (out.record) out.record->diverged = true;
        continue;
      }
      hists[k].push(xs[k], act[k]);
      xs[k] = next;
      prev[k] = act[k];
      double c = cost.running(xs[k], scratch[k]) + config.omega_action * act[k].squaredNorm() +
                 config.omega_rate * rate[k].squaredNorm();
      out.costs[k] += c;
      if (out.record) {
        out.record->actions.row(t) = act[k].transpose();
        out.record->states.row(t + 1) = xs[k].transpose();
      }
    }
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!alive[k]) continue;
    out.costs[k] += cost.terminal(xs[k], scratch[k]);
    if (!std::isfinite(out.costs[k])) out.costs[k] = kInf;
  }
  if (out.record) out.record->cost = out.costs[0];
}

void check_plan(const DynamicsModel& model, const Vec& state, const LiftedPlan& plan,
                const MppiConfig& config) {
  require_dim(state.size(), model.state_dim(), "rollout start state");
  require_dim(plan.horizon(), config.horizon, "plan horizon");
  require_dim(plan.derivative_seq.cols(), model.action_dim(), "plan action width");
  require_dim(plan.action_seq.rows(), plan.horizon(), "plan action rows");
  require_dim(plan.base_action.size(), model.action_dim(), "plan base action");
  require_dim(config.bounds.size(), model.action_dim(), "MPPI bounds");
}

}  // namespace

RolloutResult rollout(const DynamicsModel& model, const Vec& state, const HistoryWindow& history,
                      const LiftedPlan& plan, const Perturbation& perturbation,
                      const MppiConfig& config, const TaskCost& cost) {
  check_plan(model, state, plan, config);
  require(perturbation.rows() == plan.horizon() && perturbation.cols() == model.action_dim(),
          "perturbation shape must be horizon x action_dim");
  RolloutResult result;
  ChunkOutput out;
  out.record = &result;
  simulate(model, state, history, plan, {&perturbation}, config, cost, out);
  return result;
}

std::vector<double> rollout_costs(const DynamicsModel& model, const Vec& state,
                                  const HistoryWindow& history, const LiftedPlan& plan,
                                  const std::vector<Perturbation>& perturbations,
                                  const MppiConfig& config, const TaskCost& cost) {
  check_plan(model, state, plan, config);
  const size_t K = perturbations.size();
  std::vector<const Perturbation*> all(K);
  for (size_t k = 0; k < K; ++k) {
    require(perturbations[k].rows() == plan.horizon() &&
                perturbations[k].cols() == model.action_dim(),
            "perturbation shape must be horizon x action_dim");
    all[k] = &perturbations[k];
  }
  const size_t workers = std::min<size_t>(static_cast<size_t>(config.workers), K);
  if (workers <= 1) {
    ChunkOutput out;
    simulate(model, state, history, plan, all, config, cost, out);
    return out.costs;
  }
  // Each worker owns a disjoint slice and a private cost copy.
  std::vector<ChunkOutput> outs(workers);
  std::vector<std::vector<const Perturbation*>> slices(workers);
  std::vector<std::unique_ptr<TaskCost>> costs(workers);
  const size_t per = (K + workers - 1) / workers;
  std::vector<std::thread> threads;
  for (size_t w = 0; w < workers; ++w) {
    const size_t b = w * per, e = std::min(K, b + per);
    slices[w].assign(all.begin() + static_cast<long>(b), all.begin() + static_cast<long>(e));
    costs[w] = cost.clone();
    threads.emplace_back([&, w] {
      simulate(model, state, history, plan, slices[w], config, *costs[w], outs[w]);
    });
  }
  for (auto& th : threads) th.join();
  std::vector<double> result;
  result.reserve(K);
  for (const auto& o : outs) result.insert(result.end(), o.costs.begin(), o.costs.end());
  return result;
}

Vec mppi_weights(const std::vector<double>& costs, double lambda) {
  require(lambda > 0.0, "temperature must be positive");
  require(!costs.empty(), "no costs to weight");
  double rho = kInf;
  for (double c : costs) {
    if (std::isfinite(c)) rho = std::min(rho, c);
  }
  if (!std::isfinite(rho)) throw DivergenceError("all rollouts diverged");
  Vec w(static_cast<Eigen::Index>(costs.size()));
  double eta = 0.0;
  for (size_t k = 0; k < costs.size(); ++k) {
    w[k] = std::isfinite(costs[k]) ? std::exp(-(costs[k] - rho) / lambda) : 0.0;
    eta += w[k];
  }
  return w / eta;
}

Mat weighted_update(const std::vector<double>& costs, const std::vector<Perturbation>& perturbations,
                    double lambda) {
  require(costs.size() == perturbations.size(), "one cost per perturbation required");
  const Vec w = mppi_weights(costs, lambda);
  Mat update = Mat::Zero(perturbations.front().rows(), perturbations.front().cols());
  for (size_t k = 0; k < perturbations.size(); ++k) {
    if (w[k] != 0.0) update += w[k] * perturbations[k];
  }
  return update;
}

LiftedPlan shift(const LiftedPlan& plan) {
  const int T = plan.horizon();
  require(T >= 2, "shift requires a horizon of at least 2");
  LiftedPlan s = plan;
  s.base_action = plan.action_seq.row(0).transpose();
  s.derivative_seq.topRows(T - 1) = plan.derivative_seq.bottomRows(T - 1);
  s.derivative_seq.row(T - 1).setZero();
  // Re-integrating the shifted derivatives from the new base reproduces the
  // old rows 1..T-1 exactly, and the zero tail holds the last action.
  s.action_seq.topRows(T - 1) = plan.action_seq.bottomRows(T - 1);
  s.action_seq.row(T - 1) = plan.action_seq.row(T - 1);
  const Eigen::Index nr = plan.nominal_states.rows();
  if (nr >= 2) {
    s.nominal_states.topRows(nr - 1) = plan.nominal_states.bottomRows(nr - 1);
    s.nominal_states.row(nr - 1) = plan.nominal_states.row(nr - 1);
  }
  s.cost = std::numeric_limits<double>::quiet_NaN();
  return s;
}

SmppiPlanner::SmppiPlanner(MppiConfig config) : config_(std::move(config)), rng_(config_.rng_seed) {
  config_.validate();
}

LiftedPlan SmppiPlanner::plan(const DynamicsModel& model, const Vec& state,
                              const HistoryWindow& history, const LiftedPlan& incumbent,
                              const TaskCost& cost) {
  require(incumbent.lifted == config_.lifted, "incumbent plan kind does not match planner mode");
  const auto eps = sample_perturbations(config_, rng_);
  const auto costs = rollout_costs(model, state, history, incumbent, eps, config_, cost);
  const Vec w = mppi_weights(costs, config_.temperature);
  Mat update = Mat::Zero(config_.horizon, model.action_dim());
  for (size_t k = 0; k < eps.size(); ++k) {
    if (w[k] != 0.0) update += w[k] * eps[k];
  }

  diag_ = {};
  diag_.min_sample_cost = kInf;
  for (double c : costs) {
    if (std::isfinite(c)) diag_.min_sample_cost = std::min(diag_.min_sample_cost, c);
    else ++diag_.diverged;
  }
  diag_.effective_samples = 1.0 / w.squaredNorm();

  LiftedPlan next = incumbent;
  if (config_.lifted) {
    next.derivative_seq = incumbent.derivative_seq + update;
    next.action_seq = integrate_actions(next.base_action, next.derivative_seq, next.dt,
                                        config_.bounds);
  } else {
    next.action_seq = (incumbent.action_seq + update);
    for (Eigen::Index t = 0; t < next.action_seq.rows(); ++t) {
      next.action_seq.row(t) = config_.bounds.clamp(next.action_seq.row(t).transpose()).transpose();
    }
    Vec prev = next.base_action;
    for (Eigen::Index t = 0; t < next.action_seq.rows(); ++t) {
      next.derivative_seq.row(t) = (next.action_seq.row(t) - prev.transpose()) / next.dt;
      prev = next.action_seq.row(t).transpose();
    }
  }
  const RolloutResult nominal = rollout(model, state, history, next,
                                        Mat::Zero(config_.horizon, model.action_dim()), config_,
                                        cost);
  next.nominal_states = nominal.states;
  next.cost = nominal.cost;
  return next;
}

}  // namespace toast
