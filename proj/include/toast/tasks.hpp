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

// Task costs evaluated by the planner on predicted states and by the harness
// on true states.

#ifndef TOAST_TASKS_HPP_
#define TOAST_TASKS_HPP_

#include <memory>
#include <vector>

#include "toast/common.hpp"

namespace toast {

// Per-rollout mutable state of a cost (e.g. progress along a path).
struct CostScratch {
  int path_index = 0;
};

class TaskCost {
 public:
  virtual ~TaskCost() = default;

  virtual double running(const Vec& state, CostScratch& scratch) const = 0;
  virtual double terminal(const Vec& state, CostScratch& scratch) const = 0;
  // Task-level error magnitude reported in metrics.
  virtual double task_error(const Vec& state, CostScratch& scratch) const = 0;

  // Scratch for a rollout starting from the most recently observed state.
  virtual CostScratch begin() const { return {}; }
  // Called by the episode loop with each true state.
  virtual void observe(const Vec& /*state*/) {}
  virtual void reset() {}
  virtual std::unique_ptr<TaskCost> clone() const = 0;
};

// sum_i q_i d_i^2 with d = state - goal, angle coordinates wrapped.
class QuadraticCost final : public TaskCost {
 public:
  QuadraticCost(Vec goal, Vec q, Vec q_terminal, std::vector<bool> angle_mask);

  double running(const Vec& state, CostScratch& scratch) const override;
  double terminal(const Vec& state, CostScratch& scratch) const override;
  // Norm of the wrapped deviation from the goal.
  double task_error(const Vec& state, CostScratch& scratch) const override;
  std::unique_ptr<TaskCost> clone() const override;

 private:
  Vec goal_;
  Vec q_;
  Vec qf_;
  std::vector<bool> mask_;
};

// Closed figure-eight made of two tangent circles of radius R centred at
// (-R, 0) and (R, 0). The left lobe is driven counter-clockwise and the right
// lobe clockwise; both pass the origin heading +y.
class FigureEightPath {
 public:
  FigureEightPath(double radius, double spacing);

  int size() const { return static_cast<int>(x_.size()); }
  double radius() const { return radius_; }
  double x(int i) const { return x_[wrap(i)]; }
  double y(int i) const { return y_[wrap(i)]; }
  double heading(int i) const { return heading_[wrap(i)]; }

  // Nearest sample within [hint - behind, hint + ahead].
  int nearest_local(double px, double py, int hint, int behind, int ahead) const;
  int nearest_global(double px, double py) const;
  // Signed offset from sample i along its left normal.
  double lateral_error(double px, double py, int i) const;

 private:
  int wrap(int i) const { return ((i % size()) + size()) % size(); }

  double radius_;
  std::vector<double> x_, y_, heading_;
};

struct FigureEightWeights {
  double lateral = 2.0;
  double heading = 5.0;
  double speed = 0.5;
  double target_speed = 11.0;
  double lateral_velocity = 0.5;
  double steer = 2.0;  // on the road-wheel angle
  double terminal_factor = 5.0;
  double track_half_width = 2.5;
  double off_track_penalty = 500.0;
};

// Path-following cost for the vehicle. Progress along the path is tracked
// locally from the last observed index.
class FigureEightCost final : public TaskCost {
 public:
  FigureEightCost(FigureEightPath path, FigureEightWeights w);

  double running(const Vec& state, CostScratch& scratch) const override;
  double terminal(const Vec& state, CostScratch& scratch) const override;
  // Absolute lateral deviation from the path.
  double task_error(const Vec& state, CostScratch& scratch) const override;
  CostScratch begin() const override { return {index_}; }
  void observe(const Vec& state) override;
  void reset() override { index_ = 0; }
  std::unique_ptr<TaskCost> clone() const override;

  const FigureEightPath& path() const { return path_; }
  int index() const { return index_; }

 private:
  double stage(const Vec& state, CostScratch& scratch) const;

  FigureEightPath path_;
  FigureEightWeights w_;
  int index_ = 0;
};

}  // namespace toast

#endif  // TOAST_TASKS_HPP_
