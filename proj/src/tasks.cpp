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

#include "toast/tasks.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace toast {

QuadraticCost::QuadraticCost(Vec goal, Vec q, Vec q_terminal, std::vector<bool> angle_mask)
    : goal_(std::move(goal)), q_(std::move(q)), qf_(std::move(q_terminal)),
      mask_(std::move(angle_mask)) {
  require_dim(q_.size(), goal_.size(), "running cost weights");
  require_dim(qf_.size(), goal_.size(), "terminal cost weights");
  require((q_.array() >= 0.0).all() && (qf_.array() >= 0.0).all(),
          "cost weights must be nonnegative");
}

double QuadraticCost::running(const Vec& state, CostScratch&) const {
  const Vec d = angle_aware_diff(state, goal_, mask_);
  return (q_.array() * d.array().square()).sum();
}

double QuadraticCost::terminal(const Vec& state, CostScratch&) const {
  const Vec d = angle_aware_diff(state, goal_, mask_);
  return (qf_.array() * d.array().square()).sum();
}

double QuadraticCost::task_error(const Vec& state, CostScratch&) const {
  return angle_aware_diff(state, goal_, mask_).norm();
}

std::unique_ptr<TaskCost> QuadraticCost::clone() const {
  return std::make_unique<QuadraticCost>(*this);
}

// ---------------------------------------------------------------------------

FigureEightPath::FigureEightPath(double radius, double spacing) : radius_(radius) {
  require(radius > 0.0 && spacing > 0.0, "figure-eight radius and spacing must be positive");
  const double lobe = 2.0 * kPi * radius;
  const int n = static_cast<int>(std::lround(2.0 * lobe / spacing));
  require(n >= 8, "figure-eight spacing too coarse");
  const double ds = 2.0 * lobe / n;
  for (int k = 0; k < n; ++k) {
    const double s = k * ds;
    if (s < lobe) {
      const double phi = s / radius;
      x_.push_back(-radius + radius * std::cos(phi));
      y_.push_back(radius * std::sin(phi));
      heading_.push_back(wrap_angle(phi + kPi / 2));
    } else {
      const double phi = kPi - (s - lobe) / radius;
      x_.push_back(radius + radius * std::cos(phi));
      y_.push_back(radius * std::sin(phi));
      heading_.push_back(wrap_angle(phi - kPi / 2));
    }
  }
}

int FigureEightPath::nearest_local(double px, double py, int hint, int behind, int ahead) const {
  int best = wrap(hint);
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = hint - behind; j <= hint + ahead; ++j) {
    const int i = wrap(j);
    const double dx = px - x_[i], dy = py - y_[i];
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

int FigureEightPath::nearest_global(double px, double py) const {
  return nearest_local(px, py, 0, 0, size() - 1);
}

double FigureEightPath::lateral_error(double px, double py, int i) const {
  const int k = wrap(i);
  const double h = heading_[k];
  return -(px - x_[k]) * std::sin(h) + (py - y_[k]) * std::cos(h);
}

FigureEightCost::FigureEightCost(FigureEightPath path, FigureEightWeights w)
    : path_(std::move(path)), w_(w) {}

double FigureEightCost::stage(const Vec& s, CostScratch& scratch) const {
  scratch.path_index = path_.nearest_local(s[0], s[1], scratch.path_index, 2, 12);
  const int i = scratch.path_index;
  const double e = path_.lateral_error(s[0], s[1], i);
  const double dh = wrap_angle(s[2] - path_.heading(i));
  const double dv = s[3] - w_.target_speed;
  double c = w_.lateral * e * e + w_.heading * (1.0 - std::cos(dh)) + w_.speed * dv * dv +
             w_.lateral_velocity * s[4] * s[4] + w_.steer * s[6] * s[6];
  if (std::abs(e) > w_.track_half_width) c += w_.off_track_penalty;
  return c;
}

double FigureEightCost::running(const Vec& state, CostScratch& scratch) const {
  return stage(state, scratch);
}

double FigureEightCost::terminal(const Vec& state, CostScratch& scratch) const {
  return w_.terminal_factor * stage(state, scratch);
}

double FigureEightCost::task_error(const Vec& state, CostScratch& scratch) const {
  scratch.path_index = path_.nearest_local(state[0], state[1], scratch.path_index, 2, 12);
  return std::abs(path_.lateral_error(state[0], state[1], scratch.path_index));
}

void FigureEightCost::observe(const Vec& state) {
  index_ = path_.nearest_local(state[0], state[1], index_, 4, 16);
}

std::unique_ptr<TaskCost> FigureEightCost::clone() const {
  return std::make_unique<FigureEightCost>(*this);
}

}  // namespace toast
