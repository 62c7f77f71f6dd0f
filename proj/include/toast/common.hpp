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

#ifndef TOAST_COMMON_HPP_
#define TOAST_COMMON_HPP_

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace toast {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Precondition or dimension contract broken by the caller.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Sizes disagree (model input, payload length, matrix shapes).
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Malformed persisted data (bad magic, truncation, unsupported version).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every sampled rollout of a planning iteration produced a non-finite cost.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = std::numbers::pi;

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  double w = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

// Subtracts b from a, wrapping the coordinates flagged in `angle_mask`.
inline Vec angle_aware_diff(const Vec& a, const Vec& b, const std::vector<bool>& angle_mask) {
  Vec d = a - b;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (static_cast<size_t>(i) < angle_mask.size() && angle_mask[i]) d[i] = wrap_angle(d[i]);
  }
  return d;
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const std::string& name) {
  if (got != want) {
    throw DimensionError(name + ": expected dimension " + std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

// Per-channel box constraint on an action vector.
struct Bounds {
  Vec lower;
  Vec upper;

  Eigen::Index size() const { return lower.size(); }

  Vec clamp(const Vec& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

  bool contains(const Vec& u) const {
    return ((u.array() >= lower.array()) && (u.array() <= upper.array())).all();
  }

  void validate(const std::string& name) const {
    require_dim(upper.size(), lower.size(), name + " upper bound");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      require(lower[i] < upper[i], name + ": lower bound must be below upper bound on channel " +
                                       std::to_string(i));
    }
  }
};

}  // namespace toast

#endif  // TOAST_COMMON_HPP_
