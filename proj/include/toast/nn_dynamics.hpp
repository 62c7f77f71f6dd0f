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

// Neural-network dynamics shared by the sampling planner and the tracking
// controller.
//
// The network predicts the one-step state increment from a history-augmented
// input. Raw inputs are flattened as
//
//   [x_t, x_{t-1}, ..., x_{t-H}, u_t, u_{t-1}, ..., u_{t-H}]
//
// and each state slot is passed through a per-coordinate feature map before
// normalization: plain coordinates are copied, angles become (sin, cos) and
// dropped coordinates (e.g. global position of a vehicle) are omitted.
// Unfilled history slots are zero in normalized space.

#ifndef TOAST_NN_DYNAMICS_HPP_
#define TOAST_NN_DYNAMICS_HPP_

#include <cstdint>
#include <vector>

#include "toast/common.hpp"

namespace toast {

enum class StateFeature : std::uint8_t { kPlain = 0, kAngle = 1, kDropped = 2 };

enum class Activation : std::uint32_t { kTanh = 1 };

// Number of network features produced for one state slot.
int feature_width(const std::vector<StateFeature>& features);

// Angle mask derived from the feature kinds.
std::vector<bool> angle_mask(const std::vector<StateFeature>& features);

// Fixed-capacity window of the H most recent (state, action) pairs.
class HistoryWindow {
 public:
  HistoryWindow() = default;
  HistoryWindow(int n_x, int n_u, int capacity);

  // Records (x_t, u_t) after the step; it becomes the lag-1 entry.
  void push(const Vec& state, const Vec& action);
  void clear() { filled_ = 0; }

  int capacity() const { return capacity_; }
  int filled() const { return filled_; }
  bool warmed() const { return filled_ == capacity_; }
  int state_dim() const { return n_x_; }
  int action_dim() const { return n_u_; }

  // lag in [1, filled()]; lag 1 is the most recent entry.
  const Vec& state(int lag) const;
  const Vec& action(int lag) const;

  // Oldest-first copies (most recent last).
  std::vector<Vec> past_states() const;
  std::vector<Vec> past_actions() const;

 private:
  int slot(int lag) const;

  int n_x_ = 0;
  int n_u_ = 0;
  int capacity_ = 0;
  int filled_ = 0;
  int head_ = 0;  // index of the most recent entry
  std::vector<Vec> states_;
  std::vector<Vec> actions_;
};

struct DenseLayer {
  RowMat weight;  // out x in
  Vec bias;
};

struct Normalizer {
  Vec mean;
  Vec stddev;
};

// Partial derivatives of the predicted increment with respect to each raw
// input slot. state[l] is n_x x n_x for lag l, action[l] is n_x x n_u.
struct InputJacobian {
  std::vector<Mat> state;
  std::vector<Mat> action;
};

// Jacobian of the history-augmented map z_{t+1} = F(z_t, u_t) with
// z_t = [x_t, ..., x_{t-H}, u_{t-1}, ..., u_{t-H}].
struct AugmentedJacobian {
  Mat a;
  Mat b;
};

// Architecture and feature layout; everything needed to build an untrained
// model of the right shape.
struct ModelSpec {
  int state_dim = 0;
  int action_dim = 0;
  int history = 0;
  std::vector<StateFeature> features;  // one per state coordinate
  std::vector<int> hidden = {64, 64};

  int input_dim() const;
  void validate() const;
};

// Scratch buffers for batched evaluation; reuse across calls to avoid
// reallocation inside rollouts.
struct BatchWorkspace {
  std::vector<RowMat> act;
};

class DynamicsModel {
 public:
  DynamicsModel() = default;
  DynamicsModel(ModelSpec spec, std::vector<DenseLayer> layers, Normalizer in, Normalizer out);

  // Zero weights, unit normalizers.
  static DynamicsModel zeros(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  int state_dim() const { return spec_.state_dim; }
  int action_dim() const { return spec_.action_dim; }
  int history_len() const { return spec_.history; }
  int input_dim() const { return spec_.input_dim(); }
  int augmented_dim() const {
    return spec_.state_dim * (spec_.history + 1) + spec_.action_dim * spec_.history;
  }
  std::vector<int> layer_sizes() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  const Normalizer& input_normalizer() const { return in_; }
  const Normalizer& output_normalizer() const { return out_; }
  Activation activation() const { return Activation::kTanh; }
  std::vector<bool> angle_mask() const { return toast::angle_mask(spec_.features); }

  // x_{t+1} = x_t + denormalize(MLP(normalize(features(x_t, u_t, history)))).
  Vec forward(const Vec& state, const Vec& action, const HistoryWindow& history) const;

  // A = dx_{t+1}/dx_t, B = dx_{t+1}/du_t; history entries held fixed.
  std::pair<Mat, Mat> jacobians(const Vec& state, const Vec& action,
                                const HistoryWindow& history) const;

  AugmentedJacobian augmented_jacobian(const Vec& state, const Vec& action,
                                       const HistoryWindow& history) const;

  InputJacobian input_jacobian(const Vec& state, const Vec& action,
                               const HistoryWindow& history) const;

  // Writes the normalized network input for one sample into a strided
  // column (element r at dst[r * stride]).
  void write_input(const Vec& state, const Vec& action, const HistoryWindow& history, double* dst,
                   Eigen::Index stride) const;

  // Raw feature vector (before normalization) of a flattened raw input
  // [x_t..x_{t-H}, u_t..u_{t-H}]. Used by training.
  Vec features_from_raw(const Vec& raw) const;

  // Network output in normalized space for a batch of normalized inputs
  // (input_dim x K, row-major). Each column is computed with the same
  // accumulation order regardless of K.
  const RowMat& evaluate_batch(const RowMat& inputs, BatchWorkspace& ws) const;

  // Denormalized increment for column k of a normalized output batch.
  void increment_from_output(const RowMat& output, Eigen::Index k, Vec& increment) const;

  void validate() const;

 private:
  void check_dims(const Vec& state, const Vec& action, const HistoryWindow& history) const;

  ModelSpec spec_;
  std::vector<DenseLayer> layers_;
  Normalizer in_;
  Normalizer out_;
};

// out = W * in + b with a fixed per-column accumulation order; tanh applied
// when `squash` is set.
void dense_forward(const DenseLayer& layer, const RowMat& in, RowMat& out, bool squash);

}  // namespace toast

#endif  // TOAST_NN_DYNAMICS_HPP_
