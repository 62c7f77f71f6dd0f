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

#include "toast/nn_dynamics.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace toast {

int feature_width(const std::vector<StateFeature>& features) {
  int w = 0;
  for (StateFeature f : features) {
    if (f == StateFeature::kPlain) w += 1;
    if (f == StateFeature::kAngle) w += 2;
  }
  return w;
}

std::vector<bool> angle_mask(const std::vector<StateFeature>& features) {
  std::vector<bool> mask(features.size());
  for (size_t i = 0; i < features.size(); ++i) mask[i] = features[i] == StateFeature::kAngle;
  return mask;
}

// ---------------------------------------------------------------------------
// HistoryWindow

HistoryWindow::HistoryWindow(int n_x, int n_u, int capacity)
    : n_x_(n_x), n_u_(n_u), capacity_(capacity) {
  require(n_x > 0 && n_u > 0, "history window needs positive state/action dimensions");
  require(capacity >= 0, "history length must be nonnegative");
  states_.assign(capacity, Vec::Zero(n_x));
  actions_.assign(capacity, Vec::Zero(n_u));
}

void HistoryWindow::push(const Vec& state, const Vec& action) {
  require_dim(state.size(), n_x_, "history state");
  require_dim(action.size(), n_u_, "history action");
  if (capacity_ == 0) return;
  head_ = (head_ + 1) % capacity_;
  states_[head_] = state;
  actions_[head_] = action;
  if (filled_ < capacity_) ++filled_;
}

int HistoryWindow::slot(int lag) const {
  if (lag < 1 || lag > filled_) {
    throw ContractError("history lag " + std::to_string(lag) + " outside [1, " +
                        std::to_string(filled_) + "]");
  }
  return ((head_ - (lag - 1)) % capacity_ + capacity_) % capacity_;
}

const Vec& HistoryWindow::state(int lag) const { return states_[slot(lag)]; }
const Vec& HistoryWindow::action(int lag) const { return actions_[slot(lag)]; }

std::vector<Vec> HistoryWindow::past_states() const {
  std::vector<Vec> out;
  for (int lag = filled_; lag >= 1; --lag) out.push_back(state(lag));
  return out;
}

std::vector<Vec> HistoryWindow::past_actions() const {
  std::vector<Vec> out;
  for (int lag = filled_; lag >= 1; --lag) out.push_back(action(lag));
  return out;
}

// ---------------------------------------------------------------------------
// ModelSpec

int ModelSpec::input_dim() const {
  return (feature_width(features) + action_dim) * (history + 1);
}

void ModelSpec::validate() const {
  require(state_dim > 0, "state dimension must be positive");
  require(action_dim > 0, "action dimension must be positive");
  require(history >= 0, "history length must be nonnegative");
  require_dim(static_cast<Eigen::Index>(features.size()), state_dim, "state feature map");
  for (int h : hidden) require(h > 0, "hidden layer sizes must be positive");
}

// ---------------------------------------------------------------------------
// DynamicsModel

DynamicsModel::DynamicsModel(ModelSpec spec, std::vector<DenseLayer> layers, Normalizer in,
                             Normalizer out)
    : spec_(std::move(spec)), layers_(std::move(layers)), in_(std::move(in)), out_(std::move(out)) {
  validate();
}

DynamicsModel DynamicsModel::zeros(const ModelSpec& spec) {
  spec.validate();
  std::vector<DenseLayer> layers;
  int prev = spec.input_dim();
  std::vector<int> sizes = spec.hidden;
  sizes.push_back(spec.state_dim);
  for (int s : sizes) {
    layers.push_back({RowMat::Zero(s, prev), Vec::Zero(s)});
    prev = s;
  }
  Normalizer in{Vec::Zero(spec.input_dim()), Vec::Ones(spec.input_dim())};
  Normalizer out{Vec::Zero(spec.state_dim), Vec::Ones(spec.state_dim)};
  return DynamicsModel(spec, std::move(layers), std::move(in), std::move(out));
}

std::vector<int> DynamicsModel::layer_sizes() const {
  std::vector<int> sizes;
  sizes.push_back(input_dim());
  for (const auto& l : layers_) sizes.push_back(static_cast<int>(l.weight.rows()));
  return sizes;
}

void DynamicsModel::validate() const {
  spec_.validate();
  require(!layers_.empty(), "model needs at least one layer");
  require_dim(static_cast<Eigen::Index>(layers_.size()),
              static_cast<Eigen::Index>(spec_.hidden.size() + 1), "layer count");
  Eigen::Index prev = input_dim();
  for (size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    require_dim(l.weight.cols(), prev, "layer " + std::to_string(k) + " weight columns");
    require_dim(l.bias.size(), l.weight.rows(), "layer " + std::to_string(k) + " bias");
    if (k + 1 < layers_.size()) {
      require_dim(l.weight.rows(), spec_.hidden[k], "layer " + std::to_string(k) + " width");
    }
    prev = l.weight.rows();
  }
  require_dim(prev, state_dim(), "output layer");
  require_dim(in_.mean.size(), input_dim(), "input normalizer mean");
  require_dim(in_.stddev.size(), input_dim(), "input normalizer stddev");
  require_dim(out_.mean.size(), state_dim(), "output normalizer mean");
  require_dim(out_.stddev.size(), state_dim(), "output normalizer stddev");
  require((in_.stddev.array() > 0.0).all() && (out_.stddev.array() > 0.0).all(),
          "normalizer standard deviations must be strictly positive");
}

void DynamicsModel::check_dims(const Vec& state, const Vec& action,
                               const HistoryWindow& history) const {
  require_dim(state.size(), state_dim(), "state");
  require_dim(action.size(), action_dim(), "action");
  if (history_len() > 0) {
    require_dim(history.capacity(), history_len(), "history length");
    require_dim(history.state_dim(), state_dim(), "history state");
    require_dim(history.action_dim(), action_dim(), "history action");
  }
}

namespace {

// Appends the features of one state slot.
inline void put_state_features(const std::vector<StateFeature>& features, const Vec& x,
                               double* dst, Eigen::Index stride, Eigen::Index& row,
                               const Normalizer& in) {
  for (size_t i = 0; i < features.size(); ++i) {
    switch (features[i]) {
      case StateFeature::kPlain:
        dst[row * stride] = (x[i] - in.mean[row]) / in.stddev[row];
        ++row;
        break;
      case StateFeature::kAngle:
        dst[row * stride] = (std::sin(x[i]) - in.mean[row]) / in.stddev[row];
        ++row;
        dst[row * stride] = (std::cos(x[i]) - in.mean[row]) / in.stddev[row];
        ++row;
        break;
      case StateFeature::kDropped:
        break;
    }
  }
}

}  // namespace

void DynamicsModel::write_input(const Vec& state, const Vec& action, const HistoryWindow& history,
                                double* dst, Eigen::Index stride) const {
  const int H = history_len();
  const int fw = feature_width(spec_.features);
  Eigen::Index row = 0;
  put_state_features(spec_.features, state, dst, stride, row, in_);
  for (int lag = 1; lag <= H; ++lag) {
    if (lag <= history.filled()) {
      put_state_features(spec_.features, history.state(lag), dst, stride, row, in_);
    } else {
      for (int f = 0; f < fw; ++f) dst[(row++) * stride] = 0.0;
    }
  }
  for (int j = 0; j < action_dim(); ++j, ++row) {
    dst[row * stride] = (action[j] - in_.mean[row]) / in_.stddev[row];
  }
  for (int lag = 1; lag <= H; ++lag) {
    if (lag <= history.filled()) {
      const Vec& a = history.action(lag);
      for (int j = 0; j < action_dim(); ++j, ++row) {
        dst[row * stride] = (a[j] - in_.mean[row]) / in_.stddev[row];
      }
    } else {
      for (int j = 0; j < action_dim(); ++j) dst[(row++) * stride] = 0.0;
    }
  }
}

Vec DynamicsModel::features_from_raw(const Vec& raw) const {
  const int H = history_len();
  const int n_x = state_dim();
  const int n_u = action_dim();
  require_dim(raw.size(), (n_x + n_u) * (H + 1), "raw input");
  Vec f(input_dim());
  Eigen::Index row = 0;
  for (int lag = 0; lag <= H; ++lag) {
    for (int i = 0; i < n_x; ++i) {
      double v = raw[lag * n_x + i];
      switch (spec_.features[i]) {
        case StateFeature::kPlain:
          f[row++] = v;
          break;
        case StateFeature::kAngle:
          f[row++] = std::sin(v);
          f[row++] = std::cos(v);
          break;
        case StateFeature::kDropped:
          break;
      }
    }
  }
  f.tail(n_u * (H + 1)) = raw.tail(n_u * (H + 1));
  return f;
}

void dense_forward(const DenseLayer& layer, const RowMat& in, RowMat& out, bool squash) {
  const Eigen::Index rows = layer.weight.rows();
  const Eigen::Index cols = layer.weight.cols();
  const Eigen::Index K = in.cols();
  if (out.rows() != rows || out.cols() != K) out.resize(rows, K);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double* o = out.data() + i * K;
    const double b = layer.bias[i];
    for (Eigen::Index k = 0; k < K; ++k) o[k] = b;
    const double* w = layer.weight.data() + i * cols;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double wij = w[j];
      const double* h = in.data() + j * K;
      for (Eigen::Index k = 0; k < K; ++k) o[k] += wij * h[k];
    }
    if (squash) {
      for (Eigen::Index k = 0; k < K; ++k) o[k] = std::tanh(o[k]);
    }
  }
}

const RowMat& DynamicsModel::evaluate_batch(const RowMat& inputs, BatchWorkspace& ws) const {
  require_dim(inputs.rows(), input_dim(), "network input");
  ws.act.resize(layers_.size());
  const RowMat* prev = &inputs;
  for (size_t l = 0; l < layers_.size(); ++l) {
    dense_forward(layers_[l], *prev, ws.act[l], l + 1 < layers_.size());
    prev = &ws.act[l];
  }
  return ws.act.back();
}

void DynamicsModel::increment_from_output(const RowMat& output, Eigen::Index k,
                                          Vec& increment) const {
  increment.resize(state_dim());
  for (int i = 0; i < state_dim(); ++i) {
    increment[i] = out_.mean[i] + out_.stddev[i] * output(i, k);
  }
}

Vec DynamicsModel::forward(const Vec& state, const Vec& action,
                           const HistoryWindow& history) const {
  check_dims(state, action, history);
  RowMat input(input_dim(), 1);
  write_input(state, action, history, input.data(), 1);
  BatchWorkspace ws;
  const RowMat& y = evaluate_batch(input, ws);
  Vec inc;
  increment_from_output(y, 0, inc);
  return state + inc;
}

InputJacobian DynamicsModel::input_jacobian(const Vec& state, const Vec& action,
                                            const HistoryWindow& history) const {
  check_dims(state, action, history);
  const int H = history_len();
  const int n_x = state_dim();
  const int n_u = action_dim();

  RowMat input(input_dim(), 1);
  write_input(state, action, history, input.data(), 1);
  BatchWorkspace ws;
  evaluate_batch(input, ws);

  // d(normalized output)/d(normalized input), chained backwards through the
  // tanh layers: J = W_L D_{L-1} W_{L-1} ... D_1 W_1.
  Mat J = layers_[0].weight;
  for (size_t l = 1; l < layers_.size(); ++l) {
    const auto& h = ws.act[l - 1];
    for (Eigen::Index r = 0; r < J.rows(); ++r) J.row(r) *= 1.0 - h(r, 0) * h(r, 0);
    J = layers_[l].weight * J;
  }
  // Denormalize the output and undo the input scaling.
  for (int i = 0; i < n_x; ++i) J.row(i) *= out_.stddev[i];
  for (Eigen::Index c = 0; c < J.cols(); ++c) J.col(c) /= in_.stddev[c];

  InputJacobian out;
  out.state.assign(H + 1, Mat::Zero(n_x, n_x));
  out.action.assign(H + 1, Mat::Zero(n_x, n_u));
  Eigen::Index col = 0;
  for (int lag = 0; lag <= H; ++lag) {
    const bool live = lag == 0 || lag <= history.filled();
    const Vec* x = lag == 0 ? &state : (live ? &history.state(lag) : nullptr);
    for (int i = 0; i < n_x; ++i) {
      switch (spec_.features[i]) {
        case StateFeature::kPlain:
          if (live) out.state[lag].col(i) = J.col(col);
          col += 1;
          break;
        case StateFeature::kAngle:
          if (live) {
            const double th = (*x)[i];
            out.state[lag].col(i) = std::cos(th) * J.col(col) - std::sin(th) * J.col(col + 1);
          }
          col += 2;
          break;
        case StateFeature::kDropped:
          break;
      }
    }
  }
  for (int lag = 0; lag <= H; ++lag) {
    const bool live = lag == 0 || lag <= history.filled();
    if (live) out.action[lag] = J.middleCols(col, n_u);
    col += n_u;
  }
  return out;
}

std::pair<Mat, Mat> DynamicsModel::jacobians(const Vec& state, const Vec& action,
                                             const HistoryWindow& history) const {
  InputJacobian d = input_jacobian(state, action, history);
  Mat A = Mat::Identity(state_dim(), state_dim()) + d.state[0];
  return {std::move(A), std::move(d.action[0])};
}

AugmentedJacobian DynamicsModel::augmented_jacobian(const Vec& state, const Vec& action,
                                                    const HistoryWindow& history) const {
  const int H = history_len();
  if (H == 0) {
    throw ContractError("augmented_jacobian requires history length >= 1; use jacobians()");
  }
  InputJacobian d = input_jacobian(state, action, history);
  const int n_x = state_dim();
  const int n_u = action_dim();
  const int n_z = augmented_dim();
  const int u_off = n_x * (H + 1);

  AugmentedJacobian aug{Mat::Zero(n_z, n_z), Mat::Zero(n_z, n_u)};
  // Network row: x_{t+1} = x_t + g(x_t..x_{t-H}, u_t..u_{t-H}).
  for (int lag = 0; lag <= H; ++lag) aug.a.block(0, lag * n_x, n_x, n_x) = d.state[lag];
  aug.a.block(0, 0, n_x, n_x) += Mat::Identity(n_x, n_x);
  for (int lag = 1; lag <= H; ++lag) {
    aug.a.block(0, u_off + (lag - 1) * n_u, n_x, n_u) = d.action[lag];
  }
  aug.b.topRows(n_x) = d.action[0];
  // State shift: slot k at t+1 holds slot k-1 at t.
  for (int k = 1; k <= H; ++k) {
    aug.a.block(k * n_x, (k - 1) * n_x, n_x, n_x) = Mat::Identity(n_x, n_x);
  }
  // Action shift: newest slot receives u_t, the rest move down one lag.
  aug.b.block(u_off, 0, n_u, n_u) = Mat::Identity(n_u, n_u);
  for (int k = 2; k <= H; ++k) {
    aug.a.block(u_off + (k - 1) * n_u, u_off + (k - 2) * n_u, n_u, n_u) =
        Mat::Identity(n_u, n_u);
  }
  return aug;
}

}  // namespace toast
