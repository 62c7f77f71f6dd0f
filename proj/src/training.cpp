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

#include "toast/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace toast {

void TrainConfig::validate() const {
  require(batch_size >= 1, "batch_size must be positive");
  require(epochs >= 1, "epochs must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  require(adam_epsilon > 0.0, "adam_epsilon must be positive");
  require(validation_fraction > 0.0 && validation_fraction < 1.0,
          "validation_fraction must lie in (0, 1)");
  require(lr_final_factor > 0.0 && lr_final_factor <= 1.0, "lr_final_factor must lie in (0, 1]");
}

double TrainReport::final_validation_rmse() const {
  return validation_loss.empty() ? 0.0 : std::sqrt(validation_loss.back());
}

namespace {

constexpr double kStdFloor = 1e-6;

Normalizer fit_normalizer(const Mat& data) {  // features x samples
  const double n = static_cast<double>(data.cols());
  Normalizer norm;
  norm.mean = data.rowwise().sum() / n;
  norm.stddev.resize(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    double var = (data.row(i).array() - norm.mean[i]).square().sum() / n;
    double s = std::sqrt(var);
    norm.stddev[i] = s < kStdFloor ? 1.0 : s;
  }
  return norm;
}

struct AdamSlot {
  Mat m_w, v_w;
  Vec m_b, v_b;
};

// Forward pass on a column-major batch; keeps activations for backprop.
Mat forward_batch(const std::vector<DenseLayer>& layers, const Mat& x, std::vector<Mat>& acts) {
  acts.resize(layers.size() + 1);
  acts[0] = x;
  for (size_t l = 0; l < layers.size(); ++l) {
    Mat z = layers[l].weight * acts[l];
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) z = z.array().tanh();
    acts[l + 1] = std::move(z);
  }
  return acts.back();
}

double batch_mse(const std::vector<DenseLayer>& layers, const Mat& x, const Mat& y) {
  if (x.cols() == 0) return 0.0;
  std::vector<Mat> acts;
  Mat pred = forward_batch(layers, x, acts);
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

std::pair<DynamicsModel, TrainReport> train(const std::vector<TransitionSample>& dataset,
                                            const ModelSpec& spec, const TrainConfig& config) {
  spec.validate();
  config.validate();
  if (dataset.empty()) throw ContractError("training dataset is empty");
  if (dataset.size() < 2) throw ContractError("training needs at least two samples");

  const int n_raw = (spec.state_dim + spec.action_dim) * (spec.history + 1);
  const DynamicsModel shape = DynamicsModel::zeros(spec);
  const int n_in = spec.input_dim();
  const int n_out = spec.state_dim;
  const Eigen::Index N = static_cast<Eigen::Index>(dataset.size());

  Mat features(n_in, N);
  Mat targets(n_out, N);
  for (Eigen::Index k = 0; k < N; ++k) {
    const auto& s = dataset[k];
    require_dim(s.input.size(), n_raw, "sample " + std::to_string(k) + " input");
    require_dim(s.target.size(), n_out, "sample " + std::to_string(k) + " target");
    if (!s.input.allFinite() || !s.target.allFinite()) {
      throw ContractError("sample " + std::to_string(k) + " has non-finite values");
    }
    features.col(k) = shape.features_from_raw(s.input);
    targets.col(k) = s.target;
  }

  std::mt19937_64 rng(config.rng_seed);
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Eigen::Index n_val =
      std::clamp<Eigen::Index>(std::llround(config.validation_fraction * N), 1, N - 1);
  Eigen::Index n_train = N - n_val;

  Mat x_train(n_in, n_train), y_train(n_out, n_train);
  Mat x_val(n_in, n_val), y_val(n_out, n_val);
  for (Eigen::Index i = 0; i < n_train; ++i) {
    x_train.col(i) = features.col(order[i]);
    y_train.col(i) = targets.col(order[i]);
  }
  for (Eigen::Index i = 0; i < n_val; ++i) {
    x_val.col(i) = features.col(order[n_train + i]);
    y_val.col(i) = targets.col(order[n_train + i]);
  }

  Normalizer in = fit_normalizer(x_train);
  Normalizer out = fit_normalizer(y_train);
  auto normalize = [](Mat& m, const Normalizer& n) {
    m.colwise() -= n.mean;
    m.array().colwise() /= n.stddev.array();
  };
  normalize(x_train, in);
  normalize(x_val, in);
  normalize(y_train, out);
  normalize(y_val, out);

  // Xavier-uniform weights, zero biases.
  std::vector<DenseLayer> layers;
  std::vector<int> sizes = {n_in};
  sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
  sizes.push_back(n_out);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double a = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
    std::uniform_real_distribution<double> init(-a, a);
    DenseLayer layer{RowMat(sizes[l + 1], sizes[l]), Vec::Zero(sizes[l + 1])};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = init(rng);
    layers.push_back(std::move(layer));
  }
  std::vector<AdamSlot> adam(layers.size());
  for (size_t l = 0; l < layers.size(); ++l) {
    adam[l].m_w = Mat::Zero(layers[l].weight.rows(), layers[l].weight.cols());
    adam[l].v_w = adam[l].m_w;
    adam[l].m_b = Vec::Zero(layers[l].bias.size());
    adam[l].v_b = adam[l].m_b;
  }

  TrainReport report;
  report.train_count = static_cast<int>(n_train);
  report.validation_count = static_cast<int>(n_val);

  std::vector<Eigen::Index> perm(n_train);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Mat> acts;
  std::vector<Mat> grad_w(layers.size());
  std::vector<Vec> grad_b(layers.size());
  long step = 0;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr =
        config.epochs > 1
            ? config.learning_rate *
                  std::pow(config.lr_final_factor, static_cast<double>(epoch) / (config.epochs - 1))
            : config.learning_rate;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index start = 0; start < n_train; start += config.batch_size) {
      const Eigen::Index B = std::min<Eigen::Index>(config.batch_size, n_train - start);
      Mat xb(n_in, B), yb(n_out, B);
      for (Eigen::Index i = 0; i < B; ++i) {
        xb.col(i) = x_train.col(perm[start + i]);
        yb.col(i) = y_train.col(perm[start + i]);
      }
      Mat pred = forward_batch(layers, xb, acts);
      // d(mean squared error)/d(pred)
      Mat delta = (pred - yb) * (2.0 / static_cast<double>(pred.size()));
      for (size_t l = layers.size(); l-- > 0;) {
        grad_w[l] = delta * acts[l].transpose();
        grad_b[l] = delta.rowwise().sum();
        if (l > 0) {
          Mat back = layers[l].weight.transpose() * delta;
          delta = back.array() * (1.0 - acts[l].array().square());
        }
      }
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      for (size_t l = 0; l < layers.size(); ++l) {
        auto& s = adam[l];
        s.m_w = b1 * s.m_w + (1.0 - b1) * grad_w[l];
        s.v_w = b2 * s.v_w + (1.0 - b2) * grad_w[l].cwiseAbs2();
        s.m_b = b1 * s.m_b + (1.0 - b1) * grad_b[l];
        s.v_b = b2 * s.v_b + (1.0 - b2) * grad_b[l].cwiseAbs2();
        layers[l].weight.array() -=
            lr * (s.m_w.array() / c1) / ((s.v_w.array() / c2).sqrt() + config.adam_epsilon);
        layers[l].bias.array() -=
            lr * (s.m_b.array() / c1) / ((s.v_b.array() / c2).sqrt() + config.adam_epsilon);
      }
    }
    report.train_loss.push_back(batch_mse(layers, x_train, y_train));
    report.validation_loss.push_back(batch_mse(layers, x_val, y_val));
  }

  return {DynamicsModel(spec, std::move(layers), std::move(in), std::move(out)), std::move(report)};
}

double normalized_mse(const DynamicsModel& model, const std::vector<TransitionSample>& samples) {
  if (samples.empty()) return 0.0;
  const int H = model.history_len();
  const int n_x = model.state_dim();
  const int n_u = model.action_dim();
  const auto& out = model.output_normalizer();
  double total = 0.0;
  for (const auto& s : samples) {
    require_dim(s.input.size(), (n_x + n_u) * (H + 1), "sample input");
    HistoryWindow hist(n_x, n_u, H);
    for (int lag = H; lag >= 1; --lag) {
      hist.push(s.input.segment(lag * n_x, n_x), s.input.segment(n_x * (H + 1) + lag * n_u, n_u));
    }
    const Vec x = s.input.head(n_x);
    const Vec u = s.input.segment(n_x * (H + 1), n_u);
    Vec inc = model.forward(x, u, hist) - x;
    Vec err = ((inc - s.target).array() / out.stddev.array()).matrix();
    total += err.squaredNorm();
  }
  return total / (static_cast<double>(samples.size()) * n_x);
}

}  // namespace toast
