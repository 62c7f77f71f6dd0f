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

#ifndef TOAST_TRAINING_HPP_
#define TOAST_TRAINING_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "toast/nn_dynamics.hpp"

namespace toast {

// One supervised example. `input` is the raw flattened vector
// [x_t..x_{t-H}, u_t..u_{t-H}]; `target` is x_{t+1} - x_t (angles wrapped).
struct TransitionSample {
  Vec input;
  Vec target;
};

struct TrainConfig {
  int batch_size = 256;
  int epochs = 200;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double validation_fraction = 0.1;
  std::uint64_t rng_seed = 0;
  // Learning rate decays geometrically to learning_rate * lr_final_factor at
  // the last epoch. 1.0 keeps it constant.
  double lr_final_factor = 1.0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;       // full training-split MSE after each epoch
  std::vector<double> validation_loss;  // normalized MSE on the held-out split
  int train_count = 0;
  int validation_count = 0;

  double final_validation_rmse() const;
};

std::pair<DynamicsModel, TrainReport> train(const std::vector<TransitionSample>& dataset,
                                            const ModelSpec& spec, const TrainConfig& config);

// Mean squared error of normalized increments (model's output normalizer).
double normalized_mse(const DynamicsModel& model, const std::vector<TransitionSample>& samples);

}  // namespace toast

#endif  // TOAST_TRAINING_HPP_
