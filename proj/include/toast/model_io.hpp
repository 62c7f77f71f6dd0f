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

#ifndef TOAST_MODEL_IO_HPP_
#define TOAST_MODEL_IO_HPP_

#include <string>

#include "toast/nn_dynamics.hpp"

namespace toast {

// Binary model file, little-endian. Layout is documented in
// docs/model_format.md.
inline constexpr char kModelMagic[8] = {'T', 'O', 'A', 'S', 'T', 'N', 'N', '1'};

std::string serialize_model(const DynamicsModel& model);
DynamicsModel deserialize_model(const std::string& bytes);

void save_model(const DynamicsModel& model, const std::string& path);
DynamicsModel load_model(const std::string& path);

}  // namespace toast

#endif  // TOAST_MODEL_IO_HPP_
