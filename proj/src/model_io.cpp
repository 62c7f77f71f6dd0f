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

#include "toast/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace toast {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, size_t n) { buf_.append(p, n); }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(b_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  size_t remaining() const { return b_.size() - pos_; }

  void need(size_t n) const {
    if (remaining() < n) throw FormatError("model file truncated");
  }

 private:
  const std::string& b_;
  size_t pos_ = 0;
};

Vec read_vec(Reader& r, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = r.f64();
  return v;
}

}  // namespace

std::string serialize_model(const DynamicsModel& model) {
  Writer w;
  w.raw(kModelMagic, sizeof(kModelMagic));
  const auto sizes = model.layer_sizes();
  w.u32(static_cast<std::uint32_t>(model.state_dim()));
  w.u32(static_cast<std::uint32_t>(model.action_dim()));
  w.u32(static_cast<std::uint32_t>(model.history_len()));
  w.u32(static_cast<std::uint32_t>(model.activation()));
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (int s : sizes) w.u32(static_cast<std::uint32_t>(s));
  for (StateFeature f : model.spec().features) w.u8(static_cast<std::uint8_t>(f));

  std::uint64_t payload = 2 * static_cast<std::uint64_t>(model.input_dim()) +
                          2 * static_cast<std::uint64_t>(model.state_dim());
  for (const auto& l : model.layers()) payload += l.weight.size() + l.bias.size();
  w.u64(payload);

  auto put = [&w](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v.data()[i]);
  };
  put(model.input_normalizer().mean);
  put(model.input_normalizer().stddev);
  put(model.output_normalizer().mean);
  put(model.output_normalizer().stddev);
  for (const auto& l : model.layers()) {
    put(l.weight);  // row-major storage
    put(l.bias);
  }
  return w.take();
}

DynamicsModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < sizeof(kModelMagic)) throw FormatError("model file truncated");
  if (std::memcmp(bytes.data(), kModelMagic, 7) != 0) {
    throw FormatError("not a TOAST model file (bad magic)");
  }
  if (bytes[7] != kModelMagic[7]) {
    throw FormatError(std::string("unsupported model file version '") + bytes[7] + "'");
  }
  std::string body = bytes.substr(sizeof(kModelMagic));
  Reader r(body);

  ModelSpec spec;
  spec.state_dim = static_cast<int>(r.u32());
  spec.action_dim = static_cast<int>(r.u32());
  spec.history = static_cast<int>(r.u32());
  const std::uint32_t act = r.u32();
  if (act != static_cast<std::uint32_t>(Activation::kTanh)) {
    throw FormatError("unknown activation id " + std::to_string(act));
  }
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 64) throw FormatError("implausible layer count");
  if (spec.state_dim <= 0 || spec.state_dim > 4096 || spec.action_dim <= 0 ||
      spec.action_dim > 4096 || spec.history < 0 || spec.history > 4096) {
    throw FormatError("implausible model dimensions in header");
  }
  std::vector<int> sizes(n_layers + 1);
  for (auto& s : sizes) {
    s = static_cast<int>(r.u32());
    if (s <= 0 || s > (1 << 20)) throw FormatError("implausible layer size in header");
  }
  spec.features.resize(spec.state_dim);
  for (auto& f : spec.features) {
    std::uint8_t v = r.u8();
    if (v > 2) throw FormatError("unknown state feature kind " + std::to_string(v));
    f = static_cast<StateFeature>(v);
  }
  spec.hidden.assign(sizes.begin() + 1, sizes.end() - 1);

  if (sizes.front() != spec.input_dim()) {
    throw DimensionError("declared input width " + std::to_string(sizes.front()) +
                         " does not match feature layout width " +
                         std::to_string(spec.input_dim()));
  }
  if (sizes.back() != spec.state_dim) {
    throw DimensionError("declared output width does not match state dimension");
  }
  const std::uint64_t declared = r.u64();
  std::uint64_t implied = 2 * static_cast<std::uint64_t>(sizes.front()) +
                          2 * static_cast<std::uint64_t>(spec.state_dim);
  for (size_t k = 0; k + 1 < sizes.size(); ++k) {
    implied += static_cast<std::uint64_t>(sizes[k + 1]) * (sizes[k] + 1);
  }
  if (declared != implied) {
    throw DimensionError("payload length " + std::to_string(declared) +
                         " disagrees with layer dimensions (expected " + std::to_string(implied) +
                         ")");
  }
  if (r.remaining() < declared * 8) throw FormatError("model file truncated");
  if (r.remaining() > declared * 8) throw FormatError("trailing bytes after model payload");

  Normalizer in{read_vec(r, sizes.front()), read_vec(r, sizes.front())};
  Normalizer out{read_vec(r, spec.state_dim), read_vec(r, spec.state_dim)};
  std::vector<DenseLayer> layers;
  for (size_t k = 0; k + 1 < sizes.size(); ++k) {
    DenseLayer l{RowMat(sizes[k + 1], sizes[k]), Vec(sizes[k + 1])};
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = r.f64();
    l.bias = read_vec(r, sizes[k + 1]);
    layers.push_back(std::move(l));
  }
  if ((in.stddev.array() <= 0.0).any() || (out.stddev.array() <= 0.0).any()) {
    throw FormatError("normalizer standard deviation must be positive");
  }
  return DynamicsModel(std::move(spec), std::move(layers), std::move(in), std::move(out));
}

void save_model(const DynamicsModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_model(model);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write to '" + path + "' failed");
}

DynamicsModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace toast
