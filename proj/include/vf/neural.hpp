// Copyright 2026 The vfhand Authors.
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

// Minimal differentiable MLP core: dense networks with reverse-mode
// gradients, an adaptive first-order optimizer, and versioned binary
// checkpoints. Everything is 64-bit; batches are row-major (one sample per
// row, Eigen matrices as the tensor type). Evaluation is pure and thread
// safe; training mutates one network under exclusive access.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vf/common.hpp"

namespace vf {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Activation : uint8_t { None = 0, ReLU = 1, Tanh = 2 };

// Dense network shape: widths[0] is the input dimension, widths.back() the
// output dimension; `hidden` applies to every layer but the last, `output`
// to the last (None or Tanh).
struct MlpSpec {
  std::vector<int> widths;
  Activation hidden = Activation::ReLU;
  Activation output = Activation::None;

  bool operator==(const MlpSpec&) const = default;
};

inline void validate_spec(const MlpSpec& spec) {
  if (spec.widths.size() < 2)
    throw std::invalid_argument("MlpSpec: need at least input and output widths");
  for (const int w : spec.widths)
    if (w <= 0) throw std::invalid_argument("MlpSpec: widths must be positive");
  if (spec.hidden == Activation::None && spec.widths.size() > 2)
    throw std::invalid_argument("MlpSpec: hidden layers need a nonlinearity");
}

namespace detail {

inline Mat apply_activation(Activation a, Mat z) {
  switch (a) {
    case Activation::None: return z;
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
  }
  throw std::logic_error("unknown activation");
}

// Derivative of the activation expressed through its pre-activation input.
inline Mat activation_grad(Activation a, const Mat& z) {
  switch (a) {
    case Activation::None: return Mat::Ones(z.rows(), z.cols());
    case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
  }
  throw std::logic_error("unknown activation");
}

}  // namespace detail

// Activations recorded by a cached forward pass, consumed by backward().
struct MlpCache {
  Mat input;
  std::vector<Mat> pre;  // pre-activation of every layer
};

// A dense network with flat parameter storage. Layer l maps width[l] ->
// width[l+1] through y = act(x W_l^T + b_l); the flat buffer holds
// [W_0 (col-major), b_0, W_1, b_1, ...] so optimizers and checkpoints see a
// single contiguous vector.
class Mlp {
 public:
  Mlp() = default;

  // He-style fan-in initialization (gain 2 under ReLU, 1 otherwise), zero
  // biases. Deterministic for a given generator state.
  Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
    validate_spec(spec_);
    params_ = Vec::Zero(static_cast<Eigen::Index>(count_params(spec_)));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
      const bool last = l + 2 == spec_.widths.size();
      const Activation act = last ? spec_.output : spec_.hidden;
      const double gain = act == Activation::ReLU ? 2.0 : 1.0;
      const double sigma = std::sqrt(gain / spec_.widths[l]);
      auto w = weight(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = sigma * unit(rng);
    }
  }

  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    validate_spec(spec_);
    params_ = Vec::Zero(static_cast<Eigen::Index>(count_params(spec_)));
  }

  static size_t count_params(const MlpSpec& spec) {
    size_t n = 0;
    for (size_t l = 0; l + 1 < spec.widths.size(); ++l)
      n += static_cast<size_t>(spec.widths[l + 1]) * spec.widths[l] + spec.widths[l + 1];
    return n;
  }

  const MlpSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.widths.front(); }
  int output_dim() const { return spec_.widths.back(); }
  size_t layer_count() const { return spec_.widths.size() - 1; }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  Eigen::Map<Mat> weight(size_t layer) {
    const auto [off, rows, cols] = weight_slot(layer);
    return {params_.data() + off, rows, cols};
  }
  Eigen::Map<const Mat> weight(size_t layer) const {
    const auto [off, rows, cols] = weight_slot(layer);
    return {params_.data() + off, rows, cols};
  }
  Eigen::Map<Vec> bias(size_t layer) {
    const auto [off, rows] = bias_slot(layer);
    return {params_.data() + off, rows};
  }
  Eigen::Map<const Vec> bias(size_t layer) const {
    const auto [off, rows] = bias_slot(layer);
    return {params_.data() + off, rows};
  }

  // Batched evaluation: input is (N x in), the result (N x out).
  Mat forward(const Mat& x) const { return run(x, nullptr); }
  Mat forward(const Mat& x, MlpCache& cache) const { return run(x, &cache); }

  // Reverse pass. `d_out` is dL/dy from the caller (N x out). Parameter
  // gradients are accumulated into `grad` (sized like params, caller zeroes
  // it); the return value is dL/dx.
  Mat backward(const MlpCache& cache, const Mat& d_out, Vec& grad) const {
    if (grad.size() != params_.size())
      throw std::invalid_argument("Mlp::backward: gradient buffer size mismatch");
    Mat delta = d_out;
    const size_t layers = layer_count();
    for (size_t l = layers; l-- > 0;) {
      const Activation act = l + 1 == layers ? spec_.output : spec_.hidden;
      delta = delta.cwiseProduct(detail::activation_grad(act, cache.pre[l]));
      const Mat x = l == 0 ? cache.input : post_activation(cache, l - 1);
      const auto [woff, rows, cols] = weight_slot(l);
      const auto [boff, brows] = bias_slot(l);
      Eigen::Map<Mat>(grad.data() + woff, rows, cols).noalias() += delta.transpose() * x;
      Eigen::Map<Vec>(grad.data() + boff, brows) += delta.colwise().sum().transpose();
      delta = delta * weight(l);  // dL/d(input of layer l)
    }
    return delta;
  }

 private:
  Mat post_activation(const MlpCache& cache, size_t layer) const {
    const Activation act = layer + 1 == layer_count() ? spec_.output : spec_.hidden;
    return detail::apply_activation(act, cache.pre[layer]);
  }

  Mat run(const Mat& x, MlpCache* cache) const {
    if (x.cols() != input_dim())
      throw std::invalid_argument("Mlp::forward: input width " + std::to_string(x.cols()) +
                                  " != " + std::to_string(input_dim()));
    if (cache) {
      cache->input = x;
      cache->pre.clear();
      cache->pre.reserve(layer_count());
    }
    Mat h = x;
    for (size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
      Mat z = (h * weight(l).transpose()).rowwise() + bias(l).transpose();
      if (cache) cache->pre.push_back(z);
      const bool last = l + 2 == spec_.widths.size();
      h = detail::apply_activation(last ? spec_.output : spec_.hidden, std::move(z));
    }
    return h;
  }

  std::tuple<Eigen::Index, Eigen::Index, Eigen::Index> weight_slot(size_t layer) const {
    Eigen::Index off = 0;
    for (size_t l = 0; l < layer; ++l)
      off += static_cast<Eigen::Index>(spec_.widths[l + 1]) * spec_.widths[l] +
             spec_.widths[l + 1];
    return {off, spec_.widths[layer + 1], spec_.widths[layer]};
  }
  std::pair<Eigen::Index, Eigen::Index> bias_slot(size_t layer) const {
    const auto [off, rows, cols] = weight_slot(layer);
    return {off + rows * cols, rows};
  }

  MlpSpec spec_;
  Vec params_;
};

// ---------------------------------------------------------------------------
// Adaptive-moment optimizer (bias-corrected).

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(Eigen::Index n, AdamConfig cfg = {})
      : cfg_(cfg), m_(Vec::Zero(n)), v_(Vec::Zero(n)) {}

  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }

  void step(Vec& params, const Vec& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw std::invalid_argument("Adam::step: size mismatch");
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    params.array() -=
        cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
  }

 private:
  AdamConfig cfg_;
  Vec m_, v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints: magic, format version, spec, flat parameters, CRC-32 trailer.
// Round-trips bit-exactly.

inline constexpr char kMlpMagic[4] = {'V', 'F', 'N', '1'};

inline void save_mlp(const Mlp& net, ByteWriter& w) {
  w.magic(kMlpMagic);
  w.u32(1);  // format version
  w.u8(static_cast<uint8_t>(net.spec().hidden));
  w.u8(static_cast<uint8_t>(net.spec().output));
  w.u32(static_cast<uint32_t>(net.spec().widths.size()));
  for (const int width : net.spec().widths) w.i32(width);
  w.u64(static_cast<uint64_t>(net.params().size()));
  w.raw(net.params().data(), sizeof(double) * net.params().size());
}

inline void save_mlp(const Mlp& net, const std::string& path) {
  ByteWriter w;
  save_mlp(net, w);
  w.finish_with_crc();
  w.write_file(path);
}

inline Mlp load_mlp(ByteReader& r) {
  r.expect_magic(kMlpMagic);
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  MlpSpec spec;
  spec.hidden = static_cast<Activation>(r.u8());
  spec.output = static_cast<Activation>(r.u8());
  const uint32_t n = r.u32();
  spec.widths.resize(n);
  for (uint32_t i = 0; i < n; ++i) spec.widths[i] = r.i32();
  Mlp net(spec);
  const uint64_t count = r.u64();
  if (count != static_cast<uint64_t>(net.params().size()))
    throw std::runtime_error("corrupt checkpoint: parameter count mismatch");
  r.raw(net.params().data(), sizeof(double) * count);
  return net;
}

inline Mlp load_mlp(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.verify_crc_trailer();
  return load_mlp(r);
}

}  // namespace vf
