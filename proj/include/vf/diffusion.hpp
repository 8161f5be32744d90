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

// Conditional diffusion policy. A denoising diffusion model approximates the
// conditional action distribution p(a | o): hybrid actions are encoded into
// [-1, 1]^2 codes, noised by a fixed schedule, and a noise-prediction MLP
// (conditioned on the normalized observation and a sinusoidal embedding of
// the diffusion step) is trained to invert the corruption. Sim and real
// demonstrations co-train the same network by mixing batch elements from the
// two sources with equal probability.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vf/common.hpp"
#include "vf/demos.hpp"
#include "vf/neural.hpp"
#include "vf/task.hpp"

namespace vf {

// ---------------------------------------------------------------------------
// Noise schedule.

// Per-step constants of the denoising process, indexed 1..steps; index 0 is
// the conventional pre-noise state (alpha_bar[0] = 1), which also makes the
// final denoise step deterministic (sigma[1] = 0).
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;  // running product of alpha
  std::vector<double> sigma;      // reverse-step noise scale

  // Linear beta ramp, rescaled so that a short schedule accumulates the same
  // total corruption as the conventional `reference_steps`-step one (betas
  // are clipped below 1 so every alpha stays positive).
  static NoiseSchedule linear(int K = 50, double beta_lo = 1e-4, double beta_hi = 0.02,
                              int reference_steps = 1000) {
    if (K < 1) throw std::invalid_argument("NoiseSchedule: step count must be positive");
    NoiseSchedule s;
    s.steps = K;
    s.alpha.assign(K + 1, 1.0);
    s.alpha_bar.assign(K + 1, 1.0);
    s.sigma.assign(K + 1, 0.0);
    const double scale = static_cast<double>(reference_steps) / K;
    for (int k = 1; k <= K; ++k) {
      const double t = K == 1 ? 0.0 : static_cast<double>(k - 1) / (K - 1);
      const double beta = std::min((beta_lo + t * (beta_hi - beta_lo)) * scale, 0.999);
      s.alpha[k] = 1.0 - beta;
      s.alpha_bar[k] = s.alpha_bar[k - 1] * s.alpha[k];
      // sigma_k^2 = (1 - alpha_k)(1 - alpha_bar_{k-1}) / (1 - alpha_bar_k);
      // alpha_bar[0] = 1 zeroes it at k = 1.
      s.sigma[k] = std::sqrt(beta * (1.0 - s.alpha_bar[k - 1]) / (1.0 - s.alpha_bar[k]));
    }
    return s;
  }
};

inline void check_step_index(const NoiseSchedule& s, int k, const char* who) {
  if (k < 1 || k > s.steps)
    throw std::out_of_range(std::string(who) + ": diffusion step index out of range");
}

// ---------------------------------------------------------------------------
// Hybrid-action codec: both components live in [-1, 1].

inline constexpr int kActionCodeDim = 2;
using ActionVec = std::array<double, kActionCodeDim>;

inline ActionVec encode_action(const HybridAction& a) {
  if (!action_valid(a)) throw std::invalid_argument("encode_action: invalid action");
  return {(a.mode - 2.5) / 2.5, 2.0 * a.delta / kActionDeltaMax - 1.0};
}

// Total: any real-valued sample decodes to an in-bounds action (non-finite
// components fall back to the center of the range).
inline HybridAction decode_action(const ActionVec& v) {
  const double m = std::isfinite(v[0]) ? v[0] : 0.0;
  const double d = std::isfinite(v[1]) ? v[1] : 0.0;
  HybridAction a;
  a.mode = static_cast<int>(std::clamp(std::round(2.5 * m + 2.5), 0.0, 5.0));
  a.delta = std::clamp((d + 1.0) / 2.0, 0.0, 1.0) * kActionDeltaMax;
  return a;
}

// ---------------------------------------------------------------------------
// Forward corruption and reverse denoising.

// x_k = sqrt(alpha_bar_k) * a0 + sqrt(1 - alpha_bar_k) * eps.
inline ActionVec forward_diffuse(const ActionVec& a0, int k, const ActionVec& eps,
                                 const NoiseSchedule& s) {
  check_step_index(s, k, "forward_diffuse");
  const double c0 = std::sqrt(s.alpha_bar[k]);
  const double ce = std::sqrt(1.0 - s.alpha_bar[k]);
  return {c0 * a0[0] + ce * eps[0], c0 * a0[1] + ce * eps[1]};
}

// Deterministic part of the reverse step:
// x_{k-1} = x_k / sqrt(alpha_k) - (1 - alpha_k) / (sqrt(1 - alpha_bar_k) *
// sqrt(alpha_k)) * eps_hat. Operates on whole rows so action chunks of any
// width share the path.
inline Eigen::RowVectorXd reverse_step_mean(const Eigen::RowVectorXd& x,
                                            const Eigen::RowVectorXd& eps_hat, int k,
                                            const NoiseSchedule& s) {
  check_step_index(s, k, "reverse_step_mean");
  const double a = s.alpha[k];
  const double cx = 1.0 / std::sqrt(a);
  const double ce = (1.0 - a) / (std::sqrt(1.0 - s.alpha_bar[k]) * std::sqrt(a));
  return cx * x - ce * eps_hat;
}

// ---------------------------------------------------------------------------
// Noise-prediction network.

inline constexpr int kTimestepEmbedDim = 64;

// Sinusoidal embedding of the diffusion step index (32 frequency pairs,
// geometrically spaced from 1 down to 1e-4).
inline void write_timestep_embedding(int k, double* out) {
  constexpr int half = kTimestepEmbedDim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / (half - 1));
    out[i] = std::sin(k * freq);
    out[half + i] = std::cos(k * freq);
  }
}

inline int eps_input_dim(int horizon) {
  return kObsDim + kActionCodeDim * horizon + kTimestepEmbedDim;
}

// Noise predictor: normalized observation ++ noisy action codes ++ timestep
// embedding -> predicted noise, one row per batch element.
inline MlpSpec eps_net_spec(int width, int depth, int horizon = 1) {
  MlpSpec spec;
  spec.widths.push_back(eps_input_dim(horizon));
  for (int i = 0; i < depth; ++i) spec.widths.push_back(width);
  spec.widths.push_back(kActionCodeDim * horizon);
  return spec;
}

// ---------------------------------------------------------------------------
// Training pairs.

// One supervised example: a normalized observation and the encoded action
// chunk taken at it (horizon consecutive actions, last action repeated past
// the end of the trajectory).
struct TrainPair {
  Observation obs{};
  std::vector<double> act;
};

inline std::vector<TrainPair> flatten_pairs(const DemoDataset& ds,
                                            const NormalizationStats& stats, int horizon = 1) {
  if (horizon < 1) throw std::invalid_argument("flatten_pairs: horizon must be positive");
  std::vector<TrainPair> out;
  for (const DemoTrajectory& t : ds.trajectories) {
    const size_t n = t.actions.size();
    for (size_t i = 0; i < n; ++i) {
      TrainPair p;
      p.obs = stats.normalize(t.observations[i]);
      p.act.resize(static_cast<size_t>(kActionCodeDim) * horizon);
      for (int h = 0; h < horizon; ++h) {
        const ActionVec v = encode_action(t.actions[std::min(i + h, n - 1)]);
        p.act[2 * h] = v[0];
        p.act[2 * h + 1] = v[1];
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

// A batch references its source pairs; `from_sim` counts provenance so the
// mixing ratio is observable.
struct Batch {
  std::vector<const TrainPair*> items;
  int from_sim = 0;
};

inline Batch assemble_batch(const std::vector<TrainPair>& sim,
                            const std::vector<TrainPair>& real, double p_sim, int n,
                            Rng& rng) {
  if (p_sim > 0.0 && sim.empty())
    throw std::invalid_argument("assemble_batch: sim source enabled but empty");
  if (p_sim < 1.0 && real.empty())
    throw std::invalid_argument("assemble_batch: real source enabled but empty");
  Batch b;
  b.items.reserve(static_cast<size_t>(std::max(0, n)));
  std::bernoulli_distribution pick_sim(p_sim);
  for (int i = 0; i < n; ++i) {
    const bool from_sim = pick_sim(rng);
    const std::vector<TrainPair>& src = from_sim ? sim : real;
    std::uniform_int_distribution<size_t> pick(0, src.size() - 1);
    b.items.push_back(&src[pick(rng)]);
    b.from_sim += from_sim ? 1 : 0;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Diffusion loss.

// Core with the noise draws supplied explicitly (testable and deterministic):
// builds x_k per element, runs the net, and returns the mean squared
// noise-prediction error; parameter gradients accumulate into `grad`.
inline double diffusion_loss_core(const Mlp& net, const std::vector<const TrainPair*>& batch,
                                  const std::vector<int>& ks, const Mat& eps,
                                  const NoiseSchedule& s, Vec& grad) {
  const int n = static_cast<int>(batch.size());
  if (n == 0) throw std::invalid_argument("diffusion_loss: empty batch");
  const int act_dim = static_cast<int>(batch[0]->act.size());
  const int in_dim = kObsDim + act_dim + kTimestepEmbedDim;
  if (net.spec().widths.front() != in_dim || net.spec().widths.back() != act_dim)
    throw std::invalid_argument("diffusion_loss: network shape does not match the batch");
  if (static_cast<int>(ks.size()) != n || eps.rows() != n || eps.cols() != act_dim)
    throw std::invalid_argument("diffusion_loss: noise draws do not match the batch");

  Mat x(n, in_dim);
  std::array<double, kTimestepEmbedDim> emb;
  for (int i = 0; i < n; ++i) {
    check_step_index(s, ks[i], "diffusion_loss");
    const TrainPair& p = *batch[i];
    for (int j = 0; j < kObsDim; ++j) x(i, j) = p.obs[j];
    const double c0 = std::sqrt(s.alpha_bar[ks[i]]);
    const double ce = std::sqrt(1.0 - s.alpha_bar[ks[i]]);
    for (int j = 0; j < act_dim; ++j) x(i, kObsDim + j) = c0 * p.act[j] + ce * eps(i, j);
    write_timestep_embedding(ks[i], emb.data());
    for (int j = 0; j < kTimestepEmbedDim; ++j) x(i, kObsDim + act_dim + j) = emb[j];
  }

  MlpCache cache;
  const Mat pred = net.forward(x, cache);
  const Mat diff = pred - eps;
  const double loss = diff.squaredNorm() / n;
  net.backward(cache, (2.0 / n) * diff, grad);
  return loss;
}

// Standard entry point: per element, a uniform step index in 1..K and
// unit-Gaussian noise.
inline double diffusion_loss(const Mlp& net, const std::vector<const TrainPair*>& batch,
                             const NoiseSchedule& s, Rng& rng, Vec& grad) {
  const int n = static_cast<int>(batch.size());
  if (n == 0) throw std::invalid_argument("diffusion_loss: empty batch");
  const int act_dim = static_cast<int>(batch[0]->act.size());
  std::uniform_int_distribution<int> pick_k(1, s.steps);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<int> ks(n);
  Mat eps(n, act_dim);
  for (int i = 0; i < n; ++i) {
    ks[i] = pick_k(rng);
    for (int j = 0; j < act_dim; ++j) eps(i, j) = gauss(rng);
  }
  return diffusion_loss_core(net, batch, ks, eps, s, grad);
}

// ---------------------------------------------------------------------------
// Sampling.

// One stochastic reverse step x_k -> x_{k-1} conditioned on the observation.
inline Eigen::RowVectorXd reverse_step(const Mlp& net, const Eigen::RowVectorXd& x,
                                       const Observation& obs_norm, int k,
                                       const NoiseSchedule& s, Rng& rng) {
  check_step_index(s, k, "reverse_step");
  const int act_dim = static_cast<int>(x.size());
  Mat in(1, kObsDim + act_dim + kTimestepEmbedDim);
  for (int j = 0; j < kObsDim; ++j) in(0, j) = obs_norm[j];
  for (int j = 0; j < act_dim; ++j) in(0, kObsDim + j) = x(j);
  std::array<double, kTimestepEmbedDim> emb;
  write_timestep_embedding(k, emb.data());
  for (int j = 0; j < kTimestepEmbedDim; ++j) in(0, kObsDim + act_dim + j) = emb[j];
  const Mat eps_hat = net.forward(in);
  Eigen::RowVectorXd out = reverse_step_mean(x, eps_hat.row(0), k, s);
  if (s.sigma[k] > 0.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int j = 0; j < act_dim; ++j) out(j) += s.sigma[k] * gauss(rng);
  }
  return out;
}

// Full reverse chain from pure noise; returns the denoised action codes.
inline Eigen::RowVectorXd sample_chunk(const Mlp& net, const Observation& obs_norm,
                                       const NoiseSchedule& s, Rng& rng, int horizon = 1) {
  const int act_dim = kActionCodeDim * horizon;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::RowVectorXd x(act_dim);
  for (int j = 0; j < act_dim; ++j) x(j) = gauss(rng);
  for (int k = s.steps; k >= 1; --k) x = reverse_step(net, x, obs_norm, k, s, rng);
  return x;
}

// ---------------------------------------------------------------------------
// Policy bundle and co-training.

struct DiffusionPolicy {
  Mlp net;
  NormalizationStats stats;
  NoiseSchedule schedule;
  int horizon = 1;
};

// Draw one executable action for a raw (unnormalized) imitation-mode
// observation; with horizon > 1 the first action of the chunk is returned.
inline HybridAction sample_action(const DiffusionPolicy& p, const Observation& obs, Rng& rng) {
  const Observation norm = p.stats.normalize(obs);
  const Eigen::RowVectorXd x = sample_chunk(p.net, norm, p.schedule, rng, p.horizon);
  return decode_action({x(0), x(1)});
}

enum class TrainPreset { CoTrain, SimOnly, RealOnly, FineTune };

inline const char* to_string(TrainPreset p) {
  switch (p) {
    case TrainPreset::CoTrain: return "cotrain";
    case TrainPreset::SimOnly: return "simonly";
    case TrainPreset::RealOnly: return "realonly";
    case TrainPreset::FineTune: return "finetune";
  }
  return "?";
}

struct CoTrainConfig {
  int batch_size = 1024;
  double p_sim = 0.5;  // per-element probability that a batch slot is sim data
  int epochs = 30;
  double lr = 1e-3;
  int hidden_width = 256;
  int hidden_depth = 3;
  int horizon = 1;  // action-chunk length; > 1 is experimental
  NoiseSchedule schedule = NoiseSchedule::linear();
};

struct CoTrainResult {
  DiffusionPolicy policy;
  std::vector<double> loss_history;  // one entry per optimizer step
};

// Training core with the normalization statistics supplied by the caller.
// Exists so the zero-real ablation arm can substitute sim statistics when no
// real data exists; normal entry is cotrain below.
inline CoTrainResult cotrain_with_stats(const DemoDataset& sim, const DemoDataset& real,
                                        const NormalizationStats& stats, TrainPreset preset,
                                        const CoTrainConfig& cfg, uint64_t seed,
                                        std::ostream* log = nullptr) {
  if (cfg.horizon < 1) throw std::invalid_argument("cotrain: horizon must be positive");
  if (cfg.batch_size < 1) throw std::invalid_argument("cotrain: batch size must be positive");
  const bool needs_sim = preset != TrainPreset::RealOnly;
  const bool needs_real_pairs = preset != TrainPreset::SimOnly;
  if (needs_sim && sim.domain != DemoDomain::Sim)
    throw std::invalid_argument("cotrain: sim dataset carries the wrong domain tag");

  const std::vector<TrainPair> sim_pairs =
      needs_sim ? flatten_pairs(sim, stats, cfg.horizon) : std::vector<TrainPair>{};
  const std::vector<TrainPair> real_pairs = flatten_pairs(real, stats, cfg.horizon);
  if (needs_sim && sim_pairs.empty())
    throw std::invalid_argument("cotrain: sim dataset has no training pairs");
  if (needs_real_pairs && real_pairs.empty())
    throw std::invalid_argument("cotrain: real dataset has no training pairs");

  Rng rng(seed);
  Mlp net(eps_net_spec(cfg.hidden_width, cfg.hidden_depth, cfg.horizon), rng);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  Adam opt(net.params().size(), adam_cfg);
  Vec grad = Vec::Zero(net.params().size());

  // One epoch visits (in expectation) every pair the preset can sample.
  const long usable_pairs = static_cast<long>((needs_sim ? sim_pairs.size() : 0) +
                                              (needs_real_pairs ? real_pairs.size() : 0));
  const int steps_per_epoch =
      static_cast<int>(std::max<long>(1, usable_pairs / cfg.batch_size));

  CoTrainResult out;
  out.loss_history.reserve(static_cast<size_t>(cfg.epochs) * steps_per_epoch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double p_sim = cfg.p_sim;
    if (preset == TrainPreset::SimOnly) p_sim = 1.0;
    if (preset == TrainPreset::RealOnly) p_sim = 0.0;
    if (preset == TrainPreset::FineTune)
      p_sim = epoch < (cfg.epochs + 1) / 2 ? 1.0 : 0.0;
    double epoch_loss = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      const Batch b = assemble_batch(sim_pairs, real_pairs, p_sim, cfg.batch_size, rng);
      grad.setZero();
      const double loss = diffusion_loss(net, b.items, cfg.schedule, rng, grad);
      opt.step(net.params(), grad);
      out.loss_history.push_back(loss);
      epoch_loss += loss;
    }
    if (log)
      (*log) << "epoch " << epoch + 1 << "/" << cfg.epochs << " preset " << to_string(preset)
             << " loss " << epoch_loss / steps_per_epoch << "\n";
  }
  out.policy = DiffusionPolicy{std::move(net), stats, cfg.schedule, cfg.horizon};
  return out;
}

// Trains the noise predictor on demonstration pairs. Normalization statistics
// always come from the real dataset, whatever the preset; the fine-tune
// preset spends the first half of the epoch budget on sim data only, then
// switches to real data only.
inline CoTrainResult cotrain(const DemoDataset& sim, const DemoDataset& real,
                             TrainPreset preset, const CoTrainConfig& cfg, uint64_t seed,
                             std::ostream* log = nullptr) {
  // compute_stats also enforces the real tag on `real`.
  return cotrain_with_stats(sim, real, compute_stats(real), preset, cfg, seed, log);
}

// ---------------------------------------------------------------------------
// Checkpoints: schedule + normalization stats + network, CRC-32 sealed.

inline constexpr char kPolicyMagic[4] = {'V', 'F', 'P', '1'};

inline void save_policy(const DiffusionPolicy& p, const std::string& path) {
  ByteWriter w;
  w.magic(kPolicyMagic);
  w.u32(1);  // format version
  w.u32(static_cast<uint32_t>(p.horizon));
  w.u32(static_cast<uint32_t>(p.schedule.steps));
  for (int k = 0; k <= p.schedule.steps; ++k) {
    w.f64(p.schedule.alpha[k]);
    w.f64(p.schedule.alpha_bar[k]);
    w.f64(p.schedule.sigma[k]);
  }
  for (double v : p.stats.obs_mean) w.f64(v);
  for (double v : p.stats.obs_std) w.f64(v);
  w.f64(p.stats.delta_mean);
  w.f64(p.stats.delta_std);
  save_mlp(p.net, w);
  w.finish_with_crc();
  w.write_file(path);
}

inline DiffusionPolicy load_policy(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.verify_crc_trailer();
  r.expect_magic(kPolicyMagic);
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported policy version " + std::to_string(version));
  DiffusionPolicy p;
  p.horizon = static_cast<int>(r.u32());
  p.schedule.steps = static_cast<int>(r.u32());
  p.schedule.alpha.resize(p.schedule.steps + 1);
  p.schedule.alpha_bar.resize(p.schedule.steps + 1);
  p.schedule.sigma.resize(p.schedule.steps + 1);
  for (int k = 0; k <= p.schedule.steps; ++k) {
    p.schedule.alpha[k] = r.f64();
    p.schedule.alpha_bar[k] = r.f64();
    p.schedule.sigma[k] = r.f64();
  }
  for (double& v : p.stats.obs_mean) v = r.f64();
  for (double& v : p.stats.obs_std) v = r.f64();
  p.stats.delta_mean = r.f64();
  p.stats.delta_std = r.f64();
  p.net = load_mlp(r);
  if (r.remaining() != 0) throw std::runtime_error("corrupt policy: trailing bytes");
  return p;
}

}  // namespace vf
