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

// Exploration-policy learning: twin-delayed deterministic actor-critic over
// the hybrid (discrete mode, continuous sweep) action space, with hindsight
// goal relabeling. The actor is a shared trunk with a 6-logit mode head
// (hard argmax at rollout, softmax relaxation through the critic during
// updates) and a tanh sweep head squashed to [0, Δmax]. Critics score
// (observation ⊕ one-hot mode ⊕ normalized sweep).
//
// Time-limit truncation is not stored as `done`: only success or a contact
// failure terminates for bootstrapping purposes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vf/common.hpp"
#include "vf/geometry.hpp"
#include "vf/neural.hpp"
#include "vf/task.hpp"

namespace vf {

// ---------------------------------------------------------------------------
// Replay.

struct Transition {
  Observation obs{};
  HybridAction action;
  double reward = 0.0;
  Observation next_obs{};
  bool done = false;  // success or failure; time-limit truncation stays false
  Status status = Status::Ok;
  Pose2 achieved;            // ground-truth pose after the action
  Goal goal;                 // goal the transition was collected under
  double palm_width = 0.10;  // reward recomputation needs the base spacing
};

// Fixed-capacity FIFO with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  const Transition& at(size_t i) const { return data_[i]; }

  std::vector<Transition> sample(size_t n, Rng& rng) const {
    if (data_.empty()) throw std::logic_error("ReplayBuffer: sampling empty buffer");
    std::vector<Transition> out;
    out.reserve(n);
    std::uniform_int_distribution<size_t> pick(0, data_.size() - 1);
    for (size_t i = 0; i < n; ++i) out.push_back(data_[pick(rng)]);
    return out;
  }

 private:
  size_t capacity_;
  size_t next_ = 0;
  std::vector<Transition> data_;
};

// ---------------------------------------------------------------------------
// Configuration.

struct Td3Config {
  double gamma = 0.98;
  double tau = 0.005;
  int policy_delay = 2;
  double explore_sigma = 0.1 * kActionDeltaMax;  // rollout noise on the sweep
  double target_sigma = 0.1 * kActionDeltaMax;   // target-policy smoothing
  double target_clip = 0.15 * kActionDeltaMax;
  double epsilon_greedy = 0.1;  // random mode probability while exploring
  int batch = 256;
  size_t capacity = 300000;
  int her_k = 4;
  int hidden_width = 256;
  int hidden_depth = 3;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  int warmup_steps = 2000;      // uniform-random action steps before learning
  int updates_per_step = 1;
  int eval_interval = 5000;     // env steps between evaluation passes
  int eval_episodes = 50;
  // The exploration policy targets smoothness, not precision: its evaluation
  // bar doubles the task thresholds.
  double eval_d_bar = 0.010;
  double eval_theta_bar = 0.2;
};

// ---------------------------------------------------------------------------
// Actor: shared trunk, mode logits head, sweep head.

inline double delta_from_unit(double t) {  // [-1, 1] -> [0, Δmax]
  return 0.5 * (t + 1.0) * kActionDeltaMax;
}
inline double unit_from_delta(double d) {  // [0, Δmax] -> [-1, 1]
  return 2.0 * d / kActionDeltaMax - 1.0;
}

class ActorNet {
 public:
  ActorNet() = default;
  ActorNet(int obs_dim, int width, int depth, Rng& rng) {
    std::vector<int> trunk_widths;
    trunk_widths.push_back(obs_dim);
    for (int i = 0; i < depth; ++i) trunk_widths.push_back(width);
    trunk_ = Mlp(MlpSpec{trunk_widths, Activation::ReLU, Activation::ReLU}, rng);
    mode_head_ = Mlp(MlpSpec{{width, kNumModes}, Activation::ReLU, Activation::None}, rng);
    delta_head_ = Mlp(MlpSpec{{width, 1}, Activation::ReLU, Activation::Tanh}, rng);
  }

  struct Cache {
    MlpCache trunk, mode, delta;
    Mat features;
  };

  // Batched heads: logits (N x 6) and unit-interval sweep (N x 1).
  std::pair<Mat, Mat> forward(const Mat& obs) const {
    const Mat h = trunk_.forward(obs);
    return {mode_head_.forward(h), delta_head_.forward(h)};
  }
  std::pair<Mat, Mat> forward(const Mat& obs, Cache& cache) const {
    cache.features = trunk_.forward(obs, cache.trunk);
    return {mode_head_.forward(cache.features, cache.mode),
            delta_head_.forward(cache.features, cache.delta)};
  }

  // Accumulates parameter gradients from head-output gradients.
  void backward(const Cache& cache, const Mat& d_logits, const Mat& d_unit,
                Vec& g_trunk, Vec& g_mode, Vec& g_delta) const {
    const Mat dh_mode = mode_head_.backward(cache.mode, d_logits, g_mode);
    const Mat dh_delta = delta_head_.backward(cache.delta, d_unit, g_delta);
    trunk_.backward(cache.trunk, dh_mode + dh_delta, g_trunk);
  }

  Mlp& trunk() { return trunk_; }
  Mlp& mode_head() { return mode_head_; }
  Mlp& delta_head() { return delta_head_; }
  const Mlp& trunk() const { return trunk_; }
  const Mlp& mode_head() const { return mode_head_; }
  const Mlp& delta_head() const { return delta_head_; }

  void polyak_from(const ActorNet& src, double tau) {
    trunk_.params() = tau * src.trunk_.params() + (1.0 - tau) * trunk_.params();
    mode_head_.params() = tau * src.mode_head_.params() + (1.0 - tau) * mode_head_.params();
    delta_head_.params() =
        tau * src.delta_head_.params() + (1.0 - tau) * delta_head_.params();
  }

 private:
  Mlp trunk_, mode_head_, delta_head_;
};

inline Mat observation_matrix(const Observation& o) {
  Mat x(1, kObsDim);
  for (int i = 0; i < kObsDim; ++i) x(0, i) = o[i];
  return x;
}

// Deterministic head readout plus optional exploration noise: ε-greedy over
// the mode, clipped Gaussian on the sweep.
inline HybridAction select_action(const ActorNet& actor, const Observation& obs,
                                  bool explore, Rng& rng, const Td3Config& cfg = {}) {
  const auto [logits, unit] = actor.forward(observation_matrix(obs));
  int mode = 0;
  logits.row(0).maxCoeff(&mode);
  double delta = delta_from_unit(unit(0, 0));
  if (explore) {
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.epsilon_greedy)
      mode = static_cast<int>(std::uniform_int_distribution<int>(0, kNumModes - 1)(rng));
    delta += std::normal_distribution<double>(0.0, cfg.explore_sigma)(rng);
  }
  delta = std::clamp(delta, 0.0, kActionDeltaMax);
  return {mode, delta};
}

// ---------------------------------------------------------------------------
// Critics over (observation ⊕ action encoding).

inline constexpr int kActionEncodingDim = kNumModes + 1;
inline constexpr int kCriticInputDim = kObsDim + kActionEncodingDim;

inline Mat critic_input(const std::vector<Transition>& batch, bool use_next,
                        const Mat& modes_onehot, const Mat& unit_deltas) {
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  Mat x(n, kCriticInputDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Observation& o = use_next ? batch[i].next_obs : batch[i].obs;
    for (int j = 0; j < kObsDim; ++j) x(i, j) = o[j];
  }
  x.block(0, kObsDim, n, kNumModes) = modes_onehot;
  x.col(kObsDim + kNumModes) = unit_deltas;
  return x;
}

inline Mat one_hot_rows(const std::vector<int>& modes) {
  Mat m = Mat::Zero(static_cast<Eigen::Index>(modes.size()), kNumModes);
  for (size_t i = 0; i < modes.size(); ++i) m(static_cast<Eigen::Index>(i), modes[i]) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Agent bundle.

struct Td3Agent {
  ActorNet actor, actor_target;
  Mlp q1, q2, q1_target, q2_target;
  Adam opt_trunk, opt_mode, opt_delta, opt_q1, opt_q2;
  long update_count = 0;
};

inline Td3Agent make_td3_agent(const Td3Config& cfg, Rng& rng) {
  Td3Agent a;
  a.actor = ActorNet(kObsDim, cfg.hidden_width, cfg.hidden_depth, rng);
  a.actor_target = a.actor;

  std::vector<int> cw;
  cw.push_back(kCriticInputDim);
  for (int i = 0; i < cfg.hidden_depth; ++i) cw.push_back(cfg.hidden_width);
  cw.push_back(1);
  a.q1 = Mlp(MlpSpec{cw, Activation::ReLU, Activation::None}, rng);
  a.q2 = Mlp(MlpSpec{cw, Activation::ReLU, Activation::None}, rng);
  a.q1_target = a.q1;
  a.q2_target = a.q2;

  const AdamConfig actor_cfg{cfg.actor_lr, 0.9, 0.999, 1e-8};
  const AdamConfig critic_cfg{cfg.critic_lr, 0.9, 0.999, 1e-8};
  a.opt_trunk = Adam(a.actor.trunk().params().size(), actor_cfg);
  a.opt_mode = Adam(a.actor.mode_head().params().size(), actor_cfg);
  a.opt_delta = Adam(a.actor.delta_head().params().size(), actor_cfg);
  a.opt_q1 = Adam(a.q1.params().size(), critic_cfg);
  a.opt_q2 = Adam(a.q2.params().size(), critic_cfg);
  return a;
}

// Twin-critic bootstrap targets: y = r + γ(1−done)·min(Q1', Q2') with the
// target actor's sweep perturbed by clipped noise (modes stay hard argmax).
inline Vec td3_targets(const Td3Agent& agent, const std::vector<Transition>& batch,
                       const Td3Config& cfg, Rng& rng) {
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  Mat next_obs(n, kObsDim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < kObsDim; ++j) next_obs(i, j) = batch[i].next_obs[j];

  const auto [logits, unit] = agent.actor_target.forward(next_obs);
  std::vector<int> modes(batch.size());
  Vec deltas(n);
  std::normal_distribution<double> noise(0.0, cfg.target_sigma);
  for (Eigen::Index i = 0; i < n; ++i) {
    int m = 0;
    logits.row(i).maxCoeff(&m);
    modes[i] = m;
    const double eps = std::clamp(noise(rng), -cfg.target_clip, cfg.target_clip);
    deltas(i) = std::clamp(delta_from_unit(unit(i, 0)) + eps, 0.0, kActionDeltaMax);
  }
  Vec unit_deltas(n);
  for (Eigen::Index i = 0; i < n; ++i) unit_deltas(i) = unit_from_delta(deltas(i));

  const Mat x = critic_input(batch, true, one_hot_rows(modes), unit_deltas);
  const Vec q1 = agent.q1_target.forward(x).col(0);
  const Vec q2 = agent.q2_target.forward(x).col(0);

  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double boot = batch[i].done ? 0.0 : cfg.gamma * std::min(q1(i), q2(i));
    y(i) = batch[i].reward + boot;
  }
  return y;
}

struct TdDiagnostics {
  double critic_loss = 0.0;
  double actor_loss = std::numeric_limits<double>::quiet_NaN();  // NaN when delayed
  double mean_q = 0.0;
  double mean_target = 0.0;
};

// One gradient step on a pre-sampled batch. The caller owns sampling so the
// update itself is a pure deterministic function of (agent, batch, rng).
inline TdDiagnostics td3_update(Td3Agent& agent, const std::vector<Transition>& batch,
                                const Td3Config& cfg, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("td3_update: empty batch");
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  TdDiagnostics diag;

  const Vec y = td3_targets(agent, batch, cfg, rng);
  diag.mean_target = y.mean();

  // Behavior-action encodings.
  std::vector<int> modes(batch.size());
  Vec unit_deltas(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    modes[i] = batch[i].action.mode;
    unit_deltas(i) = unit_from_delta(batch[i].action.delta);
  }
  const Mat x = critic_input(batch, false, one_hot_rows(modes), unit_deltas);

  for (Mlp* critic : {&agent.q1, &agent.q2}) {
    MlpCache cache;
    const Vec q = critic->forward(x, cache).col(0);
    const Vec err = q - y;
    diag.critic_loss += err.squaredNorm() / n;
    diag.mean_q += q.mean();
    Vec grad = Vec::Zero(critic->params().size());
    Mat d = (2.0 / n) * err;
    critic->backward(cache, d, grad);
    (critic == &agent.q1 ? agent.opt_q1 : agent.opt_q2).step(critic->params(), grad);
  }
  diag.critic_loss *= 0.5;
  diag.mean_q *= 0.5;

  ++agent.update_count;
  if (agent.update_count % cfg.policy_delay == 0) {
    // Actor ascends Q1 with the mode head relaxed to softmax probabilities.
    Mat obs(n, kObsDim);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int j = 0; j < kObsDim; ++j) obs(i, j) = batch[i].obs[j];

    ActorNet::Cache acache;
    const auto [logits, unit] = agent.actor.forward(obs, acache);
    Mat probs(n, kNumModes);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec row = logits.row(i).transpose();
      const Vec e = (row.array() - row.maxCoeff()).exp();
      probs.row(i) = (e / e.sum()).transpose();
    }

    Mat xq(n, kCriticInputDim);
    xq.block(0, 0, n, kObsDim) = obs;
    xq.block(0, kObsDim, n, kNumModes) = probs;
    xq.col(kObsDim + kNumModes) = unit.col(0);

    MlpCache qcache;
    const Vec q = agent.q1.forward(xq, qcache).col(0);
    diag.actor_loss = -q.mean();

    Vec scratch = Vec::Zero(agent.q1.params().size());  // critic stays frozen
    const Mat dxq = agent.q1.backward(qcache, Mat::Constant(n, 1, -1.0 / n), scratch);

    const Mat d_probs = dxq.block(0, kObsDim, n, kNumModes);
    Mat d_logits(n, kNumModes);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dot = d_probs.row(i).dot(probs.row(i));
      d_logits.row(i) = (d_probs.row(i).array() - dot).matrix().cwiseProduct(probs.row(i));
    }
    const Mat d_unit = dxq.col(kObsDim + kNumModes);

    Vec g_trunk = Vec::Zero(agent.actor.trunk().params().size());
    Vec g_mode = Vec::Zero(agent.actor.mode_head().params().size());
    Vec g_delta = Vec::Zero(agent.actor.delta_head().params().size());
    agent.actor.backward(acache, d_logits, d_unit, g_trunk, g_mode, g_delta);
    agent.opt_trunk.step(agent.actor.trunk().params(), g_trunk);
    agent.opt_mode.step(agent.actor.mode_head().params(), g_mode);
    agent.opt_delta.step(agent.actor.delta_head().params(), g_delta);

    agent.actor_target.polyak_from(agent.actor, cfg.tau);
    agent.q1_target.params() =
        cfg.tau * agent.q1.params() + (1.0 - cfg.tau) * agent.q1_target.params();
    agent.q2_target.params() =
        cfg.tau * agent.q2.params() + (1.0 - cfg.tau) * agent.q2_target.params();
  }
  return diag;
}

// ---------------------------------------------------------------------------
// Hindsight relabeling ("future" strategy).

// Returns the originals followed by k relabeled copies of each transition.
// A relabeled copy replaces the goal with the achieved pose of a uniformly
// sampled not-earlier transition, rewrites the goal slots of both
// observations, and recomputes reward/done with the task-layer oracle.
// Everything else is preserved byte for byte.
inline std::vector<Transition> her_relabel(const std::vector<Transition>& episode, int k,
                                           Rng& rng, const RewardParams& rp = {}) {
  std::vector<Transition> out;
  if (episode.empty()) return out;
  out.reserve(episode.size() * (1 + std::max(0, k)));
  for (const Transition& t : episode) out.push_back(t);
  for (size_t i = 0; i < episode.size(); ++i) {
    std::uniform_int_distribution<size_t> future(i, episode.size() - 1);
    for (int c = 0; c < k; ++c) {
      Transition t = episode[i];
      const Goal new_goal{episode[future(rng)].achieved};
      t.goal = new_goal;
      rewrite_goal_slots(t.obs, new_goal);
      rewrite_goal_slots(t.next_obs, new_goal);
      t.reward = reward_from_pose(t.achieved, t.palm_width, t.status, new_goal, rp);
      t.done = t.status != Status::Ok || is_success(t.achieved, new_goal, rp);
      out.push_back(std::move(t));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: the three actor nets in one CRC-checked container.

inline constexpr char kActorMagic[4] = {'V', 'F', 'A', '1'};

inline void save_actor(const ActorNet& actor, const std::string& path) {
  ByteWriter w;
  w.magic(kActorMagic);
  w.u32(1);
  save_mlp(actor.trunk(), w);
  save_mlp(actor.mode_head(), w);
  save_mlp(actor.delta_head(), w);
  w.finish_with_crc();
  w.write_file(path);
}

inline ActorNet load_actor(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.verify_crc_trailer();
  r.expect_magic(kActorMagic);
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported actor checkpoint version " +
                             std::to_string(version));
  ActorNet a;
  a.trunk() = load_mlp(r);
  a.mode_head() = load_mlp(r);
  a.delta_head() = load_mlp(r);
  return a;
}

// ---------------------------------------------------------------------------
// Training loop: serial episodic collection with evaluation checkpoints.

struct CurvePoint {
  long env_steps = 0;
  double eval_success = 0.0;
  double mean_episode_reward = 0.0;  // over episodes since the last point
  double critic_loss = 0.0;          // smoothed
};

struct TrainResult {
  ActorNet best_actor;
  double best_success = 0.0;
  long best_at_steps = 0;
  std::vector<CurvePoint> curve;
  long env_steps = 0;
};

// Success rate of the deterministic policy at the loosened thresholds.
inline double evaluate_policy(const ActorNet& actor, const Shape2& shape,
                              const DomainParams& domain, const Td3Config& cfg,
                              int episodes, Rng& rng) {
  RewardParams loose;
  loose.d_bar = cfg.eval_d_bar;
  loose.theta_bar = cfg.eval_theta_bar;
  Env env(shape, domain, loose);
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    Observation o = env.reset(rng);
    while (env.episode_active()) {
      const auto r = env.step(select_action(actor, o, false, rng, cfg), rng);
      o = r.observation;
      if (r.info.success) ++successes;
    }
  }
  return static_cast<double>(successes) / episodes;
}

// Trains the exploration policy on one shape in the randomized domain.
// Deterministic for a fixed seed. Returns the checkpoint with the best
// evaluation success. `log` (optional) receives one CSV line per curve point.
// `stop_at_success` (optional) ends training early once an evaluation pass
// reaches that rate; the default never triggers.
inline TrainResult train_exploration_policy(const Shape2& shape, const Td3Config& cfg,
                                            long budget_steps, uint64_t seed,
                                            bool use_her = true,
                                            std::ostream* log = nullptr,
                                            double stop_at_success = 2.0) {
  Rng rng(seed);
  Td3Agent agent = make_td3_agent(cfg, rng);
  ReplayBuffer buffer(cfg.capacity);
  const DomainParams domain = DomainParams::randomized();
  Env env(shape, domain);

  TrainResult result;
  result.best_actor = agent.actor;

  if (log) *log << "env_steps,eval_success,mean_episode_reward,critic_loss\n";

  long steps = 0;
  long next_eval = cfg.eval_interval;
  double reward_accum = 0.0;
  long episodes_done = 0;
  double loss_smooth = 0.0;
  bool loss_primed = false;
  bool stop_early = false;

  while (steps < budget_steps && !stop_early) {
    Observation o = env.reset(rng);
    std::vector<Transition> episode;
    double episode_reward = 0.0;
    while (env.episode_active() && steps < budget_steps) {
      HybridAction a;
      if (steps < cfg.warmup_steps) {
        a.mode = static_cast<int>(std::uniform_int_distribution<int>(0, kNumModes - 1)(rng));
        a.delta = std::uniform_real_distribution<double>(0.0, kActionDeltaMax)(rng);
      } else {
        a = select_action(agent.actor, o, true, rng, cfg);
      }
      const SimState& pre = env.state();
      const double palm = pre.params.palm_width;
      const auto r = env.step(a, rng);

      Transition t;
      t.obs = o;
      t.action = a;
      t.reward = r.reward;
      t.next_obs = r.observation;
      t.status = r.info.status;
      t.done = r.info.success || r.info.status != Status::Ok;
      t.achieved = r.info.pose;
      t.goal = env.goal();
      t.palm_width = palm;
      episode.push_back(t);

      o = r.observation;
      episode_reward += r.reward;
      ++steps;

      if (steps >= cfg.warmup_steps &&
          buffer.size() >= static_cast<size_t>(cfg.batch)) {
        for (int u = 0; u < cfg.updates_per_step; ++u) {
          const auto diag = td3_update(agent, buffer.sample(cfg.batch, rng), cfg, rng);
          loss_smooth = loss_primed ? 0.99 * loss_smooth + 0.01 * diag.critic_loss
                                    : diag.critic_loss;
          loss_primed = true;
        }
      }

      if (steps >= next_eval) {
        next_eval += cfg.eval_interval;
        Rng eval_rng(seed ^ 0x9e3779b97f4a7c15ULL ^ static_cast<uint64_t>(steps));
        const double success = evaluate_policy(agent.actor, shape, domain, cfg,
                                               cfg.eval_episodes, eval_rng);
        CurvePoint p;
        p.env_steps = steps;
        p.eval_success = success;
        p.mean_episode_reward =
            episodes_done > 0 ? reward_accum / episodes_done : 0.0;
        p.critic_loss = loss_smooth;
        result.curve.push_back(p);
        if (log) {
          *log << p.env_steps << ',' << p.eval_success << ',' << p.mean_episode_reward
               << ',' << p.critic_loss << '\n';
          log->flush();
        }
        reward_accum = 0.0;
        episodes_done = 0;
        if (success >= result.best_success) {
          result.best_success = success;
          result.best_actor = agent.actor;
          result.best_at_steps = steps;
        }
        if (result.best_success >= stop_at_success) {
          stop_early = true;
          break;
        }
      }
    }
    const auto stored = use_her ? her_relabel(episode, cfg.her_k, rng)
                                : episode;
    for (const Transition& t : stored) buffer.push(t);
    reward_accum += episode_reward;
    ++episodes_done;
  }
  result.env_steps = steps;
  if (result.curve.empty()) {
    // Budget smaller than one evaluation interval: evaluate once at the end.
    Rng eval_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    result.best_success = evaluate_policy(agent.actor, shape, domain, cfg,
                                          cfg.eval_episodes, eval_rng);
    result.best_actor = agent.actor;
    result.best_at_steps = steps;
  }
  return result;
}

}  // namespace vf
