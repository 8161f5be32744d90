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

// MDP layer over the contact simulator: observation encoding, reward and
// success tests, episode bookkeeping, and the three training domains
// (nominal simulation, randomized simulation, and a "surrogate real" domain
// that stands in for hardware with fixed, committed shift constants).
//
// Observation layout (25 scalars, pinned; tests freeze this permutation):
//   [0]  q_L                  left joint angle (rad)
//   [1]  q_R                  right joint angle (rad)
//   [2]  q̇_L                  left joint velocity (rad/s)
//   [3]  q̇_R                  right joint velocity (rad/s)
//   [4..9]   one-hot of the previous action's mode (all zero on reset)
//   [10] x                    object position (m)
//   [11] y
//   [12] ẋ                    object velocity (m/s)
//   [13] ẏ
//   [14] θ̇                    object angular velocity (rad/s)
//   [15] cos θ                object orientation
//   [16] sin θ
//   [17..20] goal             [x_g, y_g, cos θ_g, sin θ_g]
//   [21..24] goal delta       [x_g − x, y_g − y, cos(θ_g − θ), sin(θ_g − θ)]
//
// Velocities are finite differences of consecutive control ticks divided by
// the control period. In IL mode all five velocity slots are exactly zero.
// In the surrogate-real domain, zero-mean noise is added to the object pose
// before encoding (slots 10, 11, 15, 16 and the goal delta); velocities are
// finite-differenced from the true poses.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "vf/common.hpp"
#include "vf/geometry.hpp"
#include "vf/shape.hpp"

namespace vf {

// ---------------------------------------------------------------------------
// Config types.

struct Goal {
  Pose2 pose;
};

// r = c1·[success] − c2·Δr − c3·[out of range], where Δr is the mean absolute
// change of the two base-to-object distances relative to the goal.
struct RewardParams {
  double c1 = 10.0;
  double c2 = 20.0;  // per meter
  double c3 = 5.0;
  double d_bar = 0.005;      // success position threshold (m), inclusive
  double theta_bar = 0.1;    // success angle threshold (rad), inclusive
};

enum class DomainKind { NominalSim, RandomizedSim, SurrogateReal };

// Domain knobs. The randomization ranges apply only to RandomizedSim; the
// shift constants apply only to SurrogateReal (so NominalSim has all shifts
// zero in effect). The surrogate constants are committed here so "real"
// experiments are reproducible without hardware.
struct DomainParams {
  DomainKind kind = DomainKind::NominalSim;

  // RandomizedSim: multiplicative length jitter and additive clearance jitter.
  double palm_width_frac = 0.02;
  double finger_length_frac = 0.02;
  double clearance_range = 0.0005;  // m

  // SurrogateReal: object rotation per radian of commanded slide travel.
  double slide_drift_gain = 0.3;
  // Per-axis position noise; the scale makes the mean 2-norm of the planar
  // error 1 mm (E‖(X,Y)‖ = σ·sqrt(π/2) for isotropic Gaussian noise).
  double pose_noise_sigma = 1e-3 / 1.2533141373155003;  // = 1e-3 / sqrt(π/2)
  double angle_noise_sigma = rad(0.5);
  // Actuation gain drawn once per episode; executed delta = gain · command.
  double latency_lo = 0.95;
  double latency_hi = 1.05;

  static DomainParams nominal() { return {}; }
  static DomainParams randomized() {
    DomainParams d;
    d.kind = DomainKind::RandomizedSim;
    return d;
  }
  static DomainParams surrogate_real() {
    DomainParams d;
    d.kind = DomainKind::SurrogateReal;
    return d;
  }
};

struct EpisodeConfig {
  int max_steps = 10;
  double control_period = 0.4;  // s (2.5 Hz control)
};

// ---------------------------------------------------------------------------
// Success and reward.

// Absolute angular distance, reduced modulo the rotational symmetry of the
// object when fold > 1 (a fold-k object looks identical every 2π/k).
inline double angle_difference(double a, double b, int fold = 1) {
  const double period = 2.0 * kPi / std::max(1, fold);
  return std::abs(std::remainder(a - b, period));
}

// Distances from the two finger bases to a point.
inline std::pair<double, double> polar_radii(Vec2 p, const HandParams& hp) {
  return {norm(p - hp.base(Side::Left)), norm(p - hp.base(Side::Right))};
}

inline bool is_success(const Pose2& pose, const Goal& goal, const RewardParams& rp,
                       int fold = 1) {
  const double dd = norm(pose.translation() - goal.pose.translation());
  return dd <= rp.d_bar && angle_difference(pose.theta, goal.pose.theta, fold) <= rp.theta_bar;
}

// Reward from a bare pose; the finger-base geometry enters only through the
// palm width. Used directly when recomputing rewards for relabeled goals.
inline double reward_from_pose(const Pose2& pose, double palm_width, Status status,
                               const Goal& goal, const RewardParams& rp, int fold = 1) {
  HandParams hp;
  hp.palm_width = palm_width;
  const auto [r1, r2] = polar_radii(pose.translation(), hp);
  const auto [g1, g2] = polar_radii(goal.pose.translation(), hp);
  const double dense = 0.5 * (std::abs(r1 - g1) + std::abs(r2 - g2));
  double r = -rp.c2 * dense;
  if (is_success(pose, goal, rp, fold)) r += rp.c1;
  if (status == Status::OutOfRange) r -= rp.c3;
  return r;
}

inline double reward(const SimState& state, Status status, const Goal& goal,
                     const RewardParams& rp, int fold = 1) {
  return reward_from_pose(state.object_pose, state.params.palm_width, status, goal, rp,
                          fold);
}

// ---------------------------------------------------------------------------
// Observation encoding.

inline constexpr int kObsDim = 25;
using Observation = std::array<double, kObsDim>;

namespace obs {
inline constexpr int kQL = 0, kQR = 1, kQdL = 2, kQdR = 3;
inline constexpr int kModeOneHot = 4;  // 6 slots
inline constexpr int kX = 10, kY = 11, kXd = 12, kYd = 13, kThetaD = 14;
inline constexpr int kCosTheta = 15, kSinTheta = 16;
inline constexpr int kGoal = 17;   // 4 slots
inline constexpr int kDelta = 21;  // 4 slots
// Slots zeroed in IL mode.
inline constexpr std::array<int, 5> kVelocitySlots = {kQdL, kQdR, kXd, kYd, kThetaD};
}  // namespace obs

enum class ObsMode { RL, IL };

// Encodes one observation. `last_mode` < 0 leaves the one-hot all zero.
// `prev` is the state at the previous control tick (velocities are zero
// without it). In the surrogate-real domain, pose noise is drawn from `rng`;
// passing no rng encodes the noise-free pose.
inline Observation observe(const SimState& state, const Goal& goal, int last_mode,
                           ObsMode mode, const DomainParams& domain, Rng* rng = nullptr,
                           const SimState* prev = nullptr, double control_period = 0.4) {
  Observation o{};
  o[obs::kQL] = state.q_left;
  o[obs::kQR] = state.q_right;

  Pose2 p = state.object_pose;
  if (domain.kind == DomainKind::SurrogateReal && rng != nullptr) {
    std::normal_distribution<double> pos_noise(0.0, domain.pose_noise_sigma);
    std::normal_distribution<double> ang_noise(0.0, domain.angle_noise_sigma);
    p.x += pos_noise(*rng);
    p.y += pos_noise(*rng);
    p.theta = wrap_angle(p.theta + ang_noise(*rng));
  }

  if (mode == ObsMode::RL && prev != nullptr && control_period > 0.0) {
    o[obs::kQdL] = (state.q_left - prev->q_left) / control_period;
    o[obs::kQdR] = (state.q_right - prev->q_right) / control_period;
    o[obs::kXd] = (state.object_pose.x - prev->object_pose.x) / control_period;
    o[obs::kYd] = (state.object_pose.y - prev->object_pose.y) / control_period;
    o[obs::kThetaD] =
        wrap_angle(state.object_pose.theta - prev->object_pose.theta) / control_period;
  }

  if (last_mode >= 0 && last_mode < kNumModes) o[obs::kModeOneHot + last_mode] = 1.0;

  o[obs::kX] = p.x;
  o[obs::kY] = p.y;
  o[obs::kCosTheta] = std::cos(p.theta);
  o[obs::kSinTheta] = std::sin(p.theta);

  o[obs::kGoal + 0] = goal.pose.x;
  o[obs::kGoal + 1] = goal.pose.y;
  o[obs::kGoal + 2] = std::cos(goal.pose.theta);
  o[obs::kGoal + 3] = std::sin(goal.pose.theta);

  const double dth = goal.pose.theta - p.theta;
  o[obs::kDelta + 0] = goal.pose.x - p.x;
  o[obs::kDelta + 1] = goal.pose.y - p.y;
  o[obs::kDelta + 2] = std::cos(dth);
  o[obs::kDelta + 3] = std::sin(dth);
  return o;
}

// Rewrites the goal and goal-delta slots of an encoded observation in place,
// deriving the delta from the observation's own pose slots. Used by hindsight
// relabeling so the rewrite is consistent with whatever (possibly noisy) pose
// the observation already carries.
inline void rewrite_goal_slots(Observation& o, const Goal& goal) {
  o[obs::kGoal + 0] = goal.pose.x;
  o[obs::kGoal + 1] = goal.pose.y;
  o[obs::kGoal + 2] = std::cos(goal.pose.theta);
  o[obs::kGoal + 3] = std::sin(goal.pose.theta);
  const double theta = std::atan2(o[obs::kSinTheta], o[obs::kCosTheta]);
  const double dth = goal.pose.theta - theta;
  o[obs::kDelta + 0] = goal.pose.x - o[obs::kX];
  o[obs::kDelta + 1] = goal.pose.y - o[obs::kY];
  o[obs::kDelta + 2] = std::cos(dth);
  o[obs::kDelta + 3] = std::sin(dth);
}

// Zeroes the velocity slots (IL-mode convention).
inline void zero_velocity_slots(Observation& o) {
  for (const int i : obs::kVelocitySlots) o[i] = 0.0;
}

// ---------------------------------------------------------------------------
// Episode initialization.

struct ResetSample {
  SimState state;
  Goal goal;
  double latency = 1.0;  // executed-delta gain for this episode
};

namespace detail {

inline double draw_uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// One rejection-sampling pass over the held region: poses anywhere in the
// workspace the closed fingers can hold with comfortable joint margins.
inline std::pair<Pose2, Placement> sample_held(Rng& rng, const HandParams& hp,
                                               const Shape2& shape, int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const Pose2 pose{draw_uniform(rng, -0.6, 0.6) * hp.palm_width,
                     draw_uniform(rng, 0.1, 1.0) * hp.finger_length,
                     draw_uniform(rng, -kPi, kPi)};
    if (!workspace_legal(hp, pose.translation())) continue;
    const auto placed = place_held(hp, shape, pose);
    if (!placed) continue;
    return {pose, *placed};
  }
  throw std::runtime_error("sample_held: no feasible pose after " +
                           std::to_string(max_attempts) + " attempts");
}

}  // namespace detail

// Draws domain parameters, a held start state, and an independent goal from
// the same held region. The draw order is fixed — randomized hand geometry
// (RandomizedSim only), then start pose, then goal, then actuation gain
// (SurrogateReal only) — so the nominal and surrogate domains produce the
// same start and goal at the same seed.
inline ResetSample reset(Rng& rng, const Shape2& shape, const DomainParams& domain,
                         const HandParams& base = {}, int max_attempts = 1000) {
  HandParams hp = base;
  if (domain.kind == DomainKind::RandomizedSim) {
    hp.palm_width *= 1.0 + detail::draw_uniform(rng, -domain.palm_width_frac,
                                                domain.palm_width_frac);
    hp.finger_length *= 1.0 + detail::draw_uniform(rng, -domain.finger_length_frac,
                                                   domain.finger_length_frac);
    hp.contact_clearance =
        base.contact_clearance +
        detail::draw_uniform(rng, -domain.clearance_range, domain.clearance_range);
  }

  const auto [pose, placed] = detail::sample_held(rng, hp, shape, max_attempts);
  SimState s;
  s.params = hp;
  s.shape = shape;
  s.q_left = placed.q_left;
  s.q_right = placed.q_right;
  s.object_pose = pose;
  s.contact_left = placed.contact_left;
  s.contact_right = placed.contact_right;

  const auto [goal_pose, goal_placed] = detail::sample_held(rng, hp, shape, max_attempts);
  (void)goal_placed;  // the goal only needs to be holdable

  ResetSample out{std::move(s), Goal{goal_pose}, 1.0};
  if (domain.kind == DomainKind::SurrogateReal)
    out.latency = detail::draw_uniform(rng, domain.latency_lo, domain.latency_hi);
  return out;
}

// ---------------------------------------------------------------------------
// Environment.

struct StepInfo {
  Pose2 pose;           // ground-truth object pose after the step
  Pose2 observed_pose;  // pose as encoded in the observation (noisy in surrogate)
  Status status = Status::Ok;
  bool success = false;
  int steps = 0;
  double executed_delta = 0.0;  // after the actuation gain
};

struct StepResult {
  Observation observation{};
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// One episodic environment instance. Deterministic given the seed stream
// passed to reset/step. Observations are RL-mode; IL consumers transform them
// afterwards (zero_velocity_slots / rewrite_goal_slots).
class Env {
 public:
  explicit Env(Shape2 shape, DomainParams domain = {}, RewardParams reward_params = {},
               EpisodeConfig episode = {}, bool use_shape_symmetry = false)
      : shape_(std::move(shape)),
        domain_(domain),
        reward_params_(reward_params),
        episode_(episode),
        fold_(use_shape_symmetry ? shape_.rotational_symmetry : 1) {}

  Observation reset(Rng& rng) {
    ResetSample rs = vf::reset(rng, shape_, domain_);
    state_ = std::move(rs.state);
    prev_state_ = state_;
    goal_ = rs.goal;
    latency_ = rs.latency;
    steps_ = 0;
    last_mode_ = -1;
    active_ = true;
    return observe(state_, goal_, last_mode_, ObsMode::RL,
                   domain_, &rng, nullptr, episode_.control_period);
  }

  StepResult step(const HybridAction& action, Rng& rng) {
    if (!active_) throw std::logic_error("Env::step: episode is finished");
    if (!action_valid(action)) throw std::invalid_argument("Env::step: invalid action");

    prev_state_ = state_;
    const HybridAction executed{action.mode, action.delta * latency_};
    StepOutcome out = execute_action(state_, executed);
    state_ = std::move(out.state);
    Status status = out.status;

    // Hardware slides drag the object through a small parasitic rotation;
    // applied in sub-half-degree increments so contacts track through it.
    if (domain_.kind == DomainKind::SurrogateReal && status == Status::Ok &&
        !is_pivot_mode(action.mode) && executed.delta > 0.0) {
      const double direction = (action.mode <= 1) ? 1.0 : -1.0;
      const double drift = direction * domain_.slide_drift_gain * executed.delta;
      const int n = std::max(1, static_cast<int>(std::ceil(std::abs(drift) / kSubstep)));
      for (int i = 0; i < n && status == Status::Ok; ++i)
        status = perturb_object_rotation(state_, drift / n);
    }

    ++steps_;
    last_mode_ = action.mode;

    StepResult r;
    r.observation = observe(state_, goal_, last_mode_, ObsMode::RL, domain_, &rng,
                            &prev_state_, episode_.control_period);
    const bool success = is_success(state_.object_pose, goal_, reward_params_, fold_);
    r.reward = reward(state_, status, goal_, reward_params_, fold_);
    r.done = success || status != Status::Ok || steps_ >= episode_.max_steps;
    r.info.pose = state_.object_pose;
    r.info.observed_pose = {r.observation[obs::kX], r.observation[obs::kY],
                            std::atan2(r.observation[obs::kSinTheta],
                                       r.observation[obs::kCosTheta])};
    r.info.status = status;
    r.info.success = success;
    r.info.steps = steps_;
    r.info.executed_delta = executed.delta;
    if (r.done) active_ = false;
    return r;
  }

  // Retargets the live episode (used by evaluation protocols and tests).
  void set_goal(const Goal& g) { goal_ = g; }

  // Harness hook: overwrite the object pose without re-solving contacts.
  // Bypasses physics — evaluation stubs and scene setup only. A zero-sweep
  // step afterwards reports success/reward from the planted pose.
  void set_object_pose(const Pose2& p) { state_.object_pose = p; }

  bool episode_active() const { return active_; }
  const SimState& state() const { return state_; }
  const Goal& goal() const { return goal_; }
  const Shape2& shape() const { return shape_; }
  const DomainParams& domain() const { return domain_; }
  const RewardParams& reward_params() const { return reward_params_; }
  const EpisodeConfig& episode_config() const { return episode_; }
  double latency() const { return latency_; }
  int steps_taken() const { return steps_; }
  int last_mode() const { return last_mode_; }
  int symmetry_fold() const { return fold_; }

 private:
  Shape2 shape_;
  DomainParams domain_;
  RewardParams reward_params_;
  EpisodeConfig episode_;
  int fold_ = 1;

  SimState state_, prev_state_;
  Goal goal_;
  double latency_ = 1.0;
  int steps_ = 0;
  int last_mode_ = -1;
  bool active_ = false;
};

}  // namespace vf
