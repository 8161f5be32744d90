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

// Demonstration generation: exploration-policy rollouts turned into expert
// demonstrations by relabeling each trajectory's final pose as its goal,
// plus a smoothness filter, normalization statistics, and a bit-exact binary
// dataset container.
//
// Domain tags are enforced, not conventional: Sim data comes from the
// randomized simulation domain, Real data from the surrogate-real domain
// (the stand-in for hardware; actual hardware data could be substituted
// without a format change).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vf/common.hpp"
#include "vf/geometry.hpp"
#include "vf/rl.hpp"
#include "vf/shape.hpp"
#include "vf/task.hpp"

namespace vf {

enum class DemoDomain : uint8_t { Sim = 0, Real = 1 };

inline const char* to_string(DemoDomain d) { return d == DemoDomain::Sim ? "sim" : "real"; }

inline DomainParams domain_params_for(DemoDomain d) {
  return d == DemoDomain::Sim ? DomainParams::randomized() : DomainParams::surrogate_real();
}

// ---------------------------------------------------------------------------
// Raw rollouts (pre-relabel).

struct RawStep {
  HybridAction action;
  double reward = 0.0;
  Status status = Status::Ok;
  Pose2 pose_after;  // ground truth
};

struct RawTrajectory {
  std::vector<Observation> observations;  // as collected (velocities populated)
  std::vector<RawStep> steps;
  Pose2 start_pose;
  std::string shape_name;
  uint64_t seed = 0;
  DemoDomain domain = DemoDomain::Sim;

  bool clean() const {
    for (const RawStep& s : steps)
      if (s.status != Status::Ok) return false;
    return true;
  }
};

// Rolls out the exploration policy (with its exploration noise, for action
// coverage; relabeling turns any outcome into an expert for where it ended).
// Environment failures terminate the affected rollout and are recorded in
// its step statuses, never thrown.
inline std::vector<RawTrajectory> collect_raw(const ActorNet& policy, const Shape2& shape,
                                              DemoDomain domain, int n, uint64_t seed,
                                              const Td3Config& action_cfg = {}) {
  std::vector<RawTrajectory> out;
  out.reserve(std::max(0, n));
  for (int i = 0; i < n; ++i) {
    const uint64_t traj_seed = seed ^ fnv1a64(std::to_string(i));
    Rng rng(traj_seed);
    Env env(shape, domain_params_for(domain));
    RawTrajectory traj;
    traj.shape_name = shape.name;
    traj.seed = traj_seed;
    traj.domain = domain;
    traj.observations.push_back(env.reset(rng));
    traj.start_pose = env.state().object_pose;
    while (env.episode_active()) {
      const HybridAction a =
          select_action(policy, traj.observations.back(), true, rng, action_cfg);
      const auto r = env.step(a, rng);
      traj.observations.push_back(r.observation);
      traj.steps.push_back({a, r.reward, r.info.status, r.info.pose});
    }
    out.push_back(std::move(traj));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hindsight relabeling and filtering.

struct DemoTrajectory {
  std::vector<Observation> observations;  // IL-mode, goal slots rewritten
  std::vector<HybridAction> actions;
  Pose2 start_pose;
  Pose2 achieved;  // ground-truth final pose; the relabeled goal equals it
  Goal goal;
  std::string shape_name;
  uint64_t seed = 0;
  DemoDomain domain = DemoDomain::Sim;
};

// The final state becomes the goal: goal slots of every observation are
// rewritten (deltas recomputed from each observation's own pose slots) and
// velocity slots zeroed for imitation-mode consumption.
inline DemoTrajectory hindsight_relabel(const RawTrajectory& raw) {
  if (raw.steps.empty())
    throw std::invalid_argument("hindsight_relabel: trajectory has no actions");
  if (raw.observations.size() != raw.steps.size() + 1)
    throw std::invalid_argument("hindsight_relabel: malformed trajectory");
  DemoTrajectory demo;
  demo.start_pose = raw.start_pose;
  demo.achieved = raw.steps.back().pose_after;
  demo.goal = Goal{demo.achieved};
  demo.shape_name = raw.shape_name;
  demo.seed = raw.seed;
  demo.domain = raw.domain;
  demo.observations = raw.observations;
  for (Observation& o : demo.observations) {
    zero_velocity_slots(o);
    rewrite_goal_slots(o, demo.goal);
  }
  demo.actions.reserve(raw.steps.size());
  for (const RawStep& s : raw.steps) demo.actions.push_back(s.action);
  return demo;
}

// Keep a rollout iff it stayed clean, has a task-scale length, and actually
// moved (degenerate no-op demos teach nothing).
inline constexpr double kMinDemoDisplacement = 0.002;  // m
inline constexpr double kMinDemoRotation = rad(2.0);
inline constexpr size_t kMaxDemoActions = 10;

inline bool smoothness_filter(const RawTrajectory& raw) {
  if (raw.steps.empty() || raw.steps.size() > kMaxDemoActions) return false;
  if (!raw.clean()) return false;
  const Pose2& end = raw.steps.back().pose_after;
  const double disp = norm(end.translation() - raw.start_pose.translation());
  const double rot = std::abs(wrap_angle(end.theta - raw.start_pose.theta));
  return disp >= kMinDemoDisplacement || rot >= kMinDemoRotation;
}

// Cuts a rollout at its first failed primitive (which also ended the
// episode). A failed step may leave the object partially advanced mid-sweep;
// dropping the step discards that motion together with its action, so the
// kept prefix is exactly the smooth, fully-executed part and relabeling
// treats wherever the prefix ended as the goal that was reached. May return
// a trajectory with no actions (first primitive failed), which the filter
// rejects.
inline RawTrajectory clean_prefix(const RawTrajectory& raw) {
  size_t n = 0;
  while (n < raw.steps.size() && raw.steps[n].status == Status::Ok) ++n;
  RawTrajectory out = raw;
  out.steps.resize(n);
  if (out.observations.size() > n + 1) out.observations.resize(n + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Datasets.

struct DemoDataset {
  std::vector<DemoTrajectory> trajectories;
  std::string shape_name;
  DemoDomain domain = DemoDomain::Sim;
  std::string generator_id;  // checkpoint identifier of the behavior policy
  uint64_t config_hash = 0;
};

// Truncate to the clean prefix, filter, relabel: a homogeneous dataset of
// demonstrations that each reach their own (relabeled) goal smoothly.
inline DemoDataset build_demo_dataset(const std::vector<RawTrajectory>& raws,
                                      const std::string& shape_name, DemoDomain domain,
                                      const std::string& generator_id,
                                      uint64_t config_hash) {
  DemoDataset ds;
  ds.shape_name = shape_name;
  ds.domain = domain;
  ds.generator_id = generator_id;
  ds.config_hash = config_hash;
  for (const RawTrajectory& raw : raws) {
    if (raw.shape_name != shape_name || raw.domain != domain)
      throw std::invalid_argument("build_demo_dataset: mixed shape or domain");
    const RawTrajectory pruned = clean_prefix(raw);
    if (smoothness_filter(pruned)) ds.trajectories.push_back(hindsight_relabel(pruned));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Normalization statistics (from the Real-tagged dataset only).

struct NormalizationStats {
  std::array<double, kObsDim> obs_mean{};
  std::array<double, kObsDim> obs_std{};
  double delta_mean = 0.0;
  double delta_std = 1.0;

  Observation normalize(const Observation& o) const {
    Observation out;
    for (int i = 0; i < kObsDim; ++i) out[i] = (o[i] - obs_mean[i]) / obs_std[i];
    return out;
  }
  Observation denormalize(const Observation& o) const {
    Observation out;
    for (int i = 0; i < kObsDim; ++i) out[i] = o[i] * obs_std[i] + obs_mean[i];
    return out;
  }
};

inline constexpr double kStatsSigmaFloor = 1e-6;

// Statistics regardless of domain tag. Exists for the one legitimate case
// with no real data at all (the zero-real ablation arm, which falls back to
// sim statistics); everything else goes through compute_stats below, which
// enforces the real-data-only rule.
inline NormalizationStats compute_stats_any(const DemoDataset& ds) {
  size_t n_obs = 0, n_act = 0;
  for (const DemoTrajectory& t : ds.trajectories) {
    n_obs += t.observations.size();
    n_act += t.actions.size();
  }
  if (n_obs == 0) throw std::invalid_argument("compute_stats: empty dataset");

  NormalizationStats s;
  for (const DemoTrajectory& t : ds.trajectories)
    for (const Observation& o : t.observations)
      for (int i = 0; i < kObsDim; ++i) s.obs_mean[i] += o[i];
  for (int i = 0; i < kObsDim; ++i) s.obs_mean[i] /= static_cast<double>(n_obs);

  std::array<double, kObsDim> var{};
  for (const DemoTrajectory& t : ds.trajectories)
    for (const Observation& o : t.observations)
      for (int i = 0; i < kObsDim; ++i) {
        const double d = o[i] - s.obs_mean[i];
        var[i] += d * d;
      }
  for (int i = 0; i < kObsDim; ++i)
    s.obs_std[i] = std::max(std::sqrt(var[i] / static_cast<double>(n_obs)), kStatsSigmaFloor);

  if (n_act > 0) {
    double mean = 0.0;
    for (const DemoTrajectory& t : ds.trajectories)
      for (const HybridAction& a : t.actions) mean += a.delta;
    mean /= static_cast<double>(n_act);
    double var_d = 0.0;
    for (const DemoTrajectory& t : ds.trajectories)
      for (const HybridAction& a : t.actions) {
        const double d = a.delta - mean;
        var_d += d * d;
      }
    s.delta_mean = mean;
    s.delta_std = std::max(std::sqrt(var_d / static_cast<double>(n_act)), kStatsSigmaFloor);
  }
  return s;
}

inline NormalizationStats compute_stats(const DemoDataset& ds) {
  if (ds.domain != DemoDomain::Real)
    throw std::invalid_argument("compute_stats: statistics come from the real data only");
  return compute_stats_any(ds);
}

// ---------------------------------------------------------------------------
// Binary container ("VFD1"): header, fixed-layout trajectory records, CRC-32.

inline constexpr char kDemoMagic[4] = {'V', 'F', 'D', '1'};

inline void write_pose(ByteWriter& w, const Pose2& p) {
  w.f64(p.x);
  w.f64(p.y);
  w.f64(p.theta);
}
inline Pose2 read_pose(ByteReader& r) {
  Pose2 p;
  p.x = r.f64();
  p.y = r.f64();
  p.theta = r.f64();
  return p;
}

inline void serialize(const DemoDataset& ds, const std::string& path) {
  ByteWriter w;
  w.magic(kDemoMagic);
  w.u32(1);  // format version
  w.str(ds.shape_name);
  w.u8(static_cast<uint8_t>(ds.domain));
  w.str(ds.generator_id);
  w.u64(ds.config_hash);
  w.u32(static_cast<uint32_t>(ds.trajectories.size()));
  for (const DemoTrajectory& t : ds.trajectories) {
    if (t.observations.size() != t.actions.size() + 1)
      throw std::invalid_argument("serialize: malformed trajectory");
    w.u64(t.seed);
    write_pose(w, t.start_pose);
    write_pose(w, t.achieved);
    write_pose(w, t.goal.pose);
    w.u32(static_cast<uint32_t>(t.actions.size()));
    for (const Observation& o : t.observations)
      w.raw(o.data(), sizeof(double) * o.size());
    for (const HybridAction& a : t.actions) {
      w.i32(a.mode);
      w.f64(a.delta);
    }
  }
  w.finish_with_crc();
  w.write_file(path);
}

inline DemoDataset deserialize(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.verify_crc_trailer();
  r.expect_magic(kDemoMagic);
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  DemoDataset ds;
  ds.shape_name = r.str();
  ds.domain = static_cast<DemoDomain>(r.u8());
  ds.generator_id = r.str();
  ds.config_hash = r.u64();
  const uint32_t n = r.u32();
  ds.trajectories.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    DemoTrajectory t;
    t.shape_name = ds.shape_name;
    t.domain = ds.domain;
    t.seed = r.u64();
    t.start_pose = read_pose(r);
    t.achieved = read_pose(r);
    t.goal.pose = read_pose(r);
    const uint32_t actions = r.u32();
    t.observations.resize(actions + 1);
    for (Observation& o : t.observations) r.raw(o.data(), sizeof(double) * o.size());
    t.actions.resize(actions);
    for (HybridAction& a : t.actions) {
      a.mode = r.i32();
      a.delta = r.f64();
    }
    ds.trajectories.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw std::runtime_error("corrupt dataset: trailing bytes");
  return ds;
}

// Exact on-disk size of a dataset (header + records + checksum), used to
// validate the fixed layout.
inline size_t serialized_size(const DemoDataset& ds) {
  size_t n = 4 + 4;                              // magic + version
  n += 4 + ds.shape_name.size();                 // shape
  n += 1;                                        // domain tag
  n += 4 + ds.generator_id.size();               // generator id
  n += 8 + 4;                                    // config hash + count
  for (const DemoTrajectory& t : ds.trajectories) {
    n += 8 + 3 * 24;                             // seed + three poses
    n += 4;                                      // action count
    n += t.observations.size() * kObsDim * 8;
    n += t.actions.size() * 12;
  }
  return n + 4;  // CRC trailer
}

}  // namespace vf
