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

// Evaluation protocol and experiment drivers: seeded multi-trial rollouts
// with per-episode records, seed-level aggregation (mean ± std of per-seed
// success rates; error statistics over successful episodes only), the
// real-demo-amount ablation, the training-preset comparison, and trajectory
// export for external visualization.
//
// Pairing guarantee: every (seed, trial) cell derives its environment random
// stream independently of the policy's stream and of episode lengths, so two
// policies evaluated at the same base seed face identical (start, goal)
// sequences.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "vf/common.hpp"
#include "vf/demos.hpp"
#include "vf/diffusion.hpp"
#include "vf/geometry.hpp"
#include "vf/rl.hpp"
#include "vf/shape.hpp"
#include "vf/task.hpp"

namespace vf {

// ---------------------------------------------------------------------------
// Seed derivation (splitmix-style finalizer) shared by every driver so that
// export, evaluation, and paired comparisons reproduce each other's episodes.

inline uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b = 0) {
  uint64_t h = base ^ (a + 1) * 0x9E3779B97F4A7C15ULL ^ (b + 1) * 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 30;
  h *= 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 27;
  h *= 0x94D049BB133111EBULL;
  h ^= h >> 31;
  return h;
}

// ---------------------------------------------------------------------------
// Protocol and records.

struct EvalProtocol {
  int trials_per_seed = 10;
  int seeds = 3;
  int max_steps = 10;
  RewardParams thresholds;  // d_bar / theta_bar define success
  bool use_shape_symmetry = false;
};

struct EpisodeRecord {
  int seed_index = 0;
  int trial = 0;
  bool success = false;
  int steps = 0;
  Pose2 start_pose;
  Pose2 final_pose;
  Pose2 goal;
  double pos_error = 0.0;  // m, ground truth vs goal
  double rot_error = 0.0;  // rad, symmetry-folded like the success test
  Status final_status = Status::Ok;
};

struct Metrics {
  double success_rate_mean = 0.0;  // percent, mean of per-seed rates
  double success_rate_std = 0.0;   // percent, sample std across seeds
  // Over successful episodes only; NaN when there are none, std 0 for one.
  double pos_error_mm_mean = std::numeric_limits<double>::quiet_NaN();
  double pos_error_mm_std = std::numeric_limits<double>::quiet_NaN();
  double rot_error_deg_mean = std::numeric_limits<double>::quiet_NaN();
  double rot_error_deg_std = std::numeric_limits<double>::quiet_NaN();
  int n_episodes = 0;
  int n_successes = 0;
  std::vector<EpisodeRecord> records;
};

// Pure function of the records: re-aggregating a Metrics' own records
// reproduces its numbers.
inline Metrics aggregate_metrics(std::vector<EpisodeRecord> records, int n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("aggregate_metrics: need at least one seed");
  Metrics m;
  m.n_episodes = static_cast<int>(records.size());

  std::vector<int> per_seed_total(n_seeds, 0), per_seed_success(n_seeds, 0);
  for (const EpisodeRecord& r : records) {
    if (r.seed_index < 0 || r.seed_index >= n_seeds)
      throw std::invalid_argument("aggregate_metrics: record outside the seed range");
    ++per_seed_total[r.seed_index];
    if (r.success) {
      ++per_seed_success[r.seed_index];
      ++m.n_successes;
    }
  }

  std::vector<double> rates;
  for (int s = 0; s < n_seeds; ++s)
    if (per_seed_total[s] > 0)
      rates.push_back(100.0 * per_seed_success[s] / per_seed_total[s]);
  if (!rates.empty()) {
    double mean = 0.0;
    for (double r : rates) mean += r;
    mean /= static_cast<double>(rates.size());
    double var = 0.0;
    for (double r : rates) var += (r - mean) * (r - mean);
    m.success_rate_mean = mean;
    m.success_rate_std = rates.size() > 1 ? std::sqrt(var / (rates.size() - 1)) : 0.0;
  }

  std::vector<double> pos_mm, rot_deg;
  for (const EpisodeRecord& r : records)
    if (r.success) {
      pos_mm.push_back(r.pos_error * 1000.0);
      rot_deg.push_back(deg(r.rot_error));
    }
  const auto mean_std = [](const std::vector<double>& v) -> std::pair<double, double> {
    if (v.empty())
      return {std::numeric_limits<double>::quiet_NaN(),
              std::numeric_limits<double>::quiet_NaN()};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0};
  };
  std::tie(m.pos_error_mm_mean, m.pos_error_mm_std) = mean_std(pos_mm);
  std::tie(m.rot_error_deg_mean, m.rot_error_deg_std) = mean_std(rot_deg);

  m.records = std::move(records);
  return m;
}

// ---------------------------------------------------------------------------
// Episode execution.

// A policy under evaluation: observation in, action out. The Env reference is
// read-only for real policies; test stubs may use its harness hooks.
using EpisodePolicy = std::function<HybridAction(Env&, const Observation&, Rng&)>;

// One exported trajectory row (also the CSV record layout).
struct TrajRow {
  int step = 0;
  int mode = -1;  // -1 on the initial row (no action taken yet)
  double delta = 0.0;
  double q_left = 0.0, q_right = 0.0;
  Pose2 pose;
  Pose2 goal;
  Status status = Status::Ok;
};

inline EpisodeRecord run_episode(const Shape2& shape, const DomainParams& domain,
                                 const EvalProtocol& proto, const EpisodePolicy& policy,
                                 uint64_t base_seed, int seed_index, int trial,
                                 std::vector<TrajRow>* rows = nullptr) {
  EpisodeConfig ec;
  ec.max_steps = proto.max_steps;
  Env env(shape, domain, proto.thresholds, ec, proto.use_shape_symmetry);
  Rng env_rng(mix_seed(base_seed, static_cast<uint64_t>(seed_index), trial));
  Rng policy_rng(mix_seed(base_seed ^ 0xA5A5A5A5A5A5A5A5ULL,
                          static_cast<uint64_t>(seed_index), trial));

  Observation obs = env.reset(env_rng);
  EpisodeRecord rec;
  rec.seed_index = seed_index;
  rec.trial = trial;
  rec.start_pose = env.state().object_pose;
  rec.goal = env.goal().pose;
  if (rows)
    rows->push_back({0, -1, 0.0, env.state().q_left, env.state().q_right,
                     env.state().object_pose, rec.goal, Status::Ok});

  StepInfo last;
  last.pose = rec.start_pose;
  while (env.episode_active()) {
    const HybridAction a = policy(env, obs, policy_rng);
    const StepResult r = env.step(a, env_rng);
    obs = r.observation;
    last = r.info;
    if (rows)
      rows->push_back({r.info.steps, a.mode, a.delta, env.state().q_left,
                       env.state().q_right, r.info.pose, env.goal().pose, r.info.status});
  }

  rec.success = last.success;
  rec.steps = last.steps;
  rec.final_pose = last.pose;
  rec.final_status = last.status;
  rec.pos_error = norm(rec.final_pose.translation() - rec.goal.translation());
  rec.rot_error = angle_difference(rec.final_pose.theta, rec.goal.theta, env.symmetry_fold());
  return rec;
}

// The evaluation protocol: seeds × trials episodes, aggregated.
inline Metrics run_eval(const Shape2& shape, const DomainParams& domain,
                        const EvalProtocol& proto, const EpisodePolicy& policy,
                        uint64_t base_seed) {
  if (proto.trials_per_seed < 1 || proto.seeds < 1)
    throw std::invalid_argument("run_eval: trials and seeds must be at least 1");
  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<size_t>(proto.seeds) * proto.trials_per_seed);
  for (int s = 0; s < proto.seeds; ++s)
    for (int t = 0; t < proto.trials_per_seed; ++t)
      records.push_back(run_episode(shape, domain, proto, policy, base_seed, s, t));
  return aggregate_metrics(std::move(records), proto.seeds);
}

// ---------------------------------------------------------------------------
// Policy adapters. Both capture by reference: the underlying network must
// outlive the returned functor.

// Exploration policy, noise off.
inline EpisodePolicy make_actor_policy(const ActorNet& actor, const Td3Config& cfg = {}) {
  return [&actor, cfg](Env&, const Observation& o, Rng& rng) {
    return select_action(actor, o, false, rng, cfg);
  };
}

// Diffusion policy. Environment observations carry the live goal in their
// goal slots already, so the imitation-mode transform at evaluation time is
// zeroing the velocity slots (demonstrations were stored the same way).
inline EpisodePolicy make_diffusion_policy(const DiffusionPolicy& p) {
  return [&p](Env&, const Observation& o, Rng& rng) {
    Observation il = o;
    zero_velocity_slots(il);
    return sample_action(p, il, rng);
  };
}

// ---------------------------------------------------------------------------
// Trajectory export.

inline std::vector<TrajRow> export_trajectory(const Shape2& shape, const DomainParams& domain,
                                              const EvalProtocol& proto,
                                              const EpisodePolicy& policy, uint64_t base_seed,
                                              const std::string& path) {
  std::vector<TrajRow> rows;
  run_episode(shape, domain, proto, policy, base_seed, 0, 0, &rows);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("export_trajectory: cannot open " + path);
  out << "step,mode,delta,q_left,q_right,x,y,theta,goal_x,goal_y,goal_theta,status\n";
  out.precision(17);
  for (const TrajRow& r : rows)
    out << r.step << ',' << r.mode << ',' << r.delta << ',' << r.q_left << ',' << r.q_right
        << ',' << r.pose.x << ',' << r.pose.y << ',' << r.pose.theta << ',' << r.goal.x << ','
        << r.goal.y << ',' << r.goal.theta << ',' << to_string(r.status) << '\n';
  if (!out) throw std::runtime_error("export_trajectory: write failed for " + path);
  return rows;
}

// ---------------------------------------------------------------------------
// Experiment drivers: real-amount ablation and preset comparison.

struct ExperimentSetup {
  Shape2 shape;
  DomainParams eval_domain = DomainParams::surrogate_real();
  EvalProtocol protocol;
  CoTrainConfig train;
  uint64_t train_seed = 1;
  uint64_t eval_seed = 2;
};

struct TrainedEval {
  TrainPreset preset = TrainPreset::CoTrain;
  int real_amount = 0;
  bool skipped = false;
  std::string skip_reason;
  Metrics metrics;
};

inline DemoDataset take_first(const DemoDataset& ds, size_t n) {
  if (n > ds.trajectories.size())
    throw std::invalid_argument("take_first: dataset has too few trajectories");
  DemoDataset out = ds;
  out.trajectories.assign(ds.trajectories.begin(),
                          ds.trajectories.begin() + static_cast<long>(n));
  return out;
}

inline Metrics evaluate_diffusion(const DiffusionPolicy& policy, const ExperimentSetup& setup) {
  return run_eval(setup.shape, setup.eval_domain, setup.protocol,
                  make_diffusion_policy(policy), setup.eval_seed);
}

// Trains co-train and real-only variants at each real-demo amount and
// evaluates them under the paired protocol. The zero-amount co-train arm is
// by definition the sim-only preset (normalized with sim statistics, there
// being no real data); the zero-amount real-only arm is skipped.
inline std::vector<TrainedEval> ablate_real_amount(const DemoDataset& sim,
                                                   const DemoDataset& real,
                                                   const std::vector<int>& amounts,
                                                   const ExperimentSetup& setup,
                                                   std::ostream* log = nullptr) {
  std::vector<TrainedEval> rows;
  for (const int amount : amounts) {
    if (amount < 0 || static_cast<size_t>(amount) > real.trajectories.size())
      throw std::invalid_argument("ablate_real_amount: insufficient real demonstrations");
    const DemoDataset real_slice = take_first(real, static_cast<size_t>(amount));
    for (const TrainPreset variant : {TrainPreset::CoTrain, TrainPreset::RealOnly}) {
      TrainedEval row;
      row.real_amount = amount;
      row.preset = variant;
      if (amount == 0 && variant == TrainPreset::RealOnly) {
        row.skipped = true;
        row.skip_reason = "cannot train on an empty real set";
      } else if (amount == 0) {
        const CoTrainResult r =
            cotrain_with_stats(sim, real_slice, compute_stats_any(sim),
                               TrainPreset::SimOnly, setup.train, setup.train_seed, log);
        row.metrics = evaluate_diffusion(r.policy, setup);
      } else {
        const CoTrainResult r =
            cotrain(sim, real_slice, variant, setup.train, setup.train_seed, log);
        row.metrics = evaluate_diffusion(r.policy, setup);
      }
      if (log && !row.skipped)
        (*log) << "ablation amount " << amount << " " << to_string(row.preset) << " success "
               << row.metrics.success_rate_mean << "%\n";
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// Trains every preset with identical seeds and evaluates each on identical
// goal sequences (paired comparison).
inline std::vector<TrainedEval> compare_presets(const DemoDataset& sim,
                                                const DemoDataset& real,
                                                const ExperimentSetup& setup,
                                                std::ostream* log = nullptr) {
  std::vector<TrainedEval> rows;
  for (const TrainPreset preset : {TrainPreset::CoTrain, TrainPreset::SimOnly,
                                   TrainPreset::RealOnly, TrainPreset::FineTune}) {
    TrainedEval row;
    row.preset = preset;
    row.real_amount = static_cast<int>(real.trajectories.size());
    const CoTrainResult r = cotrain(sim, real, preset, setup.train, setup.train_seed, log);
    row.metrics = evaluate_diffusion(r.policy, setup);
    if (log)
      (*log) << "preset " << to_string(preset) << " success " << row.metrics.success_rate_mean
             << "% ± " << row.metrics.success_rate_std << "\n";
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace vf
