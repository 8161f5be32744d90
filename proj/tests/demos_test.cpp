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

#include "vf/demos.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "vf/rl.hpp"
#include "vf/shape.hpp"
#include "vf/task.hpp"

namespace {

vf::ActorNet tiny_policy(uint64_t seed) {
  vf::Rng rng(seed);
  return vf::ActorNet(vf::kObsDim, 16, 1, rng);
}

std::vector<vf::RawTrajectory> collect_some(vf::DemoDomain domain, int n, uint64_t seed) {
  const vf::ActorNet policy = tiny_policy(7);
  return vf::collect_raw(policy, vf::make_square(0.06), domain, n, seed);
}

// A hand-built single-step trajectory whose endpoint is `end`, for exercising
// the filter and the statistics code without running the simulator.
vf::RawTrajectory synthetic_raw(vf::Pose2 start, vf::Pose2 end, int n_steps,
                                vf::Status final_status = vf::Status::Ok) {
  vf::RawTrajectory raw;
  raw.shape_name = "synthetic";
  raw.seed = 1;
  raw.domain = vf::DemoDomain::Sim;
  raw.start_pose = start;
  vf::Observation o{};
  o[10] = start.x;
  o[11] = start.y;
  o[15] = std::cos(start.theta);
  o[16] = std::sin(start.theta);
  raw.observations.push_back(o);
  for (int i = 0; i < n_steps; ++i) {
    const bool last = i == n_steps - 1;
    const vf::Pose2 p = last ? end : start;
    vf::Observation oi = o;
    oi[10] = p.x;
    oi[11] = p.y;
    oi[15] = std::cos(p.theta);
    oi[16] = std::sin(p.theta);
    raw.observations.push_back(oi);
    raw.steps.push_back({{0, 0.01}, 0.0, last ? final_status : vf::Status::Ok, p});
  }
  return raw;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// ---------------------------------------------------------------------------
// Collection.

// [TRIVIAL] Requested count, and the step/observation bookkeeping invariant.
TEST(DemoCollect, ProducesRequestedCountWithConsistentShapes) {
  const auto raws = collect_some(vf::DemoDomain::Sim, 4, 11);
  ASSERT_EQ(raws.size(), 4u);
  for (const auto& raw : raws) {
    EXPECT_EQ(raw.shape_name, "cube");
    EXPECT_EQ(raw.domain, vf::DemoDomain::Sim);
    ASSERT_GE(raw.steps.size(), 1u);
    EXPECT_EQ(raw.observations.size(), raw.steps.size() + 1);
  }
  EXPECT_TRUE(vf::collect_raw(tiny_policy(7), vf::make_square(0.06), vf::DemoDomain::Sim, 0, 11)
                  .empty());
}

// [TRIVIAL] Same seed, same trajectories, bit for bit.
TEST(DemoCollect, IsDeterministic) {
  const auto a = collect_some(vf::DemoDomain::Real, 3, 21);
  const auto b = collect_some(vf::DemoDomain::Real, 3, 21);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].seed, b[i].seed);
    ASSERT_EQ(a[i].steps.size(), b[i].steps.size());
    for (size_t j = 0; j < a[i].steps.size(); ++j) {
      EXPECT_EQ(a[i].steps[j].action.mode, b[i].steps[j].action.mode);
      EXPECT_EQ(a[i].steps[j].action.delta, b[i].steps[j].action.delta);
      EXPECT_EQ(a[i].steps[j].pose_after.x, b[i].steps[j].pose_after.x);
      EXPECT_EQ(a[i].steps[j].pose_after.theta, b[i].steps[j].pose_after.theta);
    }
    for (size_t j = 0; j < a[i].observations.size(); ++j)
      EXPECT_EQ(a[i].observations[j], b[i].observations[j]);
  }
}

// [DERIVED: the sim domain publishes exact poses, the surrogate-real domain
// noisy ones] Observable consequence of the enforced tag→domain mapping.
TEST(DemoCollect, DomainTagSelectsTheMatchingDomain) {
  for (const auto& raw : collect_some(vf::DemoDomain::Sim, 2, 31)) {
    for (size_t j = 0; j < raw.steps.size(); ++j) {
      EXPECT_DOUBLE_EQ(raw.observations[j + 1][10], raw.steps[j].pose_after.x);
      EXPECT_DOUBLE_EQ(raw.observations[j + 1][11], raw.steps[j].pose_after.y);
    }
  }
  double worst = 0.0;
  for (const auto& raw : collect_some(vf::DemoDomain::Real, 2, 31)) {
    for (size_t j = 0; j < raw.steps.size(); ++j)
      worst = std::max(worst, std::abs(raw.observations[j + 1][10] - raw.steps[j].pose_after.x));
  }
  EXPECT_GT(worst, 1e-9);  // position noise is present
}

// ---------------------------------------------------------------------------
// Hindsight relabeling.

// [TRIVIAL] The relabeled goal is the achieved final pose, exactly.
TEST(DemoRelabel, GoalEqualsAchievedFinalPose) {
  const auto raws = collect_some(vf::DemoDomain::Sim, 2, 41);
  for (const auto& raw : raws) {
    const vf::DemoTrajectory demo = vf::hindsight_relabel(raw);
    const vf::Pose2& truth = raw.steps.back().pose_after;
    EXPECT_EQ(demo.achieved.x, truth.x);
    EXPECT_EQ(demo.achieved.y, truth.y);
    EXPECT_EQ(demo.achieved.theta, truth.theta);
    EXPECT_EQ(demo.goal.pose.x, truth.x);
    EXPECT_EQ(demo.goal.pose.y, truth.y);
    EXPECT_EQ(demo.goal.pose.theta, truth.theta);
    EXPECT_EQ(demo.actions.size(), raw.steps.size());
    EXPECT_EQ(demo.observations.size(), raw.observations.size());
  }
}

// [DERIVED: goal − pose at the endpoint is the identity transform] In the
// noise-free sim domain the final observation's delta slots must encode it.
TEST(DemoRelabel, FinalObservationEncodesIdentityDelta) {
  for (const auto& raw : collect_some(vf::DemoDomain::Sim, 3, 51)) {
    const vf::DemoTrajectory demo = vf::hindsight_relabel(raw);
    const vf::Observation& last = demo.observations.back();
    EXPECT_NEAR(last[21], 0.0, 1e-12);  // Δx
    EXPECT_NEAR(last[22], 0.0, 1e-12);  // Δy
    EXPECT_NEAR(last[23], 1.0, 1e-12);  // cos Δθ
    EXPECT_NEAR(last[24], 0.0, 1e-12);  // sin Δθ
    // Goal slots spell out the relabeled goal itself.
    EXPECT_DOUBLE_EQ(last[17], demo.goal.pose.x);
    EXPECT_DOUBLE_EQ(last[18], demo.goal.pose.y);
    EXPECT_NEAR(last[19], std::cos(demo.goal.pose.theta), 1e-15);
    EXPECT_NEAR(last[20], std::sin(demo.goal.pose.theta), 1e-15);
  }
}

// [DERIVED: zero pose error satisfies any positive threshold] Success
// recomputed against the relabeled goal is true at the final step, in every
// domain — the achieved pose is ground truth, so noise cannot break this.
TEST(DemoRelabel, RecomputedSuccessHoldsAtFinalStep) {
  const vf::RewardParams rp;
  for (vf::DemoDomain domain : {vf::DemoDomain::Sim, vf::DemoDomain::Real}) {
    for (const auto& raw : collect_some(domain, 2, 61)) {
      const vf::DemoTrajectory demo = vf::hindsight_relabel(raw);
      EXPECT_TRUE(vf::is_success(demo.achieved, demo.goal, rp));
    }
  }
}

// [TRIVIAL] Velocity slots are zeroed; all other non-goal slots are untouched.
TEST(DemoRelabel, ZeroesVelocitiesAndPreservesTheRest) {
  const auto raws = collect_some(vf::DemoDomain::Sim, 1, 71);
  const vf::DemoTrajectory demo = vf::hindsight_relabel(raws[0]);
  const std::array<int, 5> velocity_slots = {2, 3, 12, 13, 14};
  for (size_t i = 0; i < demo.observations.size(); ++i) {
    for (int s : velocity_slots) EXPECT_EQ(demo.observations[i][s], 0.0);
    for (int s : {0, 1, 4, 5, 6, 7, 8, 9, 10, 11, 15, 16})
      EXPECT_EQ(demo.observations[i][s], raws[0].observations[i][s]);
  }
}

// [TRIVIAL]
TEST(DemoRelabel, ThrowsOnActionlessTrajectory) {
  vf::RawTrajectory raw;
  raw.observations.push_back(vf::Observation{});
  EXPECT_THROW(vf::hindsight_relabel(raw), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Smoothness filter.

// [DERIVED: thresholds 2 mm / 2° / 1–10 actions / all-clean, pinned here]
TEST(DemoFilter, AcceptsCleanMovingTrajectoriesOnly) {
  const vf::Pose2 start{0.0, 0.05, 0.0};
  // Moves 3 mm: keep.
  EXPECT_TRUE(vf::smoothness_filter(synthetic_raw(start, {0.003, 0.05, 0.0}, 1)));
  // Rotates 3° in place: keep.
  EXPECT_TRUE(vf::smoothness_filter(synthetic_raw(start, {0.0, 0.05, vf::rad(3.0)}, 1)));
  // Barely moves: drop.
  EXPECT_FALSE(vf::smoothness_filter(synthetic_raw(start, {0.001, 0.05, vf::rad(1.0)}, 1)));
  // Clean and moving but too long (11 actions): drop.
  EXPECT_FALSE(vf::smoothness_filter(synthetic_raw(start, {0.01, 0.06, 0.0}, 11)));
  // Ends in a failure: drop.
  EXPECT_FALSE(vf::smoothness_filter(
      synthetic_raw(start, {0.01, 0.06, 0.0}, 2, vf::Status::OutOfRange)));
  // No actions at all: drop.
  vf::RawTrajectory empty;
  empty.observations.push_back(vf::Observation{});
  EXPECT_FALSE(vf::smoothness_filter(empty));
}

// [TRIVIAL] A failed final step is trimmed off and the moving clean prefix
// survives; a failure on the very first step leaves nothing to keep.
TEST(DemoDatasetBuild, KeepsTheCleanPrefixOfFailedRollouts) {
  const vf::Pose2 start{0.0, 0.05, 0.0};
  const vf::Pose2 moved{0.01, 0.06, 0.2};

  // Moves on step 1, fails on step 2: the one-action prefix is a demo whose
  // achieved pose is where the prefix ended.
  vf::RawTrajectory trimmed = synthetic_raw(start, moved, 1);
  trimmed.observations.push_back(trimmed.observations.back());
  trimmed.steps.push_back({{0, 0.01}, 0.0, vf::Status::OutOfRange, moved});
  // Fails immediately: empty prefix, dropped.
  const vf::RawTrajectory dead =
      synthetic_raw(start, start, 1, vf::Status::LostContact);

  const vf::DemoDataset ds = vf::build_demo_dataset({trimmed, dead}, "synthetic",
                                                    vf::DemoDomain::Sim, "gen-test", 7);
  ASSERT_EQ(ds.trajectories.size(), 1u);
  EXPECT_EQ(ds.trajectories[0].actions.size(), 1u);
  EXPECT_EQ(ds.trajectories[0].achieved.x, moved.x);
  EXPECT_EQ(ds.trajectories[0].achieved.theta, moved.theta);
}

// [TRIVIAL] Dataset assembly applies the filter and rejects mixed content.
TEST(DemoDatasetBuild, FiltersAndEnforcesHomogeneity) {
  const vf::Pose2 start{0.0, 0.05, 0.0};
  std::vector<vf::RawTrajectory> raws;
  raws.push_back(synthetic_raw(start, {0.01, 0.05, 0.0}, 2));                          // keep
  raws.push_back(synthetic_raw(start, {0.0001, 0.05, 0.0}, 1));                        // drop
  raws.push_back(synthetic_raw(start, {0.01, 0.06, 0.3}, 3, vf::Status::Jammed));      // drop:
  // the clean prefix of the jammed rollout never moved off the start pose
  const vf::DemoDataset ds =
      vf::build_demo_dataset(raws, "synthetic", vf::DemoDomain::Sim, "gen-test", 42);
  EXPECT_EQ(ds.trajectories.size(), 1u);
  EXPECT_EQ(ds.config_hash, 42u);

  std::vector<vf::RawTrajectory> mixed = raws;
  mixed[0].shape_name = "other";
  EXPECT_THROW(vf::build_demo_dataset(mixed, "synthetic", vf::DemoDomain::Sim, "g", 0),
               std::invalid_argument);
  EXPECT_THROW(vf::build_demo_dataset(raws, "synthetic", vf::DemoDomain::Real, "g", 0),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Normalization statistics.

vf::DemoDataset two_point_dataset() {
  vf::DemoDataset ds;
  ds.shape_name = "synthetic";
  ds.domain = vf::DemoDomain::Real;
  vf::DemoTrajectory t;
  vf::Observation a, b;
  a.fill(1.0);
  b.fill(3.0);
  t.observations = {a, b};
  t.actions = {{0, 0.2}};
  ds.trajectories.push_back(t);
  return ds;
}

// [DERIVED: population mean/σ of {1, 3} are 2 and 1; a single action sample
// has zero variance, which the floor replaces]
TEST(DemoStats, HandComputedTwoPointDataset) {
  const vf::NormalizationStats s = vf::compute_stats(two_point_dataset());
  for (int i = 0; i < vf::kObsDim; ++i) {
    EXPECT_DOUBLE_EQ(s.obs_mean[i], 2.0);
    EXPECT_DOUBLE_EQ(s.obs_std[i], 1.0);
  }
  EXPECT_DOUBLE_EQ(s.delta_mean, 0.2);
  EXPECT_EQ(s.delta_std, 1e-6);
}

// [DERIVED: a constant dimension has σ = 0, floored to exactly 1e-6]
TEST(DemoStats, ConstantDimensionGetsSigmaFloor) {
  vf::DemoDataset ds = two_point_dataset();
  for (auto& o : ds.trajectories[0].observations) o[4] = 7.5;
  const vf::NormalizationStats s = vf::compute_stats(ds);
  EXPECT_DOUBLE_EQ(s.obs_mean[4], 7.5);
  EXPECT_EQ(s.obs_std[4], 1e-6);
  EXPECT_DOUBLE_EQ(s.obs_std[5], 1.0);  // neighbors unaffected
}

// [DERIVED: (x − μ)/σ · σ + μ = x]
TEST(DemoStats, NormalizeRoundTrips) {
  const vf::NormalizationStats s = vf::compute_stats(two_point_dataset());
  vf::Rng rng(81);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  vf::Observation o;
  for (auto& v : o) v = u(rng);
  const vf::Observation back = s.denormalize(s.normalize(o));
  for (int i = 0; i < vf::kObsDim; ++i) EXPECT_NEAR(back[i], o[i], 1e-12);
  // Normalizing the dataset's own observations yields ±1 for μ±σ points.
  const vf::Observation z = s.normalize(two_point_dataset().trajectories[0].observations[0]);
  EXPECT_DOUBLE_EQ(z[0], -1.0);
}

// [TRIVIAL] Statistics are defined only for non-empty real-domain data.
TEST(DemoStats, RejectsSimDomainAndEmptyData) {
  vf::DemoDataset sim = two_point_dataset();
  sim.domain = vf::DemoDomain::Sim;
  EXPECT_THROW(vf::compute_stats(sim), std::invalid_argument);
  vf::DemoDataset empty;
  empty.domain = vf::DemoDomain::Real;
  EXPECT_THROW(vf::compute_stats(empty), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Serialization.

vf::DemoDataset collected_dataset(vf::DemoDomain domain, int n, uint64_t seed) {
  return vf::build_demo_dataset(collect_some(domain, n, seed), "cube", domain, "gen-a",
                                vf::fnv1a64("config"));
}

void expect_datasets_equal(const vf::DemoDataset& a, const vf::DemoDataset& b) {
  EXPECT_EQ(a.shape_name, b.shape_name);
  EXPECT_EQ(a.domain, b.domain);
  EXPECT_EQ(a.generator_id, b.generator_id);
  EXPECT_EQ(a.config_hash, b.config_hash);
  ASSERT_EQ(a.trajectories.size(), b.trajectories.size());
  for (size_t i = 0; i < a.trajectories.size(); ++i) {
    const vf::DemoTrajectory& x = a.trajectories[i];
    const vf::DemoTrajectory& y = b.trajectories[i];
    EXPECT_EQ(x.seed, y.seed);
    EXPECT_EQ(x.shape_name, y.shape_name);
    EXPECT_EQ(x.domain, y.domain);
    EXPECT_EQ(x.start_pose.x, y.start_pose.x);
    EXPECT_EQ(x.start_pose.y, y.start_pose.y);
    EXPECT_EQ(x.start_pose.theta, y.start_pose.theta);
    EXPECT_EQ(x.achieved.x, y.achieved.x);
    EXPECT_EQ(x.achieved.theta, y.achieved.theta);
    EXPECT_EQ(x.goal.pose.x, y.goal.pose.x);
    EXPECT_EQ(x.goal.pose.theta, y.goal.pose.theta);
    ASSERT_EQ(x.observations.size(), y.observations.size());
    for (size_t j = 0; j < x.observations.size(); ++j)
      EXPECT_EQ(x.observations[j], y.observations[j]);  // bit-exact doubles
    ASSERT_EQ(x.actions.size(), y.actions.size());
    for (size_t j = 0; j < x.actions.size(); ++j) {
      EXPECT_EQ(x.actions[j].mode, y.actions[j].mode);
      EXPECT_EQ(x.actions[j].delta, y.actions[j].delta);
    }
  }
}

// [DERIVED: round-trip through the container is the identity, bit for bit]
TEST(DemoSerialize, RoundTripIsBitExact) {
  const vf::DemoDataset ds = collected_dataset(vf::DemoDomain::Real, 6, 91);
  const std::string path = temp_path("demos_roundtrip.vfd");
  vf::serialize(ds, path);
  const vf::DemoDataset back = vf::deserialize(path);
  expect_datasets_equal(ds, back);
  std::remove(path.c_str());
}

// [DERIVED: the layout is fixed, so the file size is computable exactly]
TEST(DemoSerialize, FileSizeMatchesLayout) {
  const vf::DemoDataset ds = collected_dataset(vf::DemoDomain::Sim, 4, 101);
  const std::string path = temp_path("demos_size.vfd");
  vf::serialize(ds, path);
  EXPECT_EQ(std::filesystem::file_size(path), vf::serialized_size(ds));
  std::remove(path.c_str());
}

// [TRIVIAL] A flipped byte anywhere in the body must be caught by the CRC.
TEST(DemoSerialize, CorruptedFileIsRejected) {
  const vf::DemoDataset ds = collected_dataset(vf::DemoDomain::Sim, 2, 111);
  const std::string path = temp_path("demos_corrupt.vfd");
  vf::serialize(ds, path);
  std::vector<char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  bytes[bytes.size() / 2] ^= 0x5A;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(vf::deserialize(path), std::runtime_error);
  std::remove(path.c_str());
}

// [DERIVED: filtering/relabeling then persisting equals the in-memory result]
TEST(DemoSerialize, PipelineCommutesWithPersistence) {
  const auto raws = collect_some(vf::DemoDomain::Real, 5, 121);
  const vf::DemoDataset direct =
      vf::build_demo_dataset(raws, "cube", vf::DemoDomain::Real, "gen-b", 7);
  const std::string path = temp_path("demos_commute.vfd");
  vf::serialize(direct, path);
  expect_datasets_equal(direct, vf::deserialize(path));
  // And the statistics computed before and after persisting agree bit-exactly.
  if (!direct.trajectories.empty()) {
    const vf::NormalizationStats s1 = vf::compute_stats(direct);
    const vf::NormalizationStats s2 = vf::compute_stats(vf::deserialize(path));
    for (int i = 0; i < vf::kObsDim; ++i) {
      EXPECT_EQ(s1.obs_mean[i], s2.obs_mean[i]);
      EXPECT_EQ(s1.obs_std[i], s2.obs_std[i]);
    }
  }
  std::remove(path.c_str());
}

}  // namespace
