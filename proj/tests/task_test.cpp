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

#include "vf/task.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_util.hpp"
#include "vf/geometry.hpp"
#include "vf/shape.hpp"

namespace {

using vf::DomainKind;
using vf::DomainParams;
using vf::Env;
using vf::Goal;
using vf::Observation;
using vf::ObsMode;
using vf::Pose2;
using vf::RewardParams;
using vf::SimState;
using vf::Status;

SimState bare_state(const Pose2& pose) {
  SimState s;
  s.shape = vf::make_square(0.040);
  s.object_pose = pose;
  return s;
}

TEST(AngleDifference, WrapsAndRespectsSymmetryFold) {
  EXPECT_DOUBLE_EQ(vf::angle_difference(0.1, -0.1), 0.2);
  EXPECT_NEAR(vf::angle_difference(vf::kPi - 0.05, -vf::kPi + 0.05), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(vf::angle_difference(1.0, 1.0), 0.0);
  // A 4-fold object looks identical every quarter turn.
  EXPECT_NEAR(vf::angle_difference(0.0, vf::kPi / 2.0, 4), 0.0, 1e-15);
  EXPECT_NEAR(vf::angle_difference(0.3, 0.3 + vf::kPi, 4), 0.0, 1e-15);
  EXPECT_NEAR(vf::angle_difference(0.0, 0.2, 4), 0.2, 1e-15);
}

TEST(PolarRadii, MatchesHandComputedDistances) {
  const vf::HandParams hp;
  const auto [r1, r2] = vf::polar_radii(hp.base(vf::Side::Left), hp);
  EXPECT_DOUBLE_EQ(r1, 0.0);
  EXPECT_DOUBLE_EQ(r2, hp.palm_width);
  const auto [m1, m2] = vf::polar_radii({0.0, 0.0}, hp);
  EXPECT_DOUBLE_EQ(m1, 0.05);
  EXPECT_DOUBLE_EQ(m2, 0.05);
  // Any point on the perpendicular bisector of the bases is equidistant.
  const auto [b1, b2] = vf::polar_radii({0.0, 0.0731}, hp);
  EXPECT_DOUBLE_EQ(b1, b2);
}

TEST(IsSuccess, ThresholdsAreInclusive) {
  const RewardParams rp;
  const Goal goal{{0.01, 0.06, 0.4}};
  EXPECT_TRUE(vf::is_success({0.01, 0.06, 0.4}, goal, rp));
  // Exactly 5 mm position error and exactly 0.1 rad angle error still count.
  EXPECT_TRUE(vf::is_success({0.01 + 0.005, 0.06, 0.4}, goal, rp));
  EXPECT_TRUE(vf::is_success({0.01, 0.06, 0.5}, goal, rp));
  EXPECT_FALSE(vf::is_success({0.01 + 0.006, 0.06, 0.4}, goal, rp));
  EXPECT_FALSE(vf::is_success({0.01, 0.06, 0.511}, goal, rp));
}

TEST(IsSuccess, InvariantUnderRigidRotationOfPoseAndGoal) {
  const RewardParams rp;
  vf::Rng rng(77);
  const vf::Vec2 center{0.0, 0.07};
  for (int i = 0; i < 200; ++i) {
    const Pose2 pose{vf_test::uniform(rng, -0.05, 0.05), vf_test::uniform(rng, 0.0, 0.14),
                     vf_test::uniform(rng, -vf::kPi, vf::kPi)};
    const Pose2 goal{pose.x + vf_test::uniform(rng, -0.01, 0.01),
                     pose.y + vf_test::uniform(rng, -0.01, 0.01),
                     pose.theta + vf_test::uniform(rng, -0.2, 0.2)};
    const bool before = vf::is_success(pose, {goal}, rp);
    const double phi = vf_test::uniform(rng, -vf::kPi, vf::kPi);
    auto rotate = [&](const Pose2& p) -> Pose2 {
      const vf::Vec2 r = vf::rotate(p.translation() - center, phi) + center;
      return {r.x, r.y, vf::wrap_angle(p.theta + phi)};
    };
    EXPECT_EQ(vf::is_success(rotate(pose), {rotate(goal)}, rp), before) << "case " << i;
  }
}

TEST(Reward, MatchesHandComputedComponents) {
  const RewardParams rp;  // c1=10, c2=20, c3=5
  // At the goal: full success bonus, zero dense penalty.
  {
    SimState s = bare_state({0.01, 0.06, 0.3});
    EXPECT_DOUBLE_EQ(vf::reward(s, Status::Ok, {{0.01, 0.06, 0.3}}, rp), 10.0);
  }
  // At the goal position but 0.2 rad off: no bonus, no dense penalty.
  {
    SimState s = bare_state({0.01, 0.06, 0.5});
    EXPECT_DOUBLE_EQ(vf::reward(s, Status::Ok, {{0.01, 0.06, 0.3}}, rp), 0.0);
  }
  // Base radii (0.06, 0.08) against goal radii (0.05, 0.05):
  // r = -20 * (|0.06-0.05| + |0.08-0.05|) / 2 = -0.4.
  {
    SimState s = bare_state({-0.014, 0.048, 1.0});
    const auto [r1, r2] = vf::polar_radii(s.object_pose.translation(), s.params);
    ASSERT_NEAR(r1, 0.06, 1e-15);
    ASSERT_NEAR(r2, 0.08, 1e-15);
    EXPECT_NEAR(vf::reward(s, Status::Ok, {{0.0, 0.0, 1.0}}, rp), -0.4, 1e-12);
    // Leaving the workspace adds the sparse penalty on top.
    EXPECT_NEAR(vf::reward(s, Status::OutOfRange, {{0.0, 0.0, 1.0}}, rp), -5.4, 1e-12);
  }
}

TEST(Observe, PinnedLayoutMatchesIndependentRecomputation) {
  SimState s = bare_state({0.011, 0.063, 0.5});
  s.q_left = 0.3;
  s.q_right = 0.7;
  SimState prev = bare_state({0.004, 0.055, 0.45});
  prev.q_left = 0.25;
  prev.q_right = 0.72;
  const Goal goal{{-0.02, 0.05, -0.3}};
  const Observation o = vf::observe(s, goal, 3, ObsMode::RL, DomainParams::nominal(),
                                    nullptr, &prev, 0.4);

  EXPECT_DOUBLE_EQ(o[0], 0.3);
  EXPECT_DOUBLE_EQ(o[1], 0.7);
  EXPECT_DOUBLE_EQ(o[2], (0.3 - 0.25) / 0.4);
  EXPECT_DOUBLE_EQ(o[3], (0.7 - 0.72) / 0.4);
  for (int m = 0; m < 6; ++m) EXPECT_DOUBLE_EQ(o[4 + m], m == 3 ? 1.0 : 0.0);
  EXPECT_DOUBLE_EQ(o[10], 0.011);
  EXPECT_DOUBLE_EQ(o[11], 0.063);
  EXPECT_DOUBLE_EQ(o[12], (0.011 - 0.004) / 0.4);
  EXPECT_DOUBLE_EQ(o[13], (0.063 - 0.055) / 0.4);
  EXPECT_DOUBLE_EQ(o[14], (0.5 - 0.45) / 0.4);
  EXPECT_DOUBLE_EQ(o[15], std::cos(0.5));
  EXPECT_DOUBLE_EQ(o[16], std::sin(0.5));
  EXPECT_DOUBLE_EQ(o[17], -0.02);
  EXPECT_DOUBLE_EQ(o[18], 0.05);
  EXPECT_DOUBLE_EQ(o[19], std::cos(-0.3));
  EXPECT_DOUBLE_EQ(o[20], std::sin(-0.3));
  EXPECT_DOUBLE_EQ(o[21], -0.02 - 0.011);
  EXPECT_DOUBLE_EQ(o[22], 0.05 - 0.063);
  EXPECT_DOUBLE_EQ(o[23], std::cos(-0.3 - 0.5));
  EXPECT_DOUBLE_EQ(o[24], std::sin(-0.3 - 0.5));
}

TEST(Observe, IlModeZeroesExactlyTheVelocitySlots) {
  SimState s = bare_state({0.01, 0.06, vf::kPi});
  s.q_left = 0.2;
  s.q_right = 0.4;
  SimState prev = bare_state({0.02, 0.05, 0.1});
  const Observation rl = vf::observe(s, {{0.0, 0.07, 0.0}}, 1, ObsMode::RL,
                                     DomainParams::nominal(), nullptr, &prev, 0.4);
  const Observation il = vf::observe(s, {{0.0, 0.07, 0.0}}, 1, ObsMode::IL,
                                     DomainParams::nominal(), nullptr, &prev, 0.4);
  const std::set<int> zeroed = {2, 3, 12, 13, 14};
  for (int i = 0; i < vf::kObsDim; ++i) {
    if (zeroed.count(i)) {
      EXPECT_EQ(il[i], 0.0) << "slot " << i;
      EXPECT_NE(rl[i], 0.0) << "slot " << i;  // prev chosen so all diffs are nonzero
    } else {
      EXPECT_EQ(il[i], rl[i]) << "slot " << i;
    }
  }
  // Orientation encoding at the wrap point.
  EXPECT_DOUBLE_EQ(il[15], -1.0);
  EXPECT_NEAR(il[16], 0.0, 1e-15);
}

TEST(Observe, NoLastModeLeavesOneHotEmpty) {
  const SimState s = bare_state({0.0, 0.06, 0.0});
  const Observation o = vf::observe(s, {{0.0, 0.06, 0.0}}, -1, ObsMode::IL,
                                    DomainParams::nominal());
  for (int m = 0; m < 6; ++m) EXPECT_EQ(o[4 + m], 0.0);
  // Pose equals goal: the delta block encodes the identity transform.
  EXPECT_DOUBLE_EQ(o[21], 0.0);
  EXPECT_DOUBLE_EQ(o[22], 0.0);
  EXPECT_DOUBLE_EQ(o[23], 1.0);
  EXPECT_DOUBLE_EQ(o[24], 0.0);
}

TEST(Observe, GoalSlotRewriteMatchesReencoding) {
  vf::Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    SimState s = bare_state({vf_test::uniform(rng, -0.05, 0.05),
                             vf_test::uniform(rng, 0.02, 0.12),
                             vf_test::uniform(rng, -vf::kPi, vf::kPi)});
    s.q_left = vf_test::uniform(rng, -0.5, 2.0);
    s.q_right = vf_test::uniform(rng, -0.5, 2.0);
    const Goal g0{{0.0, 0.07, 0.0}};
    const Goal g1{{vf_test::uniform(rng, -0.05, 0.05), vf_test::uniform(rng, 0.02, 0.12),
                   vf_test::uniform(rng, -vf::kPi, vf::kPi)}};
    Observation o = vf::observe(s, g0, 2, ObsMode::IL, DomainParams::nominal());
    const Observation direct = vf::observe(s, g1, 2, ObsMode::IL, DomainParams::nominal());
    vf::rewrite_goal_slots(o, g1);
    for (int j = 0; j < vf::kObsDim; ++j)
      EXPECT_NEAR(o[j], direct[j], 1e-15) << "slot " << j;
  }
}

TEST(Observe, SurrogatePositionNoiseAveragesOneMillimeter) {
  const SimState s = bare_state({0.0, 0.07, 0.0});
  const Goal g{{0.0, 0.07, 0.0}};
  const DomainParams dom = DomainParams::surrogate_real();
  vf::Rng rng(123);
  double sum_norm = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Observation o = vf::observe(s, g, -1, ObsMode::IL, dom, &rng);
    sum_norm += std::hypot(o[10] - 0.0, o[11] - 0.07);
  }
  const double mean_mm = sum_norm / n * 1000.0;
  EXPECT_GT(mean_mm, 0.85);
  EXPECT_LT(mean_mm, 1.15);
}

TEST(Reset, DeterministicAndDomainsShareGeometryAtSameSeed) {
  const vf::Shape2 cube = vf::make_square(0.040);
  vf::Rng a(42), b(42), c(42);
  const auto ra = vf::reset(a, cube, DomainParams::nominal());
  const auto rb = vf::reset(b, cube, DomainParams::nominal());
  EXPECT_EQ(ra.state.object_pose.x, rb.state.object_pose.x);
  EXPECT_EQ(ra.state.object_pose.theta, rb.state.object_pose.theta);
  EXPECT_EQ(ra.state.q_left, rb.state.q_left);
  EXPECT_EQ(ra.goal.pose.x, rb.goal.pose.x);
  EXPECT_EQ(ra.latency, 1.0);

  // The surrogate domain reproduces the nominal start and goal bit-for-bit
  // and only then draws its actuation gain.
  const auto rc = vf::reset(c, cube, DomainParams::surrogate_real());
  EXPECT_EQ(rc.state.object_pose.x, ra.state.object_pose.x);
  EXPECT_EQ(rc.state.object_pose.y, ra.state.object_pose.y);
  EXPECT_EQ(rc.state.object_pose.theta, ra.state.object_pose.theta);
  EXPECT_EQ(rc.goal.pose.x, ra.goal.pose.x);
  EXPECT_EQ(rc.goal.pose.theta, ra.goal.pose.theta);
  EXPECT_NE(rc.latency, 1.0);
  EXPECT_GE(rc.latency, 0.95);
  EXPECT_LE(rc.latency, 1.05);
}

TEST(Reset, SampledStatesAreHeldAndLegal) {
  const auto catalog = vf::builtin_catalog();
  vf::Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const vf::Shape2& shape = catalog[i % catalog.size()];
    const auto rs = vf::reset(rng, shape, DomainParams::nominal());
    ASSERT_TRUE(vf::workspace_legal(rs.state.params, rs.state.object_pose.translation()));
    ASSERT_TRUE(vf::workspace_legal(rs.state.params, rs.goal.pose.translation()));
    for (const vf::Side side : {vf::Side::Left, vf::Side::Right}) {
      const double cl = vf::signed_clearance(
          vf::finger_segment(rs.state.params, side, rs.state.q(side)), shape,
          rs.state.object_pose);
      EXPECT_NEAR(cl, 0.0, 1e-6) << shape.name << " case " << i;
    }
  }
}

TEST(Reset, RandomizedDomainJittersHandWithinRanges) {
  const vf::Shape2 cube = vf::make_square(0.040);
  const vf::HandParams base;
  vf::Rng rng(11);
  bool any_palm_off = false;
  for (int i = 0; i < 50; ++i) {
    const auto rs = vf::reset(rng, cube, DomainParams::randomized());
    EXPECT_LE(std::abs(rs.state.params.palm_width / base.palm_width - 1.0), 0.02);
    EXPECT_LE(std::abs(rs.state.params.finger_length / base.finger_length - 1.0), 0.02);
    EXPECT_LE(std::abs(rs.state.params.contact_clearance), 0.0005);
    if (rs.state.params.palm_width != base.palm_width) any_palm_off = true;
  }
  EXPECT_TRUE(any_palm_off);
}

TEST(Reset, ImpossibleShapeFailsAfterBoundedAttempts) {
  const vf::Shape2 giant = vf::make_square(0.5, "giant");
  vf::Rng rng(3);
  EXPECT_THROW(vf::reset(rng, giant, DomainParams::nominal()), std::runtime_error);
}

// ---------------------------------------------------------------------------
// Environment mechanics.

TEST(Env, TimeoutEndsEpisodeAfterTenSteps) {
  Env env(vf::make_square(0.040));
  vf::Rng rng(2);
  env.reset(rng);
  // A zero sweep never moves the object, so success cannot occur (start and
  // goal are distinct for this seed).
  ASSERT_FALSE(vf::is_success(env.state().object_pose, env.goal(), env.reward_params()));
  for (int k = 1; k <= 10; ++k) {
    ASSERT_TRUE(env.episode_active());
    const auto r = env.step({0, 0.0}, rng);
    EXPECT_EQ(r.done, k == 10) << "step " << k;
    EXPECT_FALSE(r.info.success);
    EXPECT_EQ(r.info.steps, k);
    EXPECT_EQ(r.info.status, Status::Ok);
  }
  EXPECT_FALSE(env.episode_active());
  EXPECT_THROW(env.step({0, 0.0}, rng), std::logic_error);
}

TEST(Env, ReachingTheGoalEndsTheEpisodeWithBonus) {
  Env env(vf::make_square(0.040));
  vf::Rng rng(4);
  env.reset(rng);
  env.set_goal({env.state().object_pose});
  const auto r = env.step({0, 0.0}, rng);
  EXPECT_TRUE(r.info.success);
  EXPECT_TRUE(r.done);
  EXPECT_DOUBLE_EQ(r.reward, env.reward_params().c1);
  EXPECT_FALSE(env.episode_active());
}

TEST(Env, RejectsInvalidActions) {
  Env env(vf::make_square(0.040));
  vf::Rng rng(6);
  env.reset(rng);
  EXPECT_THROW(env.step({0, -0.01}, rng), std::invalid_argument);
  EXPECT_THROW(env.step({6, 0.1}, rng), std::invalid_argument);
  EXPECT_THROW(env.step({0, vf::kActionDeltaMax * 1.01}, rng), std::invalid_argument);
  EXPECT_TRUE(env.episode_active());  // rejected commands do not advance time
}

TEST(Env, RewardDoneAndVelocitiesMatchOracleAcrossRandomEpisodes) {
  const auto catalog = vf::builtin_catalog();
  vf::Rng action_rng(99);
  int steps_checked = 0;
  for (int ep = 0; ep < 30; ++ep) {
    Env env(catalog[ep % catalog.size()]);
    vf::Rng rng(800 + ep);
    env.reset(rng);
    while (env.episode_active()) {
      const SimState before = env.state();
      const vf::HybridAction a{static_cast<int>(action_rng() % 6),
                               vf_test::uniform(action_rng, 0.0, vf::kActionDeltaMax)};
      const auto r = env.step(a, rng);
      // Reward recomputed with the free-function oracle on the ground truth.
      EXPECT_DOUBLE_EQ(
          r.reward, vf::reward(env.state(), r.info.status, env.goal(), env.reward_params()));
      EXPECT_EQ(r.done, r.info.success || r.info.status != Status::Ok ||
                            r.info.steps == env.episode_config().max_steps);
      // Velocity slots are finite differences of the true poses.
      const double t = env.episode_config().control_period;
      EXPECT_DOUBLE_EQ(r.observation[12], (env.state().object_pose.x - before.object_pose.x) / t);
      EXPECT_DOUBLE_EQ(r.observation[13], (env.state().object_pose.y - before.object_pose.y) / t);
      EXPECT_DOUBLE_EQ(r.observation[2], (env.state().q_left - before.q_left) / t);
      for (double v : r.observation) EXPECT_TRUE(std::isfinite(v));
      EXPECT_EQ(r.observation[4 + a.mode], 1.0);
      EXPECT_EQ(r.info.pose.x, env.state().object_pose.x);
      ++steps_checked;
    }
  }
  EXPECT_GT(steps_checked, 60);
}

TEST(Env, NominalEpisodesAreBitReproducible) {
  const vf::Shape2 hexagon = vf::make_regular_polygon(6, 0.022, "hexagon");
  std::array<Observation, 2> first_obs;
  std::array<double, 2> sum_rewards{};
  for (int run = 0; run < 2; ++run) {
    Env env(hexagon);
    vf::Rng rng(321);
    first_obs[run] = env.reset(rng);
    vf::Rng actions(55);
    while (env.episode_active()) {
      const auto r = env.step({static_cast<int>(actions() % 6),
                               vf_test::uniform(actions, 0.0, vf::rad(8.0))},
                              rng);
      sum_rewards[run] += r.reward;
    }
  }
  EXPECT_EQ(first_obs[0], first_obs[1]);
  EXPECT_EQ(sum_rewards[0], sum_rewards[1]);
}

TEST(Env, SurrogateLatencyScalesTheExecutedSweep) {
  Env env(vf::make_square(0.040), DomainParams::surrogate_real());
  vf::Rng rng(12);
  env.reset(rng);
  ASSERT_NE(env.latency(), 1.0);
  const auto r = env.step({0, vf::rad(5.0)}, rng);
  EXPECT_DOUBLE_EQ(r.info.executed_delta, vf::rad(5.0) * env.latency());
}

TEST(Env, SurrogateSlideDriftRotatesTheObject) {
  // Pin the gain to 1 and silence the observation noise so the drift is the
  // only difference from the nominal rollout.
  DomainParams dom = DomainParams::surrogate_real();
  dom.latency_lo = dom.latency_hi = 1.0;
  dom.pose_noise_sigma = 0.0;
  dom.angle_noise_sigma = 0.0;

  for (const int mode : {0, 2}) {
    Env nominal(vf::make_square(0.040));
    Env shifted(vf::make_square(0.040), dom);
    vf::Rng ra(2024), rb(2024);
    nominal.reset(ra);
    shifted.reset(rb);
    ASSERT_EQ(nominal.state().object_pose.x, shifted.state().object_pose.x);

    const double delta = vf::rad(6.0);
    const auto rn = nominal.step({mode, delta}, ra);
    const auto rs = shifted.step({mode, delta}, rb);
    if (rn.info.status != Status::Ok || rs.info.status != Status::Ok) continue;
    const double expected = (mode <= 1 ? 1.0 : -1.0) * 0.3 * delta;
    EXPECT_NEAR(vf::wrap_angle(rs.info.pose.theta - rn.info.pose.theta), expected, 1e-9)
        << "mode " << mode;
    // Fingers were re-solved through the drift: contact is maintained.
    for (const vf::Side side : {vf::Side::Left, vf::Side::Right}) {
      const double cl = vf::signed_clearance(
          vf::finger_segment(shifted.state().params, side, shifted.state().q(side)),
          shifted.state().shape, shifted.state().object_pose);
      EXPECT_NEAR(cl, 0.0, 1e-6);
    }
  }
}

TEST(Env, ShapeSymmetryFoldRelaxesOrientationSuccess) {
  const vf::Shape2 cube = vf::make_square(0.040);
  ASSERT_EQ(cube.rotational_symmetry, 4);
  Env strict(cube);
  Env folded(cube, DomainParams::nominal(), RewardParams{}, vf::EpisodeConfig{}, true);
  EXPECT_EQ(strict.symmetry_fold(), 1);
  EXPECT_EQ(folded.symmetry_fold(), 4);

  const RewardParams rp;
  const Pose2 pose{0.01, 0.06, 0.2};
  const Goal quarter_turn{{0.01, 0.06, 0.2 + vf::kPi / 2.0}};
  EXPECT_FALSE(vf::is_success(pose, quarter_turn, rp, 1));
  EXPECT_TRUE(vf::is_success(pose, quarter_turn, rp, 4));
}

}  // namespace
