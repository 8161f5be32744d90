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

#include "vf/eval.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace {

// ---------------------------------------------------------------------------
// Aggregation.

std::vector<vf::EpisodeRecord> seeded_records(const std::vector<int>& successes_per_seed,
                                              int trials) {
  std::vector<vf::EpisodeRecord> records;
  for (size_t s = 0; s < successes_per_seed.size(); ++s)
    for (int t = 0; t < trials; ++t) {
      vf::EpisodeRecord r;
      r.seed_index = static_cast<int>(s);
      r.trial = t;
      r.success = t < successes_per_seed[s];
      records.push_back(r);
    }
  return records;
}

// [DERIVED: per-seed rates {80, 70, 60} → mean 70, sample std 10]
TEST(Aggregation, HandComputedSeedStatistics) {
  const vf::Metrics m = vf::aggregate_metrics(seeded_records({8, 7, 6}, 10), 3);
  EXPECT_DOUBLE_EQ(m.success_rate_mean, 70.0);
  EXPECT_DOUBLE_EQ(m.success_rate_std, 10.0);
  EXPECT_EQ(m.n_episodes, 30);
  EXPECT_EQ(m.n_successes, 21);
}

// [DERIVED: hand-computed error statistics; failures are excluded entirely]
TEST(Aggregation, ErrorStatsOverSuccessfulEpisodesOnly) {
  std::vector<vf::EpisodeRecord> records;
  vf::EpisodeRecord ok1;
  ok1.success = true;
  ok1.pos_error = 0.001;  // 1 mm
  ok1.rot_error = vf::rad(2.0);
  vf::EpisodeRecord ok2 = ok1;
  ok2.pos_error = 0.003;  // 3 mm
  ok2.rot_error = vf::rad(4.0);
  vf::EpisodeRecord bad;
  bad.success = false;
  bad.pos_error = 0.5;  // would wreck the mean if it leaked in
  bad.rot_error = 3.0;
  records = {ok1, ok2, bad};

  const vf::Metrics m = vf::aggregate_metrics(records, 1);
  EXPECT_NEAR(m.pos_error_mm_mean, 2.0, 1e-12);
  EXPECT_NEAR(m.pos_error_mm_std, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m.rot_error_deg_mean, 3.0, 1e-12);
  EXPECT_NEAR(m.rot_error_deg_std, std::sqrt(2.0), 1e-12);

  // A single success has zero spread; none leaves the fields NaN.
  const vf::Metrics one = vf::aggregate_metrics({ok1}, 1);
  EXPECT_DOUBLE_EQ(one.pos_error_mm_mean, 1.0);
  EXPECT_DOUBLE_EQ(one.pos_error_mm_std, 0.0);
  const vf::Metrics none = vf::aggregate_metrics({bad}, 1);
  EXPECT_TRUE(std::isnan(none.pos_error_mm_mean));
  EXPECT_TRUE(std::isnan(none.rot_error_deg_std));
  EXPECT_EQ(none.n_successes, 0);
}

// [TRIVIAL: metrics are a pure function of the records]
TEST(Aggregation, ReaggregationReproducesItself) {
  const vf::Metrics m = vf::aggregate_metrics(seeded_records({5, 9, 2}, 10), 3);
  const vf::Metrics again = vf::aggregate_metrics(m.records, 3);
  EXPECT_EQ(again.success_rate_mean, m.success_rate_mean);
  EXPECT_EQ(again.success_rate_std, m.success_rate_std);
  EXPECT_EQ(again.n_successes, m.n_successes);
}

// [TRIVIAL]
TEST(Aggregation, RejectsOutOfRangeRecords) {
  auto records = seeded_records({1}, 2);
  records[0].seed_index = 5;
  EXPECT_THROW(vf::aggregate_metrics(records, 1), std::invalid_argument);
  EXPECT_THROW(vf::aggregate_metrics({}, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Episode execution.

vf::EvalProtocol tiny_protocol(int seeds = 2, int trials = 3) {
  vf::EvalProtocol p;
  p.seeds = seeds;
  p.trials_per_seed = trials;
  p.max_steps = 3;
  return p;
}

const vf::EpisodePolicy kIdle = [](vf::Env&, const vf::Observation&, vf::Rng&) {
  return vf::HybridAction{4, 0.0};  // zero-sweep pivot: an exact no-op
};

const vf::EpisodePolicy kTeleport = [](vf::Env& env, const vf::Observation&, vf::Rng&) {
  env.set_object_pose(env.goal().pose);
  return vf::HybridAction{4, 0.0};
};

const vf::EpisodePolicy kRandom = [](vf::Env&, const vf::Observation&, vf::Rng& rng) {
  std::uniform_int_distribution<int> mode(0, vf::kNumModes - 1);
  std::uniform_real_distribution<double> delta(0.0, vf::kActionDeltaMax);
  return vf::HybridAction{mode(rng), delta(rng)};
};

// [TRIVIAL: a stub that plants the object on the goal scores 100% with
// exactly zero error]
TEST(RunEval, TeleportStubScoresPerfect) {
  const vf::Metrics m = vf::run_eval(vf::make_square(0.06), vf::DomainParams::nominal(),
                                     tiny_protocol(), kTeleport, 17);
  EXPECT_DOUBLE_EQ(m.success_rate_mean, 100.0);
  EXPECT_DOUBLE_EQ(m.success_rate_std, 0.0);
  EXPECT_EQ(m.n_successes, m.n_episodes);
  EXPECT_EQ(m.n_episodes, 6);
  EXPECT_EQ(m.pos_error_mm_mean, 0.0);
  EXPECT_EQ(m.rot_error_deg_mean, 0.0);
  for (const vf::EpisodeRecord& r : m.records) EXPECT_EQ(r.steps, 1);
}

// [TRIVIAL: a policy that never moves cannot reach a random goal; with no
// successful episodes the error fields stay NaN]
TEST(RunEval, IdlePolicyScoresZero) {
  const vf::Metrics m = vf::run_eval(vf::make_square(0.06), vf::DomainParams::nominal(),
                                     tiny_protocol(), kIdle, 17);
  EXPECT_DOUBLE_EQ(m.success_rate_mean, 0.0);
  EXPECT_EQ(m.n_successes, 0);
  EXPECT_TRUE(std::isnan(m.pos_error_mm_mean));
  for (const vf::EpisodeRecord& r : m.records) {
    EXPECT_EQ(r.final_pose.x, r.start_pose.x);  // bit-identical: nothing moved
    EXPECT_EQ(r.final_pose.theta, r.start_pose.theta);
    EXPECT_EQ(r.steps, tiny_protocol().max_steps);
  }
}

// [TRIVIAL protocol guarantee: policies under the same base seed face
// identical (start, goal) sequences, episode length differences included]
TEST(RunEval, PairedStartsAndGoalsAcrossPolicies) {
  const vf::Shape2 shape = vf::make_square(0.06);
  const vf::DomainParams domain = vf::DomainParams::surrogate_real();
  const vf::Metrics a = vf::run_eval(shape, domain, tiny_protocol(), kIdle, 99);
  const vf::Metrics b = vf::run_eval(shape, domain, tiny_protocol(), kRandom, 99);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].start_pose.x, b.records[i].start_pose.x);
    EXPECT_EQ(a.records[i].start_pose.y, b.records[i].start_pose.y);
    EXPECT_EQ(a.records[i].start_pose.theta, b.records[i].start_pose.theta);
    EXPECT_EQ(a.records[i].goal.x, b.records[i].goal.x);
    EXPECT_EQ(a.records[i].goal.y, b.records[i].goal.y);
    EXPECT_EQ(a.records[i].goal.theta, b.records[i].goal.theta);
  }
}

// ---------------------------------------------------------------------------
// Trajectory export.

// [TRIVIAL row count + determinism vs the evaluation protocol; DERIVED:
// parse-back checks every row has the full column set]
TEST(Export, RowsParseAndMatchEvaluation) {
  const vf::Shape2 shape = vf::make_square(0.06);
  const vf::DomainParams domain = vf::DomainParams::randomized();
  const vf::EvalProtocol proto = tiny_protocol(1, 1);
  const std::string path =
      (std::filesystem::temp_directory_path() / "traj_export.csv").string();

  const std::vector<vf::TrajRow> rows =
      vf::export_trajectory(shape, domain, proto, kRandom, 523, path);
  const vf::Metrics m = vf::run_eval(shape, domain, proto, kRandom, 523);
  ASSERT_EQ(m.records.size(), 1u);
  EXPECT_EQ(rows.size(), static_cast<size_t>(m.records[0].steps) + 1);
  EXPECT_EQ(rows.front().mode, -1);
  EXPECT_EQ(rows.back().pose.x, m.records[0].final_pose.x);
  EXPECT_EQ(rows.back().pose.y, m.records[0].final_pose.y);
  EXPECT_EQ(rows.back().pose.theta, m.records[0].final_pose.theta);

  std::ifstream in(path);
  ASSERT_TRUE(in.good());
  std::string line;
  size_t n_lines = 0;
  while (std::getline(in, line)) {
    ++n_lines;
    const size_t commas = static_cast<size_t>(std::count(line.begin(), line.end(), ','));
    EXPECT_EQ(commas, 11u) << "line " << n_lines << ": " << line;
  }
  EXPECT_EQ(n_lines, rows.size() + 1);  // header + data
  std::remove(path.c_str());
}

// ---------------------------------------------------------------------------
// Experiment drivers.

vf::DemoDataset synthetic_dataset(vf::DemoDomain domain, int n_traj, uint64_t seed) {
  vf::DemoDataset ds;
  ds.shape_name = "cube";
  ds.domain = domain;
  ds.generator_id = "test";
  vf::Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, vf::kActionDeltaMax);
  std::uniform_int_distribution<int> um(0, vf::kNumModes - 1);
  for (int i = 0; i < n_traj; ++i) {
    vf::DemoTrajectory t;
    t.domain = domain;
    t.shape_name = ds.shape_name;
    for (int j = 0; j < 3; ++j) {
      vf::Observation o;
      for (auto& v : o) v = u(rng);
      t.observations.push_back(o);
    }
    t.actions.push_back({um(rng), ud(rng)});
    t.actions.push_back({um(rng), ud(rng)});
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

vf::ExperimentSetup tiny_setup() {
  vf::ExperimentSetup s;
  s.shape = vf::make_square(0.06);
  s.protocol = tiny_protocol(1, 2);
  s.train.batch_size = 8;
  s.train.epochs = 1;
  s.train.hidden_width = 8;
  s.train.hidden_depth = 1;
  s.train.schedule = vf::NoiseSchedule::linear(5);
  return s;
}

// [DERIVED counting: |amounts| × 2 variants − skipped rows; the zero-real
// real-only arm records its skip reason; too-large amounts are refused]
TEST(Ablation, RowStructureAndSkips) {
  const vf::DemoDataset sim = synthetic_dataset(vf::DemoDomain::Sim, 6, 11);
  const vf::DemoDataset real = synthetic_dataset(vf::DemoDomain::Real, 4, 12);
  const auto rows = vf::ablate_real_amount(sim, real, {0, 2, 4}, tiny_setup());
  ASSERT_EQ(rows.size(), 6u);
  int skipped = 0;
  for (const vf::TrainedEval& row : rows) {
    if (row.skipped) {
      ++skipped;
      EXPECT_EQ(row.real_amount, 0);
      EXPECT_EQ(row.preset, vf::TrainPreset::RealOnly);
      EXPECT_FALSE(row.skip_reason.empty());
      EXPECT_TRUE(row.metrics.records.empty());
    } else {
      EXPECT_EQ(row.metrics.n_episodes, 2);
    }
  }
  EXPECT_EQ(skipped, 1);
  EXPECT_THROW(vf::ablate_real_amount(sim, real, {5}, tiny_setup()), std::invalid_argument);
}

// [TRIVIAL: four presets, one row each, all facing identical goal sequences]
TEST(Presets, PairedComparison) {
  const vf::DemoDataset sim = synthetic_dataset(vf::DemoDomain::Sim, 6, 21);
  const vf::DemoDataset real = synthetic_dataset(vf::DemoDomain::Real, 4, 22);
  const auto rows = vf::compare_presets(sim, real, tiny_setup());
  ASSERT_EQ(rows.size(), 4u);
  for (size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].metrics.records.size(), rows[0].metrics.records.size());
    for (size_t j = 0; j < rows[0].metrics.records.size(); ++j) {
      EXPECT_EQ(rows[i].metrics.records[j].goal.x, rows[0].metrics.records[j].goal.x);
      EXPECT_EQ(rows[i].metrics.records[j].goal.theta, rows[0].metrics.records[j].goal.theta);
      EXPECT_EQ(rows[i].metrics.records[j].start_pose.x,
                rows[0].metrics.records[j].start_pose.x);
    }
  }
}

}  // namespace
