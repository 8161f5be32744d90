// Copyright 2026 The vfhand Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON run configuration and run manifests for the command-line tools.
//
// Every artifact-producing command resolves its configuration once
// (defaults <- config file <- command-line flags), hashes the resolved JSON,
// and writes a manifest next to its outputs, so any artifact can be traced
// back to the exact settings, seed, and code version that produced it.
//
// Parsing is strict about key names (a typo'd knob is an error, never a
// silent fallback to the default) but lenient about omissions: any key left
// out keeps its default, so config files only need to state what they change.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vf/common.hpp"
#include "vf/diffusion.hpp"
#include "vf/eval.hpp"
#include "vf/rl.hpp"
#include "vf/shape.hpp"
#include "vf/task.hpp"

namespace vf {

using Json = nlohmann::json;

inline constexpr const char* kCodeVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Name resolution: shapes, domains, presets.

inline const std::vector<Shape2>& shape_catalog() {
  static const std::vector<Shape2> catalog = builtin_catalog();
  return catalog;
}

inline std::string catalog_names() {
  std::string out;
  for (const Shape2& s : shape_catalog()) {
    if (!out.empty()) out += ", ";
    out += s.name;
  }
  return out;
}

inline const Shape2& shape_by_name(const std::string& name) {
  for (const Shape2& s : shape_catalog())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown shape '" + name + "' (available: " + catalog_names() +
                              ")");
}

inline const char* to_string(DomainKind k) {
  switch (k) {
    case DomainKind::NominalSim: return "nominal_sim";
    case DomainKind::RandomizedSim: return "randomized_sim";
    case DomainKind::SurrogateReal: return "surrogate_real";
  }
  return "?";
}

inline DomainParams domain_by_name(const std::string& name) {
  if (name == "nominal_sim") return DomainParams::nominal();
  if (name == "sim" || name == "randomized_sim") return DomainParams::randomized();
  if (name == "real" || name == "surrogate_real") return DomainParams::surrogate_real();
  throw std::invalid_argument(
      "unknown domain '" + name +
      "' (available: nominal_sim, sim|randomized_sim, real|surrogate_real)");
}

inline TrainPreset preset_by_name(const std::string& name) {
  if (name == "cotrain") return TrainPreset::CoTrain;
  if (name == "simonly") return TrainPreset::SimOnly;
  if (name == "realonly") return TrainPreset::RealOnly;
  if (name == "finetune") return TrainPreset::FineTune;
  throw std::invalid_argument("unknown preset '" + name +
                              "' (available: cotrain, simonly, realonly, finetune)");
}

// ---------------------------------------------------------------------------
// Strict-key JSON helpers.

namespace detail {

inline void require_object(const Json& j, const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument("config section '" + where + "' must be a JSON object");
}

inline void require_known_keys(const Json& j, std::initializer_list<const char*> allowed,
                               const std::string& where) {
  require_object(j, where);
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known)
      throw std::invalid_argument("unknown key '" + item.key() + "' in config section '" +
                                  where + "'");
  }
}

template <typename T>
void merge_field(const Json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Struct <-> JSON. Each *_from_json merges the file's keys over the supplied
// base (default-constructed unless the caller already applied other layers).

inline Json to_json(const RewardParams& p) {
  return Json{{"c1", p.c1},
              {"c2", p.c2},
              {"c3", p.c3},
              {"d_bar", p.d_bar},
              {"theta_bar", p.theta_bar}};
}

inline RewardParams reward_params_from_json(const Json& j, RewardParams base = {},
                                            const std::string& where = "reward") {
  detail::require_known_keys(j, {"c1", "c2", "c3", "d_bar", "theta_bar"}, where);
  detail::merge_field(j, "c1", base.c1);
  detail::merge_field(j, "c2", base.c2);
  detail::merge_field(j, "c3", base.c3);
  detail::merge_field(j, "d_bar", base.d_bar);
  detail::merge_field(j, "theta_bar", base.theta_bar);
  return base;
}

inline Json to_json(const Td3Config& c) {
  return Json{{"gamma", c.gamma},
              {"tau", c.tau},
              {"policy_delay", c.policy_delay},
              {"explore_sigma", c.explore_sigma},
              {"target_sigma", c.target_sigma},
              {"target_clip", c.target_clip},
              {"epsilon_greedy", c.epsilon_greedy},
              {"batch", c.batch},
              {"capacity", c.capacity},
              {"her_k", c.her_k},
              {"hidden_width", c.hidden_width},
              {"hidden_depth", c.hidden_depth},
              {"actor_lr", c.actor_lr},
              {"critic_lr", c.critic_lr},
              {"warmup_steps", c.warmup_steps},
              {"updates_per_step", c.updates_per_step},
              {"eval_interval", c.eval_interval},
              {"eval_episodes", c.eval_episodes},
              {"eval_d_bar", c.eval_d_bar},
              {"eval_theta_bar", c.eval_theta_bar}};
}

inline Td3Config td3_config_from_json(const Json& j, Td3Config base = {}) {
  detail::require_known_keys(
      j,
      {"gamma", "tau", "policy_delay", "explore_sigma", "target_sigma", "target_clip",
       "epsilon_greedy", "batch", "capacity", "her_k", "hidden_width", "hidden_depth",
       "actor_lr", "critic_lr", "warmup_steps", "updates_per_step", "eval_interval",
       "eval_episodes", "eval_d_bar", "eval_theta_bar"},
      "rl");
  detail::merge_field(j, "gamma", base.gamma);
  detail::merge_field(j, "tau", base.tau);
  detail::merge_field(j, "policy_delay", base.policy_delay);
  detail::merge_field(j, "explore_sigma", base.explore_sigma);
  detail::merge_field(j, "target_sigma", base.target_sigma);
  detail::merge_field(j, "target_clip", base.target_clip);
  detail::merge_field(j, "epsilon_greedy", base.epsilon_greedy);
  detail::merge_field(j, "batch", base.batch);
  detail::merge_field(j, "capacity", base.capacity);
  detail::merge_field(j, "her_k", base.her_k);
  detail::merge_field(j, "hidden_width", base.hidden_width);
  detail::merge_field(j, "hidden_depth", base.hidden_depth);
  detail::merge_field(j, "actor_lr", base.actor_lr);
  detail::merge_field(j, "critic_lr", base.critic_lr);
  detail::merge_field(j, "warmup_steps", base.warmup_steps);
  detail::merge_field(j, "updates_per_step", base.updates_per_step);
  detail::merge_field(j, "eval_interval", base.eval_interval);
  detail::merge_field(j, "eval_episodes", base.eval_episodes);
  detail::merge_field(j, "eval_d_bar", base.eval_d_bar);
  detail::merge_field(j, "eval_theta_bar", base.eval_theta_bar);
  return base;
}

// The noise schedule is exposed as a single step-count knob; the beta range
// is pinned inside NoiseSchedule::linear.
inline Json to_json(const CoTrainConfig& c) {
  return Json{{"batch_size", c.batch_size},
              {"p_sim", c.p_sim},
              {"epochs", c.epochs},
              {"lr", c.lr},
              {"hidden_width", c.hidden_width},
              {"hidden_depth", c.hidden_depth},
              {"horizon", c.horizon},
              {"diffusion_steps", c.schedule.steps}};
}

inline CoTrainConfig cotrain_config_from_json(const Json& j, CoTrainConfig base = {}) {
  detail::require_known_keys(j,
                             {"batch_size", "p_sim", "epochs", "lr", "hidden_width",
                              "hidden_depth", "horizon", "diffusion_steps"},
                             "diffusion");
  detail::merge_field(j, "batch_size", base.batch_size);
  detail::merge_field(j, "p_sim", base.p_sim);
  detail::merge_field(j, "epochs", base.epochs);
  detail::merge_field(j, "lr", base.lr);
  detail::merge_field(j, "hidden_width", base.hidden_width);
  detail::merge_field(j, "hidden_depth", base.hidden_depth);
  detail::merge_field(j, "horizon", base.horizon);
  if (j.contains("diffusion_steps"))
    base.schedule = NoiseSchedule::linear(j.at("diffusion_steps").get<int>());
  return base;
}

inline Json to_json(const EvalProtocol& p) {
  return Json{{"trials_per_seed", p.trials_per_seed},
              {"seeds", p.seeds},
              {"max_steps", p.max_steps},
              {"use_shape_symmetry", p.use_shape_symmetry},
              {"thresholds", to_json(p.thresholds)}};
}

inline EvalProtocol eval_protocol_from_json(const Json& j, EvalProtocol base = {}) {
  detail::require_known_keys(
      j, {"trials_per_seed", "seeds", "max_steps", "use_shape_symmetry", "thresholds"},
      "eval");
  detail::merge_field(j, "trials_per_seed", base.trials_per_seed);
  detail::merge_field(j, "seeds", base.seeds);
  detail::merge_field(j, "max_steps", base.max_steps);
  detail::merge_field(j, "use_shape_symmetry", base.use_shape_symmetry);
  if (j.contains("thresholds"))
    base.thresholds =
        reward_params_from_json(j.at("thresholds"), base.thresholds, "eval.thresholds");
  return base;
}

// ---------------------------------------------------------------------------
// Top-level run configuration shared by all CLI verbs. Each verb reads the
// subset it needs; unrelated sections are simply carried along (and hashed),
// which keeps one config file usable across a whole experiment pipeline.

struct RunConfig {
  std::string shape = "cube";
  std::string domain = "surrogate_real";  // collect / eval domain name
  std::string preset = "cotrain";
  long rl_budget_steps = 500000;
  bool use_her = true;
  int demos = 2000;                            // trajectories to collect
  std::vector<int> real_amounts = {0, 100, 200};  // ablation sweep
  Td3Config rl;
  CoTrainConfig diffusion;
  EvalProtocol eval;
};

inline Json to_json(const RunConfig& c) {
  return Json{{"shape", c.shape},
              {"domain", c.domain},
              {"preset", c.preset},
              {"rl_budget_steps", c.rl_budget_steps},
              {"use_her", c.use_her},
              {"demos", c.demos},
              {"real_amounts", c.real_amounts},
              {"rl", to_json(c.rl)},
              {"diffusion", to_json(c.diffusion)},
              {"eval", to_json(c.eval)}};
}

inline RunConfig run_config_from_json(const Json& j, RunConfig base = {}) {
  detail::require_known_keys(j,
                             {"shape", "domain", "preset", "rl_budget_steps", "use_her",
                              "demos", "real_amounts", "rl", "diffusion", "eval"},
                             "<top level>");
  detail::merge_field(j, "shape", base.shape);
  detail::merge_field(j, "domain", base.domain);
  detail::merge_field(j, "preset", base.preset);
  detail::merge_field(j, "rl_budget_steps", base.rl_budget_steps);
  detail::merge_field(j, "use_her", base.use_her);
  detail::merge_field(j, "demos", base.demos);
  detail::merge_field(j, "real_amounts", base.real_amounts);
  if (j.contains("rl")) base.rl = td3_config_from_json(j.at("rl"), base.rl);
  if (j.contains("diffusion"))
    base.diffusion = cotrain_config_from_json(j.at("diffusion"), base.diffusion);
  if (j.contains("eval")) base.eval = eval_protocol_from_json(j.at("eval"), base.eval);
  return base;
}

// ---------------------------------------------------------------------------
// Files, hashing, timestamps.

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
}

// nlohmann::json objects keep keys sorted, so dump() of a resolved config is
// canonical and its hash is stable across key orderings in the source file.
inline uint64_t config_hash(const Json& j) { return fnv1a64(j.dump()); }

inline std::string to_hex(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string iso8601_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Full numeric dump of the resolved domain knobs, so a manifest pins the
// physics an artifact was produced under even if defaults change later.
inline Json domain_params_json(const DomainParams& d) {
  return Json{{"kind", to_string(d.kind)},
              {"palm_width_frac", d.palm_width_frac},
              {"finger_length_frac", d.finger_length_frac},
              {"clearance_range", d.clearance_range},
              {"slide_drift_gain", d.slide_drift_gain},
              {"pose_noise_sigma", d.pose_noise_sigma},
              {"angle_noise_sigma", d.angle_noise_sigma},
              {"latency_lo", d.latency_lo},
              {"latency_hi", d.latency_hi}};
}

// ---------------------------------------------------------------------------
// Run manifest: one JSON file per artifact-producing command.

struct RunManifest {
  std::string verb;
  Json config;  // fully resolved RunConfig
  uint64_t seed = 0;
  Json domain_params;  // resolved physics knobs, when the verb touches an Env
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;
  Json results;  // verb-specific summary (success rate, final loss, ...)
};

inline Json to_json(const RunManifest& m) {
  Json j{{"verb", m.verb},
         {"code_version", kCodeVersion},
         {"config", m.config},
         {"config_hash", to_hex(config_hash(m.config))},
         {"seed", m.seed},
         {"inputs", m.inputs},
         {"outputs", m.outputs},
         {"started_at", m.started_at},
         {"finished_at", m.finished_at}};
  if (!m.domain_params.is_null()) j["domain_params"] = m.domain_params;
  if (!m.results.is_null()) j["results"] = m.results;
  return j;
}

inline void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << to_json(m).dump(2) << '\n';
  if (!out) throw std::runtime_error("manifest write failed: " + path);
}

// Conventional manifest location for an artifact at `out_path`.
inline std::string manifest_path_for(const std::string& out_path) {
  return out_path + ".manifest.json";
}

// ---------------------------------------------------------------------------
// Metrics -> JSON (used by the eval verb and the experiment tables).

inline Json to_json(const Metrics& m) {
  Json records = Json::array();
  for (const EpisodeRecord& r : m.records)
    records.push_back(Json{{"seed_index", r.seed_index},
                           {"trial", r.trial},
                           {"success", r.success},
                           {"steps", r.steps},
                           {"pos_error_m", r.pos_error},
                           {"rot_error_rad", r.rot_error},
                           {"final_status", to_string(r.final_status)}});
  return Json{{"success_rate_mean", m.success_rate_mean},
              {"success_rate_std", m.success_rate_std},
              {"pos_error_mm_mean", m.pos_error_mm_mean},
              {"pos_error_mm_std", m.pos_error_mm_std},
              {"rot_error_deg_mean", m.rot_error_deg_mean},
              {"rot_error_deg_std", m.rot_error_deg_std},
              {"n_episodes", m.n_episodes},
              {"n_successes", m.n_successes},
              {"records", std::move(records)}};
}

}  // namespace vf
