// Copyright 2026 The vfhand Authors
// SPDX-License-Identifier: Apache-2.0
//
// vf — command-line front end for the variable-friction manipulation stack.
//
// Verbs:
//   train-rl        train the exploration policy, save an actor checkpoint
//   collect         roll out an actor, hindsight-relabel, save a demo dataset
//   train-dp        train the diffusion policy, save a policy checkpoint
//   eval            evaluate a checkpoint under the paired protocol
//   ablate-real     real-demo-amount ablation table
//   compare-presets train and evaluate all four data presets
//   export-traj     run one episode and dump a step-by-step CSV
//   print-config    print the resolved configuration JSON
//
// Configuration resolves defaults <- --config file <- explicit flags; every
// artifact-producing verb writes `<out>.manifest.json` recording the resolved
// config, its hash, the seed, inputs/outputs, and timestamps.
//
// Exit code 0 on success. On failure, a single-line machine-readable record
// goes to stderr — {"error":{"verb":...,"kind":...,"message":...}} — and the
// exit code is nonzero.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vf/config.hpp"
#include "vf/demos.hpp"
#include "vf/diffusion.hpp"
#include "vf/eval.hpp"
#include "vf/rl.hpp"

namespace {

std::string error_json(const std::string& verb, const std::string& kind,
                       const std::string& message) {
  return vf::Json{{"error", {{"verb", verb}, {"kind", kind}, {"message", message}}}}.dump();
}

// Options shared by every verb. Flags override the config file only when the
// user actually passed them, so `parsed` tracks presence per flag.
struct CommonArgs {
  std::string config_path;
  uint64_t seed = 1;
  std::string out;
};

void add_common(CLI::App* sub, CommonArgs* c, bool out_required = true) {
  sub->add_option("--config", c->config_path, "JSON config file (partial; merged over defaults)");
  sub->add_option("--seed", c->seed, "master RNG seed")->capture_default_str();
  auto* out = sub->add_option("--out", c->out, "output path");
  if (out_required) out->required();
}

vf::RunConfig resolve_config(const CommonArgs& c) {
  vf::RunConfig cfg;
  if (!c.config_path.empty()) cfg = vf::run_config_from_json(vf::load_json_file(c.config_path), cfg);
  return cfg;
}

vf::RunManifest start_manifest(const std::string& verb, const vf::RunConfig& cfg,
                               const CommonArgs& c) {
  vf::RunManifest m;
  m.verb = verb;
  m.config = vf::to_json(cfg);
  m.seed = c.seed;
  m.started_at = vf::iso8601_utc_now();
  return m;
}

void finish_manifest(vf::RunManifest& m, const std::string& primary_out) {
  m.finished_at = vf::iso8601_utc_now();
  vf::write_manifest(m, vf::manifest_path_for(primary_out));
}

// Loads whichever checkpoint flag was given and returns an episode policy.
// The loaded nets are parked in the two optionals, which must outlive the
// returned policy (the policy factories capture by reference).
vf::EpisodePolicy load_policy_arg(const std::string& policy_path, const std::string& actor_path,
                                  const vf::Td3Config& rl_cfg,
                                  std::optional<vf::DiffusionPolicy>& dp_slot,
                                  std::optional<vf::ActorNet>& actor_slot,
                                  std::string& input_path) {
  if (policy_path.empty() == actor_path.empty())
    throw std::invalid_argument("pass exactly one of --policy (diffusion) or --actor (RL)");
  if (!policy_path.empty()) {
    dp_slot = vf::load_policy(policy_path);
    input_path = policy_path;
    return vf::make_diffusion_policy(*dp_slot);
  }
  actor_slot = vf::load_actor(actor_path);
  input_path = actor_path;
  return vf::make_actor_policy(*actor_slot, rl_cfg);
}

std::string metrics_summary(const vf::Metrics& m) {
  std::ostringstream os;
  os.precision(4);
  os << "success " << m.success_rate_mean << "% +/- " << m.success_rate_std << " ("
     << m.n_successes << "/" << m.n_episodes << ")";
  if (m.n_successes > 0)
    os << "  pos " << m.pos_error_mm_mean << " mm  rot " << m.rot_error_deg_mean << " deg";
  return os.str();
}

vf::Json metrics_brief(const vf::Metrics& m) {
  vf::Json j = vf::to_json(m);
  j.erase("records");
  return j;
}

// One CSV row per trained variant, shared by ablate-real and compare-presets.
void write_experiment_csv(const std::vector<vf::TrainedEval>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "preset,real_amount,skipped,skip_reason,success_mean,success_std,"
         "pos_mm_mean,pos_mm_std,rot_deg_mean,rot_deg_std,n_episodes,n_successes\n";
  out.precision(17);
  for (const vf::TrainedEval& r : rows) {
    const vf::Metrics& m = r.metrics;
    out << vf::to_string(r.preset) << ',' << r.real_amount << ',' << (r.skipped ? 1 : 0) << ','
        << r.skip_reason << ',' << m.success_rate_mean << ',' << m.success_rate_std << ','
        << m.pos_error_mm_mean << ',' << m.pos_error_mm_std << ',' << m.rot_error_deg_mean
        << ',' << m.rot_error_deg_std << ',' << m.n_episodes << ',' << m.n_successes << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

vf::Json experiment_rows_json(const std::vector<vf::TrainedEval>& rows) {
  vf::Json arr = vf::Json::array();
  for (const vf::TrainedEval& r : rows) {
    vf::Json row{{"preset", vf::to_string(r.preset)},
                 {"real_amount", r.real_amount},
                 {"skipped", r.skipped}};
    if (r.skipped)
      row["skip_reason"] = r.skip_reason;
    else
      row["metrics"] = metrics_brief(r.metrics);
    arr.push_back(std::move(row));
  }
  return arr;
}

// Loads the sim/real dataset pair and builds the experiment setup the
// drivers expect. The object is resolved from the datasets themselves so an
// experiment can never silently evaluate on a different shape than it
// trained on.
struct ExperimentInputs {
  vf::DemoDataset sim;
  vf::DemoDataset real;
  vf::ExperimentSetup setup;
};

ExperimentInputs load_experiment(const std::string& sim_path, const std::string& real_path,
                                 const vf::RunConfig& cfg, uint64_t seed) {
  ExperimentInputs in;
  in.sim = vf::deserialize(sim_path);
  in.real = vf::deserialize(real_path);
  if (in.sim.domain != vf::DemoDomain::Sim)
    throw std::invalid_argument("--sim dataset is tagged '" + std::string(to_string(in.sim.domain)) + "'");
  if (in.real.domain != vf::DemoDomain::Real)
    throw std::invalid_argument("--real dataset is tagged '" + std::string(to_string(in.real.domain)) + "'");
  if (in.sim.shape_name != in.real.shape_name)
    throw std::invalid_argument("datasets disagree on the object: '" + in.sim.shape_name +
                                "' vs '" + in.real.shape_name + "'");
  in.setup.shape = vf::shape_by_name(in.sim.shape_name);
  in.setup.eval_domain = vf::domain_by_name(cfg.domain);
  in.setup.protocol = cfg.eval;
  in.setup.train = cfg.diffusion;
  in.setup.train_seed = seed;
  in.setup.eval_seed = vf::mix_seed(seed, 1);
  return in;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variable-friction in-hand manipulation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vf::kCodeVersion);

  std::string active_verb = "(none)";

  // --- train-rl ------------------------------------------------------------
  auto* train_rl = app.add_subcommand("train-rl", "train the exploration policy");
  CommonArgs rl_c;
  std::string rl_shape;
  long rl_steps = 0;
  bool rl_no_her = false;
  std::string rl_curve;
  add_common(train_rl, &rl_c);
  train_rl->add_option("--shape", rl_shape, "object name");
  train_rl->add_option("--steps", rl_steps, "environment-step budget");
  train_rl->add_flag("--no-her", rl_no_her, "disable hindsight replay");
  train_rl->add_option("--curve", rl_curve, "write the learning curve CSV here");
  train_rl->callback([&] {
    active_verb = "train-rl";
    vf::RunConfig cfg = resolve_config(rl_c);
    if (train_rl->count("--shape")) cfg.shape = rl_shape;
    if (train_rl->count("--steps")) cfg.rl_budget_steps = rl_steps;
    if (rl_no_her) cfg.use_her = false;
    const vf::Shape2& shape = vf::shape_by_name(cfg.shape);

    vf::RunManifest m = start_manifest(active_verb, cfg, rl_c);
    m.domain_params = vf::domain_params_json(vf::DomainParams::randomized());

    std::ofstream curve;
    if (!rl_curve.empty()) {
      curve.open(rl_curve, std::ios::trunc);
      if (!curve) throw std::runtime_error("cannot open " + rl_curve);
    }
    const vf::TrainResult r = vf::train_exploration_policy(
        shape, cfg.rl, cfg.rl_budget_steps, rl_c.seed, cfg.use_her,
        curve.is_open() ? &curve : nullptr);
    vf::save_actor(r.best_actor, rl_c.out);

    m.outputs = {rl_c.out};
    if (!rl_curve.empty()) m.outputs.push_back(rl_curve);
    m.results = vf::Json{{"best_success", r.best_success},
                         {"best_at_steps", r.best_at_steps},
                         {"env_steps", r.env_steps}};
    finish_manifest(m, rl_c.out);
    std::cout << "wrote " << rl_c.out << "  best eval success " << 100.0 * r.best_success
              << "% at " << r.best_at_steps << " env steps\n";
  });

  // --- collect ---------------------------------------------------------------
  auto* collect = app.add_subcommand("collect", "collect hindsight-relabeled demonstrations");
  CommonArgs co_c;
  std::string co_actor, co_shape, co_domain, co_gen = "td3-explorer";
  int co_n = 0;
  add_common(collect, &co_c);
  collect->add_option("--actor", co_actor, "exploration-policy checkpoint")->required();
  collect->add_option("--shape", co_shape, "object name");
  collect->add_option("--domain", co_domain, "'sim' (randomized) or 'real' (surrogate)");
  collect->add_option("--n", co_n, "trajectories to roll out");
  collect->add_option("--generator-id", co_gen, "generator label stored in the dataset")
      ->capture_default_str();
  collect->callback([&] {
    active_verb = "collect";
    vf::RunConfig cfg = resolve_config(co_c);
    if (collect->count("--shape")) cfg.shape = co_shape;
    if (collect->count("--domain")) cfg.domain = co_domain;
    if (collect->count("--n")) cfg.demos = co_n;
    const vf::Shape2& shape = vf::shape_by_name(cfg.shape);
    vf::DemoDomain dd;
    if (cfg.domain == "sim" || cfg.domain == "randomized_sim")
      dd = vf::DemoDomain::Sim;
    else if (cfg.domain == "real" || cfg.domain == "surrogate_real")
      dd = vf::DemoDomain::Real;
    else
      throw std::invalid_argument("collect expects --domain sim or real, got '" + cfg.domain +
                                  "'");

    vf::RunManifest m = start_manifest(active_verb, cfg, co_c);
    m.domain_params = vf::domain_params_json(vf::domain_params_for(dd));
    m.inputs = {co_actor};

    const vf::ActorNet actor = vf::load_actor(co_actor);
    const std::vector<vf::RawTrajectory> raws =
        vf::collect_raw(actor, shape, dd, cfg.demos, co_c.seed, cfg.rl);
    const vf::DemoDataset ds = vf::build_demo_dataset(raws, shape.name, dd, co_gen,
                                                      vf::config_hash(vf::to_json(cfg)));
    vf::serialize(ds, co_c.out);

    m.outputs = {co_c.out};
    m.results = vf::Json{{"rolled_out", raws.size()}, {"kept", ds.trajectories.size()}};
    finish_manifest(m, co_c.out);
    std::cout << "wrote " << co_c.out << "  kept " << ds.trajectories.size() << "/" << raws.size()
              << " trajectories\n";
  });

  // --- train-dp --------------------------------------------------------------
  auto* train_dp = app.add_subcommand("train-dp", "train the diffusion policy");
  CommonArgs dp_c;
  std::string dp_sim, dp_real, dp_preset, dp_loss;
  add_common(train_dp, &dp_c);
  train_dp->add_option("--sim", dp_sim, "sim demo dataset")->required();
  train_dp->add_option("--real", dp_real, "real demo dataset (always supplies the norm stats)")
      ->required();
  train_dp->add_option("--preset", dp_preset, "cotrain | simonly | realonly | finetune");
  train_dp->add_option("--loss", dp_loss, "write the per-step loss CSV here");
  train_dp->callback([&] {
    active_verb = "train-dp";
    vf::RunConfig cfg = resolve_config(dp_c);
    if (train_dp->count("--preset")) cfg.preset = dp_preset;
    const vf::TrainPreset preset = vf::preset_by_name(cfg.preset);

    const vf::DemoDataset sim = vf::deserialize(dp_sim);
    const vf::DemoDataset real = vf::deserialize(dp_real);

    vf::RunManifest m = start_manifest(active_verb, cfg, dp_c);
    m.inputs = {dp_sim, dp_real};

    std::ofstream loss;
    if (!dp_loss.empty()) {
      loss.open(dp_loss, std::ios::trunc);
      if (!loss) throw std::runtime_error("cannot open " + dp_loss);
    }
    const vf::CoTrainResult r =
        vf::cotrain(sim, real, preset, cfg.diffusion, dp_c.seed, loss.is_open() ? &loss : nullptr);
    vf::save_policy(r.policy, dp_c.out);

    m.outputs = {dp_c.out};
    if (!dp_loss.empty()) m.outputs.push_back(dp_loss);
    m.results = vf::Json{{"preset", vf::to_string(preset)},
                         {"train_steps", r.loss_history.size()},
                         {"final_loss", r.loss_history.empty()
                                            ? vf::Json()
                                            : vf::Json(r.loss_history.back())}};
    finish_manifest(m, dp_c.out);
    std::cout << "wrote " << dp_c.out << "  " << vf::to_string(preset) << ", "
              << r.loss_history.size() << " steps";
    if (!r.loss_history.empty()) std::cout << ", final loss " << r.loss_history.back();
    std::cout << "\n";
  });

  // --- eval ------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  CommonArgs ev_c;
  std::string ev_policy, ev_actor, ev_shape, ev_domain;
  add_common(eval, &ev_c);
  eval->add_option("--policy", ev_policy, "diffusion-policy checkpoint");
  eval->add_option("--actor", ev_actor, "exploration-actor checkpoint");
  eval->add_option("--shape", ev_shape, "object name");
  eval->add_option("--domain", ev_domain, "nominal_sim | randomized_sim | surrogate_real");
  eval->callback([&] {
    active_verb = "eval";
    vf::RunConfig cfg = resolve_config(ev_c);
    if (eval->count("--shape")) cfg.shape = ev_shape;
    if (eval->count("--domain")) cfg.domain = ev_domain;
    const vf::Shape2& shape = vf::shape_by_name(cfg.shape);
    const vf::DomainParams domain = vf::domain_by_name(cfg.domain);

    std::optional<vf::DiffusionPolicy> dp_slot;
    std::optional<vf::ActorNet> actor_slot;
    std::string input;
    const vf::EpisodePolicy policy =
        load_policy_arg(ev_policy, ev_actor, cfg.rl, dp_slot, actor_slot, input);

    vf::RunManifest m = start_manifest(active_verb, cfg, ev_c);
    m.domain_params = vf::domain_params_json(domain);
    m.inputs = {input};

    const vf::Metrics metrics = vf::run_eval(shape, domain, cfg.eval, policy, ev_c.seed);
    std::ofstream out(ev_c.out, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + ev_c.out);
    out << vf::to_json(metrics).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + ev_c.out);

    m.outputs = {ev_c.out};
    m.results = metrics_brief(metrics);
    finish_manifest(m, ev_c.out);
    std::cout << metrics_summary(metrics) << "\nwrote " << ev_c.out << "\n";
  });

  // --- ablate-real -------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate-real", "sweep the real-demo amount");
  CommonArgs ab_c;
  std::string ab_sim, ab_real, ab_domain;
  std::vector<int> ab_amounts;
  add_common(ablate, &ab_c);
  ablate->add_option("--sim", ab_sim, "sim demo dataset")->required();
  ablate->add_option("--real", ab_real, "real demo dataset")->required();
  ablate->add_option("--amounts", ab_amounts, "real-demo counts, comma separated")
      ->delimiter(',');
  ablate->add_option("--domain", ab_domain, "evaluation domain");
  ablate->callback([&] {
    active_verb = "ablate-real";
    vf::RunConfig cfg = resolve_config(ab_c);
    if (ablate->count("--domain")) cfg.domain = ab_domain;
    if (ablate->count("--amounts")) cfg.real_amounts = ab_amounts;

    ExperimentInputs in = load_experiment(ab_sim, ab_real, cfg, ab_c.seed);
    vf::RunManifest m = start_manifest(active_verb, cfg, ab_c);
    m.domain_params = vf::domain_params_json(in.setup.eval_domain);
    m.inputs = {ab_sim, ab_real};

    const std::vector<vf::TrainedEval> rows =
        vf::ablate_real_amount(in.sim, in.real, cfg.real_amounts, in.setup, &std::cout);
    write_experiment_csv(rows, ab_c.out);

    m.outputs = {ab_c.out};
    m.results = experiment_rows_json(rows);
    finish_manifest(m, ab_c.out);
    std::cout << "wrote " << ab_c.out << " (" << rows.size() << " rows)\n";
  });

  // --- compare-presets -----------------------------------------------------------
  auto* compare = app.add_subcommand("compare-presets", "train and evaluate all presets");
  CommonArgs cp_c;
  std::string cp_sim, cp_real, cp_domain;
  add_common(compare, &cp_c);
  compare->add_option("--sim", cp_sim, "sim demo dataset")->required();
  compare->add_option("--real", cp_real, "real demo dataset")->required();
  compare->add_option("--domain", cp_domain, "evaluation domain");
  compare->callback([&] {
    active_verb = "compare-presets";
    vf::RunConfig cfg = resolve_config(cp_c);
    if (compare->count("--domain")) cfg.domain = cp_domain;

    ExperimentInputs in = load_experiment(cp_sim, cp_real, cfg, cp_c.seed);
    vf::RunManifest m = start_manifest(active_verb, cfg, cp_c);
    m.domain_params = vf::domain_params_json(in.setup.eval_domain);
    m.inputs = {cp_sim, cp_real};

    const std::vector<vf::TrainedEval> rows =
        vf::compare_presets(in.sim, in.real, in.setup, &std::cout);
    write_experiment_csv(rows, cp_c.out);

    m.outputs = {cp_c.out};
    m.results = experiment_rows_json(rows);
    finish_manifest(m, cp_c.out);
    std::cout << "wrote " << cp_c.out << " (" << rows.size() << " rows)\n";
  });

  // --- export-traj ---------------------------------------------------------------
  auto* exp = app.add_subcommand("export-traj", "run one episode and dump a CSV");
  CommonArgs ex_c;
  std::string ex_policy, ex_actor, ex_shape, ex_domain;
  add_common(exp, &ex_c);
  exp->add_option("--policy", ex_policy, "diffusion-policy checkpoint");
  exp->add_option("--actor", ex_actor, "exploration-actor checkpoint");
  exp->add_option("--shape", ex_shape, "object name");
  exp->add_option("--domain", ex_domain, "nominal_sim | randomized_sim | surrogate_real");
  exp->callback([&] {
    active_verb = "export-traj";
    vf::RunConfig cfg = resolve_config(ex_c);
    if (exp->count("--shape")) cfg.shape = ex_shape;
    if (exp->count("--domain")) cfg.domain = ex_domain;
    const vf::Shape2& shape = vf::shape_by_name(cfg.shape);
    const vf::DomainParams domain = vf::domain_by_name(cfg.domain);

    std::optional<vf::DiffusionPolicy> dp_slot;
    std::optional<vf::ActorNet> actor_slot;
    std::string input;
    const vf::EpisodePolicy policy =
        load_policy_arg(ex_policy, ex_actor, cfg.rl, dp_slot, actor_slot, input);

    vf::RunManifest m = start_manifest(active_verb, cfg, ex_c);
    m.domain_params = vf::domain_params_json(domain);
    m.inputs = {input};

    const std::vector<vf::TrajRow> rows =
        vf::export_trajectory(shape, domain, cfg.eval, policy, ex_c.seed, ex_c.out);

    m.outputs = {ex_c.out};
    m.results = vf::Json{{"rows", rows.size()}};
    finish_manifest(m, ex_c.out);
    std::cout << "wrote " << ex_c.out << " (" << rows.size() << " rows)\n";
  });

  // --- print-config ----------------------------------------------------------------
  auto* print_cfg = app.add_subcommand("print-config", "print the resolved configuration");
  CommonArgs pc_c;
  add_common(print_cfg, &pc_c, /*out_required=*/false);
  print_cfg->callback([&] {
    active_verb = "print-config";
    const vf::RunConfig cfg = resolve_config(pc_c);
    std::cout << vf::to_json(cfg).dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << error_json(active_verb, "usage", e.what()) << "\n";
    return e.get_exit_code();
  } catch (const std::invalid_argument& e) {
    std::cerr << error_json(active_verb, "invalid-argument", e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_json(active_verb, "runtime", e.what()) << "\n";
    return 1;
  }
  return 0;
}
