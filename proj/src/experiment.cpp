#include "symmfg/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "symmfg/learn.hpp"
#include "symmfg/mfg.hpp"
#include "symmfg/serialize.hpp"
#include "symmfg/sim.hpp"
#include "symmfg/symmetry.hpp"

namespace symmfg {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

// Unknown keys are errors, not warnings: a typo must not silently fall back
// to a default in the middle of a sweep.
void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (key == k) ok = true;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

struct EvaluationSettings {
  std::size_t mfg_every = 0;
  std::size_t nplayer_every = 0;
  std::size_t nplayer_episodes = 2000;
  std::size_t alpha_beta_budget = 2000;
  std::string alpha_beta_mode = "sampled";
  std::size_t dump_trajectories = 0;
};

EvaluationSettings parse_evaluation(const json& j) {
  EvaluationSettings eval;
  if (j.is_null()) return eval;
  check_keys(j,
             {"mfg_every", "nplayer_every", "nplayer_episodes", "alpha_beta_budget",
              "alpha_beta_mode", "dump_trajectories"},
             "evaluation");
  eval.mfg_every = j.value("mfg_every", std::size_t{0});
  eval.nplayer_every = j.value("nplayer_every", std::size_t{0});
  eval.nplayer_episodes = j.value("nplayer_episodes", std::size_t{2000});
  eval.alpha_beta_budget = j.value("alpha_beta_budget", std::size_t{2000});
  eval.alpha_beta_mode = j.value("alpha_beta_mode", std::string("sampled"));
  eval.dump_trajectories = j.value("dump_trajectories", std::size_t{0});
  if (eval.alpha_beta_mode != "sampled" && eval.alpha_beta_mode != "exact" &&
      eval.alpha_beta_mode != "none")
    throw ConfigError("alpha_beta_mode must be sampled, exact or none");
  return eval;
}

PmdConfig parse_pmd_block(const json& j, const std::string& context) {
  PmdConfig cfg;
  if (j.is_null()) throw ConfigError("missing '" + context + "' block");
  check_keys(j,
             {"epochs", "td_epochs", "tau", "delta", "use_all_agents", "clip_qmax",
              "normalize_rewards", "pilot_episodes", "mixing_offset", "generation_batch"},
             context);
  cfg.epochs = j.value("epochs", std::size_t{100});
  cfg.td.epochs = j.value("td_epochs", std::size_t{500});
  cfg.tau = j.value("tau", 0.1);
  if (j.contains("delta") && !j.at("delta").is_null()) cfg.td.delta = j.at("delta").get<double>();
  cfg.td.use_all_agents = j.value("use_all_agents", true);
  cfg.td.clip_qmax = j.value("clip_qmax", true);
  cfg.normalize_rewards = j.value("normalize_rewards", true);
  cfg.td.pilot_episodes = j.value("pilot_episodes", std::size_t{200});
  cfg.mixing_offset = j.value("mixing_offset", false);
  cfg.td.generation_batch = j.value("generation_batch", std::size_t{256});
  if (cfg.tau < 0 || cfg.tau >= 0.5)
    throw ConfigError(context + ".tau must lie in [0, 0.5)");
  return cfg;
}

json alpha_beta_to_json(const AlphaBetaReport& rep) {
  return json{{"alpha", rep.alpha},
              {"beta", rep.beta},
              {"mode", rep.exact ? "exact" : "sampled"},
              {"lower_bound_only", !rep.exact},
              {"samples_used", rep.samples_used}};
}

json run_alpha_beta(const EnvironmentPair& env, const EvaluationSettings& eval,
                    std::uint64_t seed, int workers) {
  if (eval.alpha_beta_mode == "none") return nullptr;
  AlphaBetaOptions opt;
  opt.mode = eval.alpha_beta_mode == "exact" ? AlphaBetaOptions::Mode::exact
                                             : AlphaBetaOptions::Mode::sampled;
  opt.budget = eval.alpha_beta_budget;
  opt.workers = workers;
  return alpha_beta_to_json(
      estimate_alpha_beta(*env.game, *env.companion, opt, RngStream(seed, 7001)));
}

// Trace rows for the exact (sample-free) mirror-descent run: exploitability
// of the running average at the requested cadence.
MetricTrace exact_pmd_trace(const MeanFieldGame& metric_mfg, const ExactPmdResult& result,
                            std::size_t every) {
  MetricTrace trace;
  const std::size_t T = result.iterates.size() - 1;
  std::vector<double> sums(result.iterates[0].raw().size(), 0.0);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t t = 0; t <= T; ++t) {
    auto raw = result.iterates[t].raw();
    for (std::size_t k = 0; k < raw.size(); ++k) sums[k] += raw[k];
    const bool last = t == T;
    if (t == 0 || (t % every != 0 && !last)) continue;
    std::vector<double> avg(sums);
    for (double& x : avg) x /= static_cast<double>(t + 1);
    Policy averaged(result.iterates[0].horizon(), result.iterates[0].n_states(),
                    result.iterates[0].n_actions(), std::move(avg));
    MetricRow row;
    row.epoch = t;
    row.samples_consumed = 0;
    row.mfg_exploitability = mfg_exploitability(metric_mfg, averaged, 0.0).value;
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.rows.push_back(row);
  }
  return trace;
}

void dump_trajectories(const fs::path& dir, const DynamicGame& game,
                       const PolicyProfile& profile, std::size_t episodes, std::uint64_t seed) {
  std::ofstream out(dir / "trajectories.tsv");
  write_trajectory_header(out);
  const RngStream base(seed, 9001);
  for (std::size_t e = 0; e < episodes; ++e)
    append_trajectory_records(out, e, sample_episode(game, profile, base.substream(e)));
}

}  // namespace

RunResult run_experiment(const std::string& config_path, const RunOverrides& overrides) {
  json cfg = parse_json_file(config_path);
  check_keys(cfg,
             {"version", "root_seed", "workers", "output_dir", "environment", "algorithm",
              "symm_pmd", "ipmd", "td_eval", "exact_pmd", "evaluation"},
             "config");
  if (cfg.value("version", 1) != 1) throw ConfigError("unsupported config version");

  const std::uint64_t seed = overrides.root_seed.value_or(cfg.value("root_seed", std::uint64_t{0}));
  const int workers = std::max(overrides.workers.value_or(cfg.value("workers", 1)), 1);
  std::string out_dir = overrides.output_dir.value_or(cfg.value("output_dir", std::string{}));
  if (out_dir.empty()) throw ConfigError("output_dir missing (config key or --out)");

  if (!cfg.contains("environment")) throw ConfigError("missing 'environment'");
  json env_spec = cfg.at("environment");
  EnvironmentPair env;
  if (env_spec.contains("file")) {
    check_keys(env_spec, {"file"}, "environment");
    const fs::path base = fs::path(config_path).parent_path();
    const fs::path env_path = base / env_spec.at("file").get<std::string>();
    try {
      env = load_environment(env_path.string());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("environment: ") + e.what());
    }
  } else {
    try {
      env = build_environment_from_json(env_spec.dump());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("environment: ") + e.what());
    }
  }

  const std::string algorithm = cfg.value("algorithm", std::string{});
  if (algorithm != "symm-pmd" && algorithm != "ipmd" && algorithm != "td-eval" &&
      algorithm != "exact-pmd")
    throw ConfigError("algorithm must be one of symm-pmd, ipmd, td-eval, exact-pmd");
  const EvaluationSettings eval =
      parse_evaluation(cfg.contains("evaluation") ? cfg.at("evaluation") : json(nullptr));
  const std::size_t dump_count = overrides.dump_trajectories.value_or(eval.dump_trajectories);

  fs::create_directories(out_dir);

  // Self-contained snapshot: inline environment with all draws, resolved
  // seed/workers. Re-running the snapshot reproduces the run bit for bit.
  json resolved = cfg;
  resolved["root_seed"] = seed;
  resolved["workers"] = workers;
  resolved["output_dir"] = out_dir;
  resolved["environment"] = json::parse(env.description_json);
  {
    std::ofstream snap(fs::path(out_dir) / "resolved_config.json");
    snap << resolved.dump(2) << "\n";
  }

  const auto t_start = std::chrono::steady_clock::now();
  const RngStream root(seed, 0);
  const RewardBounds bounds = env.game->reward_bounds();

  json summary;
  summary["algorithm"] = algorithm;
  summary["environment"] = {{"type", env.kind},
                            {"num_agents", env.game->num_agents()},
                            {"horizon", env.game->horizon()},
                            {"states", env.game->states().size},
                            {"actions", env.game->actions().size}};
  summary["root_seed"] = seed;
  summary["workers"] = workers;
  summary["reward_bounds"] = {{"lo", bounds.lo}, {"hi", bounds.hi}};

  MetricTrace trace;
  auto record_trace = [&] {
    std::ofstream out(fs::path(out_dir) / "trace.tsv");
    out << metric_trace_to_text(trace);
  };

  auto finish_summary = [&](std::uint64_t samples) {
    summary["samples_consumed"] = samples;
    if (!trace.rows.empty()) {
      const MetricRow& last = trace.rows.back();
      const double scale = bounds.range();
      if (!std::isnan(last.mfg_exploitability)) {
        summary["final_mfg_exploitability"] = {{"normalized", last.mfg_exploitability},
                                               {"raw", last.mfg_exploitability * scale}};
      }
      if (!std::isnan(last.nplayer_exploitability_mean)) {
        summary["final_nplayer_exploitability"] = {
            {"normalized_mean", last.nplayer_exploitability_mean},
            {"normalized_stderr", last.nplayer_exploitability_stderr},
            {"raw_mean", last.nplayer_exploitability_mean * scale},
            {"raw_stderr", last.nplayer_exploitability_stderr * scale}};
      }
    }
    summary["alpha_beta"] = run_alpha_beta(env, eval, seed, workers);
    summary["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  if (algorithm == "symm-pmd" || algorithm == "ipmd") {
    PmdConfig pmd = parse_pmd_block(cfg.contains(algorithm == "symm-pmd" ? "symm_pmd" : "ipmd")
                                        ? cfg.at(algorithm == "symm-pmd" ? "symm_pmd" : "ipmd")
                                        : json(nullptr),
                                    algorithm);
    pmd.td.workers = workers;
    pmd.mfg_eval_every = eval.mfg_every;
    pmd.nplayer_eval_every = eval.nplayer_every;
    pmd.nplayer_eval_episodes = eval.nplayer_episodes;

    if (algorithm == "symm-pmd") {
      SymmPmdResult result = symm_pmd(*env.game, env.companion, pmd, root);
      trace = std::move(result.trace);
      record_trace();
      save_policy(result.averaged, (fs::path(out_dir) / "policy.tsv").string());
      if (dump_count > 0)
        dump_trajectories(out_dir, *env.game, PolicyProfile::shared(result.averaged), dump_count,
                          seed);
      finish_summary(trace.rows.empty() ? 0 : trace.rows.back().samples_consumed);
      summary["policy_file"] = "policy.tsv";
      if (result.tau_outside_convergence_range)
        summary["warnings"] = json::array({"tau outside the (0, 1/2) convergence range"});
    } else {
      IpmdResult result = ipmd(*env.game, env.companion, pmd, root);
      trace = std::move(result.trace);
      record_trace();
      {
        std::ofstream out(fs::path(out_dir) / "policies.tsv");
        out << policy_profile_to_text(result.policies);
      }
      if (dump_count > 0)
        dump_trajectories(out_dir, *env.game, PolicyProfile::per_agent(result.policies),
                          dump_count, seed);
      finish_summary(trace.rows.empty() ? 0 : trace.rows.back().samples_consumed);
      summary["policy_file"] = "policies.tsv";
    }
  } else if (algorithm == "td-eval") {
    TdConfig td;
    json block = cfg.contains("td_eval") ? cfg.at("td_eval") : json(nullptr);
    if (block.is_null()) throw ConfigError("missing 'td_eval' block");
    check_keys(block,
               {"epochs", "tau", "delta", "use_all_agents", "clip_qmax", "normalize_rewards",
                "pilot_episodes", "policy_file", "generation_batch"},
               "td_eval");
    td.epochs = block.value("epochs", std::size_t{1000});
    td.tau = block.value("tau", 0.0);
    if (block.contains("delta") && !block.at("delta").is_null())
      td.delta = block.at("delta").get<double>();
    td.use_all_agents = block.value("use_all_agents", true);
    td.clip_qmax = block.value("clip_qmax", true);
    td.normalize_rewards = block.value("normalize_rewards", true);
    td.pilot_episodes = block.value("pilot_episodes", std::size_t{200});
    td.generation_batch = block.value("generation_batch", std::size_t{256});
    td.workers = workers;

    Policy pi = Policy::uniform(env.game->horizon(), env.game->states().size,
                                env.game->actions().size);
    if (block.contains("policy_file")) {
      const fs::path base = fs::path(config_path).parent_path();
      pi = load_policy((base / block.at("policy_file").get<std::string>()).string());
    }

    QTable q = td_learn(*env.game, pi, td, root);
    save_qtable(q, (fs::path(out_dir) / "qtable.tsv").string());

    // Flow-weighted error against the exact backward values.
    std::shared_ptr<const MeanFieldGame> metric_mfg = env.companion;
    if (td.normalize_rewards)
      metric_mfg = std::shared_ptr<const MeanFieldGame>(normalize_rewards(env.companion));
    const PopulationFlow flow = induce_flow(*metric_mfg, pi);
    const QTable reference = q_backward(*metric_mfg, pi, td.tau, &flow);
    double mse = 0.0;
    for (std::size_t h = 0; h < q.horizon(); ++h)
      for (std::size_t s = 0; s < q.n_states(); ++s)
        for (std::size_t a = 0; a < q.n_actions(); ++a) {
          const double d = q.at(h, s, a) - reference.at(h, s, a);
          mse += flow.at(h).at(s, a) * d * d;
        }
    summary["flow_weighted_mse"] = mse;
    MetricRow row;
    row.epoch = td.epochs;
    row.samples_consumed = td.epochs + (td.delta ? 0 : td.pilot_episodes);
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    trace.rows.push_back(row);
    record_trace();
    if (dump_count > 0)
      dump_trajectories(out_dir, *env.game, PolicyProfile::shared(pi), dump_count, seed);
    finish_summary(row.samples_consumed);
    summary["qtable_file"] = "qtable.tsv";
  } else {  // exact-pmd
    json block = cfg.contains("exact_pmd") ? cfg.at("exact_pmd") : json(nullptr);
    if (block.is_null()) throw ConfigError("missing 'exact_pmd' block");
    check_keys(block, {"epochs", "tau", "normalize_rewards", "constant_lr", "mixing_offset"},
               "exact_pmd");
    ExactPmdOptions opt;
    opt.epochs = block.value("epochs", std::size_t{400});
    opt.tau = block.value("tau", 0.1);
    opt.mixing_offset = block.value("mixing_offset", false);
    if (block.contains("constant_lr")) {
      const double lr = block.at("constant_lr").get<double>();
      opt.lr_schedule = [lr](std::size_t) { return lr; };
    }
    const bool normalize = block.value("normalize_rewards", true);
    std::shared_ptr<const MeanFieldGame> target = env.companion;
    if (normalize) target = std::shared_ptr<const MeanFieldGame>(normalize_rewards(env.companion));

    ExactPmdResult result = exact_pmd(*target, opt);
    trace = exact_pmd_trace(*target, result,
                            eval.mfg_every ? eval.mfg_every
                                           : std::max<std::size_t>(1, opt.epochs / 50));
    record_trace();
    save_policy(result.averaged, (fs::path(out_dir) / "policy.tsv").string());
    if (dump_count > 0)
      dump_trajectories(out_dir, *env.game, PolicyProfile::shared(result.averaged), dump_count,
                        seed);
    finish_summary(0);
    summary["policy_file"] = "policy.tsv";
    if (result.tau_outside_convergence_range)
      summary["warnings"] = json::array({"tau outside the (0, 1/2) convergence range"});
  }

  const std::string summary_text = summary.dump(2);
  {
    std::ofstream out(fs::path(out_dir) / "summary.json");
    out << summary_text << "\n";
  }
  return {out_dir, summary_text};
}

std::string inspect_environment(const EnvironmentPair& env, const std::vector<std::string>& checks,
                                std::uint64_t seed, std::size_t budget, int workers) {
  json report;
  report["environment"] = {{"type", env.kind},
                           {"num_agents", env.game->num_agents()},
                           {"horizon", env.game->horizon()},
                           {"states", env.game->states().size},
                           {"actions", env.game->actions().size}};
  report["seed"] = seed;

  const std::size_t S = env.game->states().size;
  const std::size_t A = env.game->actions().size;
  const std::size_t N = env.game->num_agents();

  for (const std::string& check : checks) {
    if (check == "alpha-beta") {
      AlphaBetaOptions opt;
      const auto profiles = SimplexGrid::count_points(S * A, N - 1);
      opt.mode = profiles && *profiles <= 200'000 ? AlphaBetaOptions::Mode::exact
                                                  : AlphaBetaOptions::Mode::sampled;
      opt.budget = budget;
      opt.workers = workers;
      report["alpha-beta"] =
          alpha_beta_to_json(estimate_alpha_beta(*env.game, *env.companion, opt,
                                                 RngStream(seed, 7001)));
    } else if (check == "monotonicity") {
      MonotonicityReport rep = check_monotonicity(*env.companion, budget, RngStream(seed, 7002));
      report["monotonicity"] = {{"violated", rep.violated},
                                {"boundary_case", rep.boundary_case},
                                {"p_independent_of_mu", rep.p_independent_of_mu},
                                {"min_inner_product", rep.min_inner_product},
                                {"max_inner_product", rep.max_inner_product},
                                {"pairs_tested", rep.pairs_tested}};
    } else if (check == "kappa-sparsity") {
      // Congestion-style hypothesis: each reward kernel depends on the
      // opponents only through the agent's own (s, a) cell.
      bool all_sparse = true;
      RngStream rng(seed, 7003);
      const std::size_t probe_agents = std::min<std::size_t>(N, 4);
      for (std::size_t i = 0; i < probe_agents && all_sparse; ++i) {
        for (std::size_t s = 0; s < S && all_sparse; ++s)
          for (std::size_t a = 0; a < A && all_sparse; ++a) {
            std::vector<StateAction> U = {{static_cast<std::uint32_t>(s),
                                           static_cast<std::uint32_t>(a)}};
            auto fn = [&](const CountTable& others) {
              return std::vector<double>{env.game->reward(i, s, a, others)};
            };
            auto cert = check_kappa_sparsity_counts(fn, U, S, A, N - 1,
                                                    rng.substream(i * S * A + s * A + a),
                                                    std::max<std::size_t>(budget, 1000));
            all_sparse = cert.sparse;
          }
      }
      report["kappa-sparsity"] = {{"hypothesis", "rewards 1-sparse on the own cell"},
                                  {"sparse", all_sparse},
                                  {"trials_per_kernel", std::max<std::size_t>(budget, 1000)},
                                  {"agents_probed", probe_agents}};
    } else if (check == "lipschitz") {
      // Moduli of the companion kernels tabulated on a small opponent grid:
      // transitions measured in L1 over L2, rewards in absolute value over
      // L2. All grid pairs when the grid is small, sampled pairs otherwise.
      const std::uint64_t denom = std::min<std::uint64_t>(N - 1, 8);
      auto grid = std::make_shared<SimplexGrid>(S, A, denom);
      const bool exact = grid->size() <= 512;
      double p_modulus = 0.0, r_modulus = 0.0;
      std::vector<double> p(S);
      RngStream rng(seed, 7004);
      for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
          GridFunction table =
              GridFunction::tabulate(grid, S + 1, [&](const CountTable& counts) {
                auto mu = PopulationDistribution::from_counts(counts);
                std::vector<double> row(S + 1);
                env.companion->transition(s, a, mu, p);
                std::copy(p.begin(), p.end(), row.begin());
                row[S] = env.companion->reward(s, a, mu);
                return row;
              });
          auto consider = [&](std::size_t i, std::size_t j) {
            const double dist = l2_distance(grid->point_weights(i), grid->point_weights(j));
            if (dist <= 0) return;
            double pd = 0;
            for (std::size_t c = 0; c < S; ++c)
              pd += std::abs(table.value(i)[c] - table.value(j)[c]);
            p_modulus = std::max(p_modulus, pd / dist);
            r_modulus =
                std::max(r_modulus, std::abs(table.value(i)[S] - table.value(j)[S]) / dist);
          };
          if (exact) {
            for (std::size_t i = 0; i < grid->size(); ++i)
              for (std::size_t j = i + 1; j < grid->size(); ++j) consider(i, j);
          } else {
            for (std::size_t t = 0; t < budget; ++t) {
              const std::size_t i = rng.uniform_index(grid->size());
              std::size_t j = rng.uniform_index(grid->size() - 1);
              if (j >= i) ++j;
              consider(i, j);
            }
          }
        }
      report["lipschitz"] = {{"grid_denominator", denom},
                             {"pairs", exact ? "exact" : "sampled"},
                             {"transition_l1_over_l2", p_modulus},
                             {"reward_over_l2", r_modulus}};
    } else {
      throw ConfigError("unknown check '" + check + "'");
    }
  }
  return report.dump(2);
}

std::string validate_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json report;
  if (text.rfind("# symmfg-policy-profile", 0) == 0) {
    auto policies = policy_profile_from_text(text);
    for (const Policy& p : policies) p.validate();
    report = {{"kind", "policy-profile"},
              {"agents", policies.size()},
              {"horizon", policies[0].horizon()},
              {"states", policies[0].n_states()},
              {"actions", policies[0].n_actions()},
              {"valid", true}};
  } else {
    Policy p = policy_from_text(text);
    p.validate();
    report = {{"kind", "policy"},
              {"horizon", p.horizon()},
              {"states", p.n_states()},
              {"actions", p.n_actions()},
              {"valid", true}};
  }
  return report.dump(2);
}

}  // namespace symmfg
