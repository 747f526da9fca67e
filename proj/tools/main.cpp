// Command-line front end. Links only the C API (symmfg/symmfg.h); all
// computation lives behind the shared library. Progress goes to stderr,
// data to stdout and files.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "symmfg/symmfg.h"

namespace {

int fail(smfg_status status, const std::string& context) {
  std::cerr << "error: " << context << ": " << smfg_last_error() << "\n";
  return static_cast<int>(status);
}

std::string read_file(const std::string& path, bool& ok) {
  std::ifstream in(path);
  if (!in) {
    ok = false;
    return {};
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  ok = true;
  return buffer.str();
}

bool looks_like_policy(const std::string& path) {
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  return first.rfind("# symmfg-policy", 0) == 0;
}

void print_inspect_summary(const std::string& report_json) {
  const auto report = nlohmann::json::parse(report_json);
  if (report.contains("alpha-beta")) {
    const auto& ab = report.at("alpha-beta");
    std::cout << "alpha-beta: alpha=" << ab.at("alpha").get<double>()
              << " beta=" << ab.at("beta").get<double>() << " ("
              << ab.at("mode").get<std::string>()
              << (ab.at("lower_bound_only").get<bool>() ? ", lower bound" : "") << ", "
              << ab.at("samples_used").get<std::size_t>() << " profiles)\n";
  }
  if (report.contains("monotonicity")) {
    const auto& m = report.at("monotonicity");
    std::cout << "monotonicity: "
              << (m.at("violated").get<bool>()
                      ? "VIOLATED"
                      : (m.at("boundary_case").get<bool>() ? "boundary (zero coupling)"
                                                           : "no violation"))
              << ", min inner product " << m.at("min_inner_product").get<double>()
              << ", P independent of mu: "
              << (m.at("p_independent_of_mu").get<bool>() ? "yes" : "no") << "\n";
  }
  if (report.contains("kappa-sparsity")) {
    const auto& k = report.at("kappa-sparsity");
    std::cout << "kappa-sparsity: " << (k.at("sparse").get<bool>() ? "true" : "false") << " ("
              << k.at("hypothesis").get<std::string>() << ")\n";
  }
  if (report.contains("lipschitz")) {
    const auto& l = report.at("lipschitz");
    std::cout << "lipschitz: transition " << l.at("transition_l1_over_l2").get<double>()
              << ", reward " << l.at("reward_over_l2").get<double>() << " (grid denominator "
              << l.at("grid_denominator").get<std::uint64_t>() << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon dynamic games with approximate symmetry: mean-field "
               "learning, evaluation and certification"};
  app.require_subcommand(1);

  // run ----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  std::string run_config;
  std::string run_out;
  std::int64_t run_seed = -1;
  int run_workers = 0;
  std::int64_t run_dump = -1;
  run->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--out", run_out, "Output directory (overrides config)");
  run->add_option("--seed", run_seed, "Root seed (overrides config)");
  run->add_option("--workers", run_workers, "Concurrent episode workers");
  run->add_option("--dump-trajectories", run_dump,
                  "Dump this many evaluation episodes to trajectories.tsv");

  // inspect ------------------------------------------------------------
  auto* inspect = app.add_subcommand("inspect", "Diagnostics for an environment or policy file");
  std::string inspect_path;
  std::string inspect_checks = "alpha-beta";
  std::uint64_t inspect_seed = 0;
  std::int64_t inspect_budget = -1;
  int inspect_workers = 0;
  std::string inspect_out;
  inspect->add_option("--path", inspect_path, "Environment (or policy) file")->required();
  inspect->add_option("--checks", inspect_checks,
                      "Comma-separated: alpha-beta,monotonicity,kappa-sparsity,lipschitz");
  inspect->add_option("--seed", inspect_seed, "Seed for sampled diagnostics");
  inspect->add_option("--budget", inspect_budget, "Sampling budget per check");
  inspect->add_option("--workers", inspect_workers, "Concurrent workers");
  inspect->add_option("--out", inspect_out, "Write the JSON report here");

  // dump-env -----------------------------------------------------------
  auto* dump = app.add_subcommand("dump-env", "Build an environment and write its description");
  std::string dump_config;
  std::string dump_out;
  dump->add_option("--config", dump_config, "Environment description (JSON)")->required();
  dump->add_option("--out", dump_out, "Destination file")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    std::cerr << "running experiment from " << run_config << "\n";
    char* summary = nullptr;
    const smfg_status status = smfg_run_experiment(
        run_config.c_str(), run_out.empty() ? nullptr : run_out.c_str(), run_seed, run_workers,
        run_dump, &summary);
    if (status != SMFG_OK) return fail(status, "run");
    std::cout << summary << "\n";
    smfg_string_free(summary);
    return 0;
  }

  if (inspect->parsed()) {
    if (looks_like_policy(inspect_path)) {
      char* info = nullptr;
      const smfg_status status = smfg_policy_validate(inspect_path.c_str(), &info);
      if (status != SMFG_OK) return fail(status, "inspect");
      std::cout << info << "\n";
      smfg_string_free(info);
      return 0;
    }
    smfg_env* env = nullptr;
    smfg_status status = smfg_env_load(inspect_path.c_str(), &env);
    if (status != SMFG_OK) return fail(status, "inspect: load");
    char* report = nullptr;
    status = smfg_inspect(env, inspect_checks.c_str(), inspect_seed, inspect_budget,
                          inspect_workers, &report);
    if (status != SMFG_OK) {
      smfg_env_free(env);
      return fail(status, "inspect");
    }
    print_inspect_summary(report);
    if (!inspect_out.empty()) {
      std::ofstream out(inspect_out);
      out << report << "\n";
      std::cerr << "report written to " << inspect_out << "\n";
    }
    smfg_string_free(report);
    smfg_env_free(env);
    return 0;
  }

  if (dump->parsed()) {
    bool ok = false;
    const std::string text = read_file(dump_config, ok);
    if (!ok) {
      std::cerr << "error: cannot open " << dump_config << "\n";
      return 2;
    }
    smfg_env* env = nullptr;
    smfg_status status = smfg_env_build(text.c_str(), &env);
    if (status != SMFG_OK) return fail(status, "dump-env: build");
    status = smfg_env_dump(env, dump_out.c_str());
    if (status != SMFG_OK) {
      smfg_env_free(env);
      return fail(status, "dump-env: write");
    }
    char* info = nullptr;
    if (smfg_env_info(env, &info) == SMFG_OK) {
      std::cout << info << "\n";
      smfg_string_free(info);
    }
    smfg_env_free(env);
    std::cerr << "environment written to " << dump_out << "\n";
    return 0;
  }

  return 2;
}
