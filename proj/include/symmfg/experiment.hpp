#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "symmfg/envs.hpp"

namespace symmfg {

/// Configuration problems (unparseable file, unknown key, bad value).
/// Callers map these to exit code 2; other failures exit 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> root_seed;
  std::optional<int> workers;
  std::optional<std::size_t> dump_trajectories;
};

struct RunResult {
  std::string output_dir;
  std::string summary_json;
};

/// Runs one experiment from a JSON config file. Writes into the output
/// directory: resolved_config.json (self-contained snapshot, including the
/// fully drawn environment), trace.tsv, the final policy artifact, and
/// summary.json. Optionally dumps evaluation trajectories.
RunResult run_experiment(const std::string& config_path, const RunOverrides& overrides = {});

/// Diagnostic report over a built environment. Known checks: alpha-beta,
/// monotonicity, kappa-sparsity, lipschitz. Returns a JSON object with one
/// entry per requested check.
std::string inspect_environment(const EnvironmentPair& env, const std::vector<std::string>& checks,
                                std::uint64_t seed, std::size_t budget, int workers);

/// Round-trips a policy or policy-profile file and reports its shape and
/// row diagnostics as JSON.
std::string validate_policy_file(const std::string& path);

}  // namespace symmfg
