#include "symmfg/symmfg.h"

#include <cstring>
#include <sstream>
#include <string>

#include <json.hpp>

#include "symmfg/envs.hpp"
#include "symmfg/experiment.hpp"

namespace {

thread_local std::string g_last_error;

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Exceptions become status codes at the boundary; ConfigError and bad
// arguments map to the config/usage code.
template <typename Fn>
smfg_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const symmfg::ConfigError& e) {
    g_last_error = e.what();
    return SMFG_ERR_CONFIG;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return SMFG_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SMFG_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown failure";
    return SMFG_ERR_RUNTIME;
  }
}

}  // namespace

struct smfg_env {
  symmfg::EnvironmentPair pair;
};

extern "C" {

const char* smfg_version(void) { return "0.1.0"; }

const char* smfg_last_error(void) { return g_last_error.c_str(); }

void smfg_string_free(char* s) { delete[] s; }

smfg_status smfg_env_build(const char* json_text, smfg_env** out) {
  return guarded([&]() -> smfg_status {
    if (json_text == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    auto env = new smfg_env{symmfg::build_environment_from_json(json_text)};
    *out = env;
    return SMFG_OK;
  });
}

smfg_status smfg_env_load(const char* path, smfg_env** out) {
  return guarded([&]() -> smfg_status {
    if (path == nullptr || out == nullptr) throw std::invalid_argument("null argument");
    auto env = new smfg_env{symmfg::load_environment(path)};
    *out = env;
    return SMFG_OK;
  });
}

smfg_status smfg_env_dump(const smfg_env* env, const char* path) {
  return guarded([&]() -> smfg_status {
    if (env == nullptr || path == nullptr) throw std::invalid_argument("null argument");
    symmfg::dump_environment(env->pair, path);
    return SMFG_OK;
  });
}

smfg_status smfg_env_info(const smfg_env* env, char** json_out) {
  return guarded([&]() -> smfg_status {
    if (env == nullptr || json_out == nullptr) throw std::invalid_argument("null argument");
    nlohmann::json info = {{"type", env->pair.kind},
                           {"num_agents", env->pair.game->num_agents()},
                           {"horizon", env->pair.game->horizon()},
                           {"states", env->pair.game->states().size},
                           {"actions", env->pair.game->actions().size},
                           {"reward_lo", env->pair.game->reward_bounds().lo},
                           {"reward_hi", env->pair.game->reward_bounds().hi}};
    *json_out = copy_string(info.dump(2));
    return SMFG_OK;
  });
}

void smfg_env_free(smfg_env* env) { delete env; }

smfg_status smfg_run_experiment(const char* config_path, const char* output_dir_or_null,
                                int64_t root_seed_or_negative, int workers_or_zero,
                                int64_t dump_trajectories_or_negative, char** summary_json_out) {
  return guarded([&]() -> smfg_status {
    if (config_path == nullptr) throw std::invalid_argument("null config path");
    symmfg::RunOverrides overrides;
    if (output_dir_or_null != nullptr) overrides.output_dir = output_dir_or_null;
    if (root_seed_or_negative >= 0)
      overrides.root_seed = static_cast<std::uint64_t>(root_seed_or_negative);
    if (workers_or_zero > 0) overrides.workers = workers_or_zero;
    if (dump_trajectories_or_negative >= 0)
      overrides.dump_trajectories = static_cast<std::size_t>(dump_trajectories_or_negative);
    symmfg::RunResult result = symmfg::run_experiment(config_path, overrides);
    if (summary_json_out != nullptr) *summary_json_out = copy_string(result.summary_json);
    return SMFG_OK;
  });
}

smfg_status smfg_inspect(const smfg_env* env, const char* checks_csv, uint64_t seed,
                         int64_t budget_or_negative, int workers_or_zero,
                         char** report_json_out) {
  return guarded([&]() -> smfg_status {
    if (env == nullptr || checks_csv == nullptr || report_json_out == nullptr)
      throw std::invalid_argument("null argument");
    std::vector<std::string> checks;
    std::istringstream in(checks_csv);
    std::string item;
    while (std::getline(in, item, ','))
      if (!item.empty()) checks.push_back(item);
    if (checks.empty()) throw std::invalid_argument("no checks requested");
    const std::size_t budget =
        budget_or_negative > 0 ? static_cast<std::size_t>(budget_or_negative) : 2000;
    const int workers = workers_or_zero > 0 ? workers_or_zero : 1;
    *report_json_out =
        copy_string(symmfg::inspect_environment(env->pair, checks, seed, budget, workers));
    return SMFG_OK;
  });
}

smfg_status smfg_policy_validate(const char* path, char** info_json_out) {
  return guarded([&]() -> smfg_status {
    if (path == nullptr || info_json_out == nullptr)
      throw std::invalid_argument("null argument");
    *info_json_out = copy_string(symmfg::validate_policy_file(path));
    return SMFG_OK;
  });
}

}  // extern "C"
