#pragma once

#include <memory>
#include <string>
#include <vector>

#include "symmfg/core.hpp"

namespace symmfg {

/// A benchmark environment: the N-player game plus its analytic mean-field
/// companion, with the canonical serialized description (config and all
/// per-agent parameter draws) for bit-identical reloads.
struct EnvironmentPair {
  std::shared_ptr<const DynamicGame> game;
  std::shared_ptr<const MeanFieldGame> companion;
  std::string kind;
  std::string description_json;
};

/// Crowd-cost coefficient spec for the rock-paper-scissors population game
/// (the per-agent penalty for crowded actions; zero unless configured).
struct CrowdCostSpec {
  enum class Kind { constant, uniform } kind = Kind::constant;
  double value = 0.0;  // constant
  double lo = 0.0, hi = 0.0;  // uniform
  double max_abs() const;
};

/// Population rock-paper-scissors with per-agent payoff perturbations.
/// Transitions are deterministic (next state = own action) and ignore the
/// population entirely.
struct ArpsConfig {
  std::size_t num_agents = 2000;
  std::size_t horizon = 10;
  double noise_scale = 0.1;  // per-agent payoff coefficients get +-uniform noise
  CrowdCostSpec crowd_cost;
  bool include_self = false;  // count yourself in the crowd marginals
  std::vector<double> rho0;   // empty: uniform over the three states
  std::uint64_t seed = 0;
};

EnvironmentPair make_arps(const ArpsConfig& cfg);

/// Susceptible/infected population with per-agent susceptibility, healing
/// rate, and isolation aversion. States {H, I}, actions {D, U}.
struct AsisConfig {
  std::size_t num_agents = 1000;
  std::size_t horizon = 20;
  double susceptibility_lo = 0.4, susceptibility_hi = 0.6;
  double healing_lo = 0.2, healing_hi = 0.4;
  double aversion_lo = 0.2, aversion_hi = 0.4;
  std::uint64_t seed = 0;
};

EnvironmentPair make_asis(const AsisConfig& cfg);

/// Congestion game: population-independent transitions, rewards driven by
/// each agent's own-cell occupancy through a non-increasing per-agent
/// curve. The companion interpolates the curves linearly in the occupancy
/// fraction.
struct CongestionConfig {
  std::size_t num_agents = 100;
  std::size_t horizon = 5;
  std::size_t n_states = 2;
  std::size_t n_actions = 2;
  double congestion_strength = 0.8;  // slope scale of the drawn curves
  double heterogeneity = 0.05;       // per-agent perturbation magnitude
  std::uint64_t seed = 0;
  // Explicit content overrides the draws (and is what dumps record):
  std::vector<double> transition;                // (S*A) rows of S entries
  std::vector<std::vector<double>> curves;       // per agent, (S*A)*(N+1)
  std::vector<std::vector<double>> base_rewards;  // per agent, S*A
};

EnvironmentPair make_congestion(const CongestionConfig& cfg);

/// Exactly symmetric control fixture: every agent runs the same kernels,
/// which are functions of the opponents' empirical distribution, so the
/// companion is the exact mean-field limit.
struct SymmetricTestConfig {
  std::size_t num_agents = 200;
  std::size_t horizon = 3;
  std::size_t n_states = 2;
  std::size_t n_actions = 2;
  double transition_coupling = 0.5;  // population pull on the next state
  double reward_coupling = 0.5;      // population term magnitude in rewards
  std::uint64_t seed = 0;
};

EnvironmentPair make_symmetric_test(const SymmetricTestConfig& cfg);

/// Builds any environment from its JSON description ({"type": ..., ...}).
/// Descriptions produced by the make_* functions reload bit-identically.
EnvironmentPair build_environment_from_json(const std::string& json_text);

EnvironmentPair load_environment(const std::string& path);
void dump_environment(const EnvironmentPair& env, const std::string& path);

}  // namespace symmfg
