#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "symmfg/core.hpp"

namespace symmfg {

/// Temporal-difference evaluation settings. The learning rate schedule is
/// beta_m = (2/delta) / (m + 2/delta); when `delta` is unset it is
/// calibrated from a pilot run as the smallest positive visitation
/// frequency, floored at 1/(10 |S| |A|).
struct TdConfig {
  std::size_t epochs = 1000;  // M: one sampled episode per epoch
  double tau = 0.0;
  std::optional<double> delta;
  bool use_all_agents = true;  // sweep every agent's visited cell per step
  bool clip_qmax = true;       // keep values in [0, H(1+log|A|)]
  bool normalize_rewards = true;
  std::size_t pilot_episodes = 200;
  int workers = 1;
  std::size_t generation_batch = 256;
};

/// On-policy TD evaluation from N-player trajectories: per episode, walk the
/// tracked agents' visited cells and move each Q entry toward
/// bootstrap + reward + tau * entropy. Updates are applied in (episode,
/// step, agent) order, so results do not depend on worker count.
QTable td_learn(const DynamicGame& game, const Policy& pi, const TdConfig& cfg, RngStream stream);

/// The schedule behind td_learn: beta_m = (2/delta) / (m + 2/delta).
double td_learning_rate(std::size_t epoch, double delta);

/// Calibrated learning-rate floor used when TdConfig::delta is unset:
/// smallest positive visitation frequency over a pilot run, floored at
/// 1/(10 |S| |A|).
double calibrate_visitation_floor(const DynamicGame& game, const Policy& pi,
                                  std::size_t pilot_episodes, RngStream stream, int workers = 1);

/// Closed-form mirror-descent step on one action distribution:
/// out(a) proportional to pi(a)^(1 - tau eta) * exp(eta q(a)), computed in
/// the log domain. Requires tau * eta < 1 and a strictly positive pi row.
std::vector<double> pmd_policy_update(std::span<const double> pi_row,
                                      std::span<const double> q_row, double eta, double tau);

struct PmdConfig {
  std::size_t epochs = 100;  // T
  TdConfig td;
  double tau = 0.1;  // entropy regularization, theorem range (0, 1/2)
  std::function<double(std::size_t)> lr_schedule;      // default 1/sqrt(t+1)
  std::function<double(std::size_t)> mixing_schedule;  // default 1/(t+1)
  bool mixing_offset = false;                          // use 1/(t+2) instead
  bool normalize_rewards = true;
  /// Exploitability cadence; 0 means max(1, T/50).
  std::size_t mfg_eval_every = 0;
  /// Sampled N-player exploitability cadence; 0 disables except the final
  /// epoch when eval episodes are positive.
  std::size_t nplayer_eval_every = 0;
  std::size_t nplayer_eval_episodes = 2000;
};

/// One metric row per evaluation epoch. Exploitability values are reported
/// on the scale learning runs on (normalized when normalize_rewards is on);
/// unevaluated fields are NaN.
struct MetricRow {
  std::size_t epoch = 0;
  std::uint64_t samples_consumed = 0;  // training episodes incl. pilot
  double mfg_exploitability = std::numeric_limits<double>::quiet_NaN();
  double nplayer_exploitability_mean = std::numeric_limits<double>::quiet_NaN();
  double nplayer_exploitability_stderr = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
};

struct MetricTrace {
  std::vector<MetricRow> rows;
};

struct SymmPmdResult {
  Policy averaged;       // (1/(T+1)) sum of iterates
  Policy final_iterate;  // pi_T
  MetricTrace trace;
  bool tau_outside_convergence_range = false;
};

/// Mirror descent on a single shared policy with TD-estimated values:
/// per epoch, evaluate the current policy with td_learn, subtract the
/// entropy bonus, apply pmd_policy_update per (step, state), then mix with
/// uniform at weight 1/(t+1). The companion game, when given, is used for
/// exploitability metrics only.
SymmPmdResult symm_pmd(const DynamicGame& game, std::shared_ptr<const MeanFieldGame> companion,
                       const PmdConfig& cfg, RngStream stream);

struct IpmdResult {
  std::vector<Policy> policies;  // per-agent averaged policies
  MetricTrace trace;
};

/// Independent-learner baseline: one policy, Q table, and mirror-descent
/// state per agent, trained from the same joint episodes under identical
/// schedules, so total sample budgets match symm_pmd.
IpmdResult ipmd(const DynamicGame& game, std::shared_ptr<const MeanFieldGame> companion,
                const PmdConfig& cfg, RngStream stream);

}  // namespace symmfg
