#pragma once

#include <vector>

#include "symmfg/core.hpp"

namespace symmfg {

/// Either one policy shared by all agents or one policy per agent.
class PolicyProfile {
 public:
  static PolicyProfile shared(Policy p);
  static PolicyProfile per_agent(std::vector<Policy> ps);
  /// Shared profile with one agent's policy replaced.
  static PolicyProfile shared_with_deviator(Policy base, std::size_t agent, Policy deviator);

  bool is_shared() const { return shared_ && overrides_.empty(); }
  const Policy& for_agent(std::size_t i) const;
  std::size_t horizon() const;

 private:
  PolicyProfile() = default;
  bool shared_ = true;
  std::vector<Policy> policies_;                          // [0] when shared
  std::vector<std::pair<std::size_t, Policy>> overrides_;  // sparse deviators
};

/// One sampled joint episode. Replaying with the recorded
/// (root_seed, stream_id) reproduces it bitwise: agent j consumes only the
/// substream `episode_stream.substream(j)`, drawing its initial state, then
/// one action and one transition per step, in that fixed order.
struct Trajectory {
  std::uint64_t root_seed = 0;
  std::uint64_t stream_id = 0;
  std::vector<std::vector<std::uint32_t>> states;   // [h][agent]
  std::vector<std::vector<std::uint32_t>> actions;  // [h][agent]
  std::vector<std::vector<double>> rewards;         // [h][agent], raw scale

  std::size_t horizon() const { return states.size(); }
  std::size_t num_agents() const { return states.empty() ? 0 : states[0].size(); }
  /// Full N-agent occupancy at step h.
  CountTable profile(std::size_t h, std::size_t n_states, std::size_t n_actions) const;
  /// Total raw reward collected by one agent.
  double agent_return(std::size_t agent) const;
};

/// Advances all agents synchronously for H steps; rewards are recorded
/// before the transition. Deterministic given the episode stream.
Trajectory sample_episode(const DynamicGame& game, const PolicyProfile& policies,
                          const RngStream& episode_stream);

struct ReturnEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t episodes = 0;
};

/// Monte-Carlo estimate of one agent's expected total raw reward over
/// independent episodes (episode e uses stream.substream(e)).
ReturnEstimate estimate_return(const DynamicGame& game, const PolicyProfile& policies,
                               std::size_t agent_index, std::size_t episodes,
                               const RngStream& stream, int workers = 1);

/// Paired-arm estimate of the gain agent `deviator_agent` gets by switching
/// from the baseline profile to `deviator_policy`. Both arms of episode e
/// replay the same episode stream, so all shared randomness is common: with
/// an identical deviator policy the difference is exactly zero.
ReturnEstimate estimate_deviation_gain(const DynamicGame& game, const PolicyProfile& baseline,
                                       std::size_t deviator_agent, const Policy& deviator_policy,
                                       std::size_t episodes, const RngStream& stream,
                                       int workers = 1);

/// Lower-bound certificate of N-player exploitability for a shared policy:
/// the deviation is the best response to the mean-field flow of `pi` in the
/// companion game (tau = 0 by default), measured by paired simulation in
/// the real N-player game. Raw reward scale.
ReturnEstimate estimate_nplayer_exploitability(const DynamicGame& game, const MeanFieldGame& mfg,
                                               const Policy& pi, std::size_t episodes,
                                               double tau, const RngStream& stream,
                                               int workers = 1);

}  // namespace symmfg
