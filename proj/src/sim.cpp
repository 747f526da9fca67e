#include "symmfg/sim.hpp"

#include <cmath>

#include "symmfg/mfg.hpp"

namespace symmfg {

PolicyProfile PolicyProfile::shared(Policy p) {
  PolicyProfile out;
  out.shared_ = true;
  out.policies_.push_back(std::move(p));
  return out;
}

PolicyProfile PolicyProfile::per_agent(std::vector<Policy> ps) {
  if (ps.empty()) throw std::invalid_argument("policy profile: no policies");
  PolicyProfile out;
  out.shared_ = false;
  out.policies_ = std::move(ps);
  return out;
}

PolicyProfile PolicyProfile::shared_with_deviator(Policy base, std::size_t agent,
                                                  Policy deviator) {
  PolicyProfile out;
  out.shared_ = true;
  out.policies_.push_back(std::move(base));
  out.overrides_.emplace_back(agent, std::move(deviator));
  return out;
}

const Policy& PolicyProfile::for_agent(std::size_t i) const {
  for (const auto& [agent, policy] : overrides_)
    if (agent == i) return policy;
  return shared_ ? policies_[0] : policies_.at(i);
}

std::size_t PolicyProfile::horizon() const { return policies_[0].horizon(); }

CountTable Trajectory::profile(std::size_t h, std::size_t n_states, std::size_t n_actions) const {
  CountTable counts(n_states, n_actions);
  for (std::size_t j = 0; j < states[h].size(); ++j) ++counts.at(states[h][j], actions[h][j]);
  return counts;
}

double Trajectory::agent_return(std::size_t agent) const {
  double total = 0.0;
  for (const auto& step : rewards) total += step[agent];
  return total;
}

Trajectory sample_episode(const DynamicGame& game, const PolicyProfile& policies,
                          const RngStream& episode_stream) {
  const std::size_t N = game.num_agents();
  const std::size_t H = game.horizon();
  const std::size_t S = game.states().size;
  const std::size_t A = game.actions().size;
  if (policies.horizon() != H) throw std::invalid_argument("sample_episode: horizon mismatch");

  Trajectory traj;
  traj.root_seed = episode_stream.root_seed();
  traj.stream_id = episode_stream.stream_id();
  traj.states.assign(H, std::vector<std::uint32_t>(N));
  traj.actions.assign(H, std::vector<std::uint32_t>(N));
  traj.rewards.assign(H, std::vector<double>(N));

  std::vector<RngStream> agent_rng;
  agent_rng.reserve(N);
  for (std::size_t j = 0; j < N; ++j) agent_rng.push_back(episode_stream.substream(j));

  std::vector<std::uint32_t> cur(N);
  auto rho0 = game.initial_state_dist();
  for (std::size_t j = 0; j < N; ++j)
    cur[j] = static_cast<std::uint32_t>(agent_rng[j].sample(rho0));

  CountTable occupancy(S, A);
  std::vector<double> dist(S);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t j = 0; j < N; ++j) {
      traj.states[h][j] = cur[j];
      traj.actions[h][j] = static_cast<std::uint32_t>(
          agent_rng[j].sample(policies.for_agent(j).row(h, cur[j])));
    }
    for (std::size_t c = 0; c < occupancy.n_cells(); ++c) occupancy[c] = 0;
    for (std::size_t j = 0; j < N; ++j) ++occupancy.at(traj.states[h][j], traj.actions[h][j]);

    // Rewards, then transitions, each against the other N-1 agents.
    for (std::size_t j = 0; j < N; ++j) {
      --occupancy.at(traj.states[h][j], traj.actions[h][j]);
      traj.rewards[h][j] = game.reward(j, traj.states[h][j], traj.actions[h][j], occupancy);
      ++occupancy.at(traj.states[h][j], traj.actions[h][j]);
    }
    for (std::size_t j = 0; j < N; ++j) {
      --occupancy.at(traj.states[h][j], traj.actions[h][j]);
      game.transition(j, traj.states[h][j], traj.actions[h][j], occupancy, dist);
      ++occupancy.at(traj.states[h][j], traj.actions[h][j]);
      cur[j] = static_cast<std::uint32_t>(agent_rng[j].sample(dist));
    }
  }
  return traj;
}

namespace {

ReturnEstimate summarize(std::span<const double> values) {
  ReturnEstimate est;
  est.episodes = values.size();
  if (values.empty()) return est;
  est.mean = pairwise_sum(values) / static_cast<double>(values.size());
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      sq[i] = (values[i] - est.mean) * (values[i] - est.mean);
    const double var = pairwise_sum(sq) / static_cast<double>(values.size() - 1);
    est.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(values.size()));
  }
  return est;
}

}  // namespace

ReturnEstimate estimate_return(const DynamicGame& game, const PolicyProfile& policies,
                               std::size_t agent_index, std::size_t episodes,
                               const RngStream& stream, int workers) {
  if (episodes == 0) throw std::invalid_argument("estimate_return: need at least one episode");
  std::vector<double> returns(episodes);
  parallel_for(episodes, workers, [&](std::size_t e) {
    Trajectory traj = sample_episode(game, policies, stream.substream(e));
    returns[e] = traj.agent_return(agent_index);
  });
  return summarize(returns);
}

ReturnEstimate estimate_deviation_gain(const DynamicGame& game, const PolicyProfile& baseline,
                                       std::size_t deviator_agent, const Policy& deviator_policy,
                                       std::size_t episodes, const RngStream& stream,
                                       int workers) {
  if (episodes == 0) throw std::invalid_argument("estimate_deviation_gain: need episodes");
  std::vector<Policy> per_agent;
  const std::size_t N = game.num_agents();
  per_agent.reserve(N);
  for (std::size_t j = 0; j < N; ++j) per_agent.push_back(baseline.for_agent(j));
  per_agent[deviator_agent] = deviator_policy;
  PolicyProfile deviated = PolicyProfile::per_agent(std::move(per_agent));

  std::vector<double> diffs(episodes);
  parallel_for(episodes, workers, [&](std::size_t e) {
    const RngStream episode_stream = stream.substream(e);
    Trajectory base = sample_episode(game, baseline, episode_stream);
    Trajectory dev = sample_episode(game, deviated, episode_stream);
    diffs[e] = dev.agent_return(deviator_agent) - base.agent_return(deviator_agent);
  });
  return summarize(diffs);
}

ReturnEstimate estimate_nplayer_exploitability(const DynamicGame& game, const MeanFieldGame& mfg,
                                               const Policy& pi, std::size_t episodes, double tau,
                                               const RngStream& stream, int workers) {
  const PopulationFlow flow = induce_flow(mfg, pi);
  BestResponseResult br = best_response(mfg, flow, tau);
  return estimate_deviation_gain(game, PolicyProfile::shared(pi), 0, br.policy, episodes, stream,
                                 workers);
}

}  // namespace symmfg
