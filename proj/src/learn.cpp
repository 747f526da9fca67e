#include "symmfg/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "symmfg/mfg.hpp"
#include "symmfg/sim.hpp"

namespace symmfg {

namespace {

// Stream children under the caller's root stream. Training episodes are
// numbered identically by both learners so that single-agent runs coincide.
constexpr std::uint64_t kTrainChild = 1;
constexpr std::uint64_t kPilotChild = 2;
constexpr std::uint64_t kEvalChild = 3;

struct RewardTransform {
  double shift = 0.0;
  double scale = 1.0;
  double operator()(double r) const { return (r - shift) * scale; }
};

RewardTransform reward_transform(const DynamicGame& game, bool normalize) {
  if (!normalize) return {};
  const RewardBounds b = game.reward_bounds();
  if (b.range() <= 0) throw std::invalid_argument("reward normalization: empty range");
  return {b.lo, 1.0 / b.range()};
}

std::vector<double> entropy_table(const Policy& pi) {
  std::vector<double> ent(pi.horizon() * pi.n_states());
  for (std::size_t h = 0; h < pi.horizon(); ++h)
    for (std::size_t s = 0; s < pi.n_states(); ++s)
      ent[h * pi.n_states() + s] = policy_entropy(pi.row(h, s));
  return ent;
}

// One TD sweep over a sampled episode in (step, agent) order; the terminal
// step carries no bootstrap term.
void apply_td_episode(const Trajectory& traj, const std::vector<double>& entropy_hs,
                      const RewardTransform& tx, double tau, double beta, std::size_t tracked,
                      bool clip, double qmax, QTable& q) {
  const std::size_t H = traj.horizon();
  const std::size_t S = q.n_states();
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t i = 0; i < tracked; ++i) {
      const std::uint32_t s = traj.states[h][i];
      const std::uint32_t a = traj.actions[h][i];
      double target = tx(traj.rewards[h][i]) + tau * entropy_hs[h * S + s];
      if (h + 1 < H) target += q.at(h + 1, traj.states[h + 1][i], traj.actions[h + 1][i]);
      double& cell = q.at(h, s, a);
      cell += beta * (target - cell);
      if (clip) cell = std::clamp(cell, 0.0, qmax);
    }
  }
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Mirror-descent row updates plus uniform mixing for a whole policy, using
// q_hat(s,a) = Q(s,a) - tau * entropy(pi(.|s)).
Policy pmd_step(const Policy& cur, const QTable& q_table, double eta, double tau, double mix_w) {
  const std::size_t H = cur.horizon();
  const std::size_t S = cur.n_states();
  const std::size_t A = cur.n_actions();
  Policy next(H, S, A);
  std::vector<double> qrow(A), mixed(A);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      const double ent = policy_entropy(cur.row(h, s));
      auto qr = q_table.row(h, s);
      for (std::size_t a = 0; a < A; ++a) qrow[a] = qr[a] - tau * ent;
      auto up = pmd_policy_update(cur.row(h, s), qrow, eta, tau);
      for (std::size_t a = 0; a < A; ++a)
        mixed[a] = (1.0 - mix_w) * up[a] + mix_w / static_cast<double>(A);
      next.set_row(h, s, mixed);
    }
  }
  return next;
}

Policy averaged_from_sums(std::size_t H, std::size_t S, std::size_t A,
                          const std::vector<double>& sums, std::size_t n) {
  Policy out(H, S, A);
  std::vector<double> row(A);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a)
        row[a] = sums[(h * S + s) * A + a] / static_cast<double>(n);
      out.set_row(h, s, row);
    }
  return out;
}

void add_policy(std::vector<double>& sums, const Policy& p) {
  auto raw = p.raw();
  for (std::size_t k = 0; k < raw.size(); ++k) sums[k] += raw[k];
}

}  // namespace

double td_learning_rate(std::size_t epoch, double delta) {
  const double u = 2.0 / delta;
  return u / (static_cast<double>(epoch) + u);
}

double calibrate_visitation_floor(const DynamicGame& game, const Policy& pi,
                                  std::size_t pilot_episodes, RngStream stream, int workers) {
  const std::size_t H = game.horizon();
  const std::size_t S = game.states().size;
  const std::size_t A = game.actions().size;
  const std::size_t N = game.num_agents();
  const PolicyProfile profile = PolicyProfile::shared(pi);

  std::vector<std::vector<std::uint64_t>> counts(
      std::max(pilot_episodes, std::size_t{1}), std::vector<std::uint64_t>(H * S * A, 0));
  parallel_for(pilot_episodes, workers, [&](std::size_t e) {
    Trajectory traj = sample_episode(game, profile, stream.substream(e));
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t j = 0; j < N; ++j)
        ++counts[e][(h * S + traj.states[h][j]) * A + traj.actions[h][j]];
  });

  std::vector<std::uint64_t> total(H * S * A, 0);
  for (const auto& c : counts)
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += c[k];

  const double denom = static_cast<double>(std::max(pilot_episodes, std::size_t{1})) *
                       static_cast<double>(N);
  double min_freq = 1.0;
  for (std::uint64_t c : total)
    if (c > 0) min_freq = std::min(min_freq, static_cast<double>(c) / denom);
  const double floor = 1.0 / (10.0 * static_cast<double>(S * A));
  return std::max(min_freq, floor);
}

QTable td_learn(const DynamicGame& game, const Policy& pi, const TdConfig& cfg,
                RngStream stream) {
  const std::size_t H = game.horizon();
  const std::size_t S = game.states().size;
  const std::size_t A = game.actions().size;
  if (pi.horizon() != H) throw std::invalid_argument("td_learn: policy horizon mismatch");
  if (cfg.delta && (*cfg.delta <= 0.0 || *cfg.delta > 1.0))
    throw std::invalid_argument("td_learn: delta must lie in (0, 1]");

  const double delta = cfg.delta ? *cfg.delta
                                 : calibrate_visitation_floor(game, pi, cfg.pilot_episodes,
                                                              stream.substream(kPilotChild),
                                                              cfg.workers);
  const RewardTransform tx = reward_transform(game, cfg.normalize_rewards);
  const auto entropy_hs = entropy_table(pi);
  const double qmax = q_value_cap(H, A);
  const std::size_t tracked = cfg.use_all_agents ? game.num_agents() : 1;
  const PolicyProfile profile = PolicyProfile::shared(pi);
  const RngStream train = stream.substream(kTrainChild);

  QTable q(H, S, A, cfg.tau);
  const std::size_t batch = std::max<std::size_t>(cfg.generation_batch, 1);
  std::vector<Trajectory> buffer(std::min(batch, std::max<std::size_t>(cfg.epochs, 1)));
  for (std::size_t start = 0; start < cfg.epochs; start += batch) {
    const std::size_t n = std::min(batch, cfg.epochs - start);
    parallel_for(n, cfg.workers, [&](std::size_t k) {
      buffer[k] = sample_episode(game, profile, train.substream(start + k));
    });
    for (std::size_t k = 0; k < n; ++k)
      apply_td_episode(buffer[k], entropy_hs, tx, cfg.tau, td_learning_rate(start + k, delta),
                       tracked, cfg.clip_qmax, qmax, q);
  }
  return q;
}

std::vector<double> pmd_policy_update(std::span<const double> pi_row,
                                      std::span<const double> q_row, double eta, double tau) {
  if (pi_row.size() != q_row.size()) throw std::invalid_argument("pmd update: length mismatch");
  if (tau * eta >= 1.0) throw std::invalid_argument("pmd update: tau * eta must be below 1");
  const double keep = 1.0 - tau * eta;
  std::vector<double> log_unnorm(pi_row.size());
  for (std::size_t a = 0; a < pi_row.size(); ++a) {
    if (pi_row[a] <= 0.0) throw std::domain_error("support collapsed");
    log_unnorm[a] = keep * std::log(pi_row[a]) + eta * q_row[a];
  }
  const double m = *std::max_element(log_unnorm.begin(), log_unnorm.end());
  double z = 0.0;
  for (double& x : log_unnorm) {
    x = std::exp(x - m);
    z += x;
  }
  for (double& x : log_unnorm) x /= z;
  return log_unnorm;
}

SymmPmdResult symm_pmd(const DynamicGame& game, std::shared_ptr<const MeanFieldGame> companion,
                       const PmdConfig& cfg, RngStream stream) {
  const std::size_t H = game.horizon();
  const std::size_t S = game.states().size;
  const std::size_t A = game.actions().size;
  const std::size_t T = cfg.epochs;

  auto lr = cfg.lr_schedule
                ? cfg.lr_schedule
                : [](std::size_t t) { return 1.0 / std::sqrt(static_cast<double>(t + 1)); };
  const std::size_t mfg_every = cfg.mfg_eval_every ? cfg.mfg_eval_every
                                                   : std::max<std::size_t>(1, T / 50);
  const double metric_scale = cfg.normalize_rewards ? 1.0 / game.reward_bounds().range() : 1.0;
  std::shared_ptr<const MeanFieldGame> metric_mfg = companion;
  if (companion && cfg.normalize_rewards)
    metric_mfg = std::shared_ptr<const MeanFieldGame>(normalize_rewards(companion));

  WallClock clock;
  SymmPmdResult result;
  result.tau_outside_convergence_range = !(cfg.tau > 0.0 && cfg.tau < 0.5);

  std::uint64_t samples = 0;
  TdConfig td = cfg.td;
  td.tau = cfg.tau;
  td.normalize_rewards = cfg.normalize_rewards;
  if (!td.delta) {
    // The visitation floor is calibrated once, under the uniform initial
    // policy, and pinned for every epoch.
    td.delta = calibrate_visitation_floor(
        game, Policy::uniform(H, S, A), td.pilot_episodes,
        stream.substream(kTrainChild).substream(0).substream(kPilotChild), td.workers);
    samples += td.pilot_episodes;
  }

  Policy cur = Policy::uniform(H, S, A);
  std::vector<double> sums(cur.raw().begin(), cur.raw().end());

  auto emit_metrics = [&](std::size_t epoch, const Policy& avg, bool with_nplayer) {
    MetricRow row;
    row.epoch = epoch;
    row.samples_consumed = samples;
    if (metric_mfg) row.mfg_exploitability = mfg_exploitability(*metric_mfg, avg, 0.0).value;
    if (with_nplayer && companion && cfg.nplayer_eval_episodes > 0) {
      ReturnEstimate est = estimate_nplayer_exploitability(
          game, *companion, avg, cfg.nplayer_eval_episodes, 0.0,
          stream.substream(kEvalChild).substream(epoch), cfg.td.workers);
      row.nplayer_exploitability_mean = est.mean * metric_scale;
      row.nplayer_exploitability_stderr = est.std_error * metric_scale;
    }
    row.wall_time_s = clock.seconds();
    result.trace.rows.push_back(row);
  };

  for (std::size_t t = 0; t < T; ++t) {
    if (cfg.tau * lr(t) >= 1.0)
      throw std::invalid_argument("symm_pmd: tau * eta must stay below 1");
    QTable q = td_learn(game, cur, td, stream.substream(kTrainChild).substream(t));
    samples += td.epochs;

    const double mix_w = cfg.mixing_schedule
                             ? cfg.mixing_schedule(t)
                             : 1.0 / static_cast<double>(t + 1 + (cfg.mixing_offset ? 1 : 0));
    cur = pmd_step(cur, q, lr(t), cfg.tau, mix_w);
    add_policy(sums, cur);

    const bool mfg_now = ((t + 1) % mfg_every == 0) || (t + 1 == T);
    const bool npl_now = cfg.nplayer_eval_every
                             ? ((t + 1) % cfg.nplayer_eval_every == 0 || t + 1 == T)
                             : (t + 1 == T);
    if (mfg_now || npl_now)
      emit_metrics(t + 1, averaged_from_sums(H, S, A, sums, t + 2), npl_now);
  }

  result.averaged = averaged_from_sums(H, S, A, sums, T + 1);
  result.final_iterate = std::move(cur);
  if (T == 0)
    emit_metrics(0, result.averaged, companion != nullptr && cfg.nplayer_eval_episodes > 0);
  return result;
}

IpmdResult ipmd(const DynamicGame& game, std::shared_ptr<const MeanFieldGame> companion,
                const PmdConfig& cfg, RngStream stream) {
  const std::size_t H = game.horizon();
  const std::size_t S = game.states().size;
  const std::size_t A = game.actions().size;
  const std::size_t N = game.num_agents();
  const std::size_t T = cfg.epochs;

  auto lr = cfg.lr_schedule
                ? cfg.lr_schedule
                : [](std::size_t t) { return 1.0 / std::sqrt(static_cast<double>(t + 1)); };
  const std::size_t mfg_every = cfg.mfg_eval_every ? cfg.mfg_eval_every
                                                   : std::max<std::size_t>(1, T / 50);
  const double metric_scale = cfg.normalize_rewards ? 1.0 / game.reward_bounds().range() : 1.0;
  std::shared_ptr<const MeanFieldGame> metric_mfg = companion;
  if (companion && cfg.normalize_rewards)
    metric_mfg = std::shared_ptr<const MeanFieldGame>(normalize_rewards(companion));

  const RewardTransform tx = reward_transform(game, cfg.normalize_rewards);
  const double qmax = q_value_cap(H, A);

  WallClock clock;
  IpmdResult result;
  std::uint64_t samples = 0;

  double delta;
  if (cfg.td.delta) {
    delta = *cfg.td.delta;
  } else {
    delta = calibrate_visitation_floor(
        game, Policy::uniform(H, S, A), cfg.td.pilot_episodes,
        stream.substream(kTrainChild).substream(0).substream(kPilotChild), cfg.td.workers);
    samples += cfg.td.pilot_episodes;
  }

  std::vector<Policy> current(N, Policy::uniform(H, S, A));
  std::vector<std::vector<double>> sums(N);
  for (std::size_t i = 0; i < N; ++i)
    sums[i].assign(current[i].raw().begin(), current[i].raw().end());

  auto averaged_profile = [&](std::size_t divisor) {
    std::vector<Policy> avg;
    avg.reserve(N);
    for (std::size_t i = 0; i < N; ++i)
      avg.push_back(averaged_from_sums(H, S, A, sums[i], divisor));
    return avg;
  };

  auto emit_metrics = [&](std::size_t epoch, std::size_t divisor, bool with_nplayer) {
    MetricRow row;
    row.epoch = epoch;
    row.samples_consumed = samples;
    std::vector<Policy> avg = averaged_profile(divisor);
    Policy mean_policy = average_policies(avg);
    if (metric_mfg)
      row.mfg_exploitability = mfg_exploitability(*metric_mfg, mean_policy, 0.0).value;
    if (with_nplayer && companion && cfg.nplayer_eval_episodes > 0) {
      // Deviation certificate for agent 0: best response to the mean-field
      // flow of the population's average policy.
      const PopulationFlow flow = induce_flow(*companion, mean_policy);
      BestResponseResult br = best_response(*companion, flow, 0.0);
      ReturnEstimate est = estimate_deviation_gain(
          game, PolicyProfile::per_agent(avg), 0, br.policy, cfg.nplayer_eval_episodes,
          stream.substream(kEvalChild).substream(epoch), cfg.td.workers);
      row.nplayer_exploitability_mean = est.mean * metric_scale;
      row.nplayer_exploitability_stderr = est.std_error * metric_scale;
    }
    row.wall_time_s = clock.seconds();
    result.trace.rows.push_back(row);
  };

  const std::size_t batch = std::max<std::size_t>(cfg.td.generation_batch, 1);
  std::vector<Trajectory> buffer(std::min(batch, std::max<std::size_t>(cfg.td.epochs, 1)));
  std::vector<QTable> q(N, QTable(H, S, A, cfg.tau));
  std::vector<std::vector<double>> entropy_hs(N);

  for (std::size_t t = 0; t < T; ++t) {
    if (cfg.tau * lr(t) >= 1.0)
      throw std::invalid_argument("ipmd: tau * eta must stay below 1");
    const PolicyProfile profile = PolicyProfile::per_agent(current);
    for (std::size_t i = 0; i < N; ++i) {
      q[i] = QTable(H, S, A, cfg.tau);
      entropy_hs[i] = entropy_table(current[i]);
    }
    const RngStream train = stream.substream(kTrainChild).substream(t).substream(kTrainChild);
    for (std::size_t start = 0; start < cfg.td.epochs; start += batch) {
      const std::size_t n = std::min(batch, cfg.td.epochs - start);
      parallel_for(n, cfg.td.workers, [&](std::size_t k) {
        buffer[k] = sample_episode(game, profile, train.substream(start + k));
      });
      // Each agent follows its own trajectory with its own table; updates
      // run in (episode, step, agent) order.
      for (std::size_t k = 0; k < n; ++k) {
        const double beta = td_learning_rate(start + k, delta);
        const Trajectory& traj = buffer[k];
        for (std::size_t h = 0; h < H; ++h) {
          for (std::size_t i = 0; i < N; ++i) {
            const std::uint32_t s = traj.states[h][i];
            const std::uint32_t a = traj.actions[h][i];
            double target = tx(traj.rewards[h][i]) + cfg.tau * entropy_hs[i][h * S + s];
            if (h + 1 < H)
              target += q[i].at(h + 1, traj.states[h + 1][i], traj.actions[h + 1][i]);
            double& cell = q[i].at(h, s, a);
            cell += beta * (target - cell);
            if (cfg.td.clip_qmax) cell = std::clamp(cell, 0.0, qmax);
          }
        }
      }
    }
    samples += cfg.td.epochs;

    const double mix_w = cfg.mixing_schedule
                             ? cfg.mixing_schedule(t)
                             : 1.0 / static_cast<double>(t + 1 + (cfg.mixing_offset ? 1 : 0));
    for (std::size_t i = 0; i < N; ++i) {
      current[i] = pmd_step(current[i], q[i], lr(t), cfg.tau, mix_w);
      add_policy(sums[i], current[i]);
    }

    const bool mfg_now = ((t + 1) % mfg_every == 0) || (t + 1 == T);
    const bool npl_now = cfg.nplayer_eval_every
                             ? ((t + 1) % cfg.nplayer_eval_every == 0 || t + 1 == T)
                             : (t + 1 == T);
    if (mfg_now || npl_now) emit_metrics(t + 1, t + 2, npl_now);
  }

  result.policies = averaged_profile(T + 1);
  if (T == 0) emit_metrics(0, 1, companion != nullptr && cfg.nplayer_eval_episodes > 0);
  return result;
}

}  // namespace symmfg
