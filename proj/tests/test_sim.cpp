#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "symmfg/envs.hpp"
#include "symmfg/mfg.hpp"
#include "symmfg/sim.hpp"

using namespace symmfg;
using testing::FunctionalGame;

namespace {

// Single-agent-factorized game: kernels ignore the opponents entirely.
FunctionalGame chain_game(std::size_t N, std::size_t H, std::vector<double> kernel,
                          std::vector<double> reward, std::size_t S, std::size_t A) {
  return FunctionalGame(
      N, H, S, A, std::vector<double>(S, 1.0 / static_cast<double>(S)),
      [S, A, kernel](std::size_t, std::size_t s, std::size_t a, const CountTable&,
                     std::span<double> out) {
        for (std::size_t sp = 0; sp < S; ++sp) out[sp] = kernel[(s * A + a) * S + sp];
      },
      [A, reward](std::size_t, std::size_t s, std::size_t a, const CountTable&) {
        return reward[s * A + a];
      },
      RewardBounds{0.0, 1.0});
}

}  // namespace

TEST_CASE("deterministic game and policies ignore the stream") {
  std::vector<double> kernel = {0, 1, 0, 1, 1, 0, 1, 0};  // 2 states x 2 actions -> swap
  std::vector<double> reward = {0.1, 0.2, 0.3, 0.4};
  auto game = FunctionalGame(
      3, 4, 2, 2, {1.0, 0.0},
      [kernel](std::size_t, std::size_t s, std::size_t a, const CountTable&,
               std::span<double> out) {
        out[0] = kernel[(s * 2 + a) * 2];
        out[1] = kernel[(s * 2 + a) * 2 + 1];
      },
      [reward](std::size_t, std::size_t s, std::size_t a, const CountTable&) {
        return reward[s * 2 + a];
      });
  Policy det(4, 2, 2);
  std::vector<double> row = {1.0, 0.0};
  for (std::size_t h = 0; h < 4; ++h)
    for (std::size_t s = 0; s < 2; ++s) det.set_row(h, s, row);
  auto profile = PolicyProfile::shared(det);
  auto t1 = sample_episode(game, profile, RngStream(1, 0));
  auto t2 = sample_episode(game, profile, RngStream(999, 123));
  CHECK(t1.states == t2.states);
  CHECK(t1.actions == t2.actions);
  CHECK(t1.rewards == t2.rewards);
}

TEST_CASE("same stream reproduces the trajectory bitwise") {
  SymmetricTestConfig cfg;
  cfg.num_agents = 20;
  cfg.horizon = 4;
  cfg.seed = 7;
  auto env = make_symmetric_test(cfg);
  auto profile = PolicyProfile::shared(Policy::uniform(4, 2, 2));
  auto t1 = sample_episode(*env.game, profile, RngStream(5, 17));
  auto t2 = sample_episode(*env.game, profile, RngStream(5, 17));
  CHECK(t1.states == t2.states);
  CHECK(t1.actions == t2.actions);
  CHECK(t1.rewards == t2.rewards);
  CHECK(t1.root_seed == 5);
  CHECK(t1.stream_id == 17);
}

TEST_CASE("instant healing empties the infected state after one step") {
  AsisConfig cfg;
  cfg.num_agents = 50;
  cfg.horizon = 6;
  cfg.healing_lo = cfg.healing_hi = 1.0;  // theta = 1: heal every step
  cfg.seed = 11;
  auto env = make_asis(cfg);
  // All-distancing policy: healthy agents are never exposed.
  Policy all_d(6, 2, 2);
  std::vector<double> d_row = {1.0, 0.0};
  for (std::size_t h = 0; h < 6; ++h)
    for (std::size_t s = 0; s < 2; ++s) all_d.set_row(h, s, d_row);
  auto traj = sample_episode(*env.game, PolicyProfile::shared(all_d), RngStream(2, 3));
  for (std::size_t h = 1; h < 6; ++h)
    for (std::size_t j = 0; j < 50; ++j) CHECK(traj.states[h][j] == 0);  // healthy
}

TEST_CASE("recorded profiles live on the N-denominator grid") {
  SymmetricTestConfig cfg;
  cfg.num_agents = 30;
  cfg.horizon = 3;
  cfg.seed = 1;
  auto env = make_symmetric_test(cfg);
  auto traj = sample_episode(*env.game, PolicyProfile::shared(Policy::uniform(3, 2, 2)),
                             RngStream(4, 0));
  for (std::size_t h = 0; h < 3; ++h) {
    CountTable counts = traj.profile(h, 2, 2);
    CHECK(counts.total() == 30);
    auto mu = PopulationDistribution::from_counts(counts);
    CHECK(mu.grid_denominator() == 30);
  }
}

TEST_CASE("estimate_return on constant and deterministic games") {
  const double c = 0.25;
  auto constant = FunctionalGame(
      4, 5, 2, 2, {0.5, 0.5},
      [](std::size_t, std::size_t s, std::size_t, const CountTable&, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[s] = 1.0;
      },
      [c](std::size_t, std::size_t, std::size_t, const CountTable&) { return c; });
  auto est = estimate_return(constant, PolicyProfile::shared(Policy::uniform(5, 2, 2)), 0, 200,
                             RngStream(3, 0));
  CHECK(est.mean == doctest::Approx(c * 5).epsilon(1e-12));
  CHECK(est.std_error == 0.0);
  CHECK(est.episodes == 200);
}

TEST_CASE("estimate_return matches the single-agent value oracle") {
  // Population-independent chain: the return is a plain MDP value.
  std::vector<double> kernel = {0.7, 0.3, 0.2, 0.8, 0.5, 0.5, 0.9, 0.1};
  std::vector<double> reward = {0.0, 1.0, 0.4, 0.6};
  const std::size_t H = 4;
  auto game = chain_game(6, H, kernel, reward, 2, 2);
  RngStream prng(5, 1);
  Policy pi(H, 2, 2);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t s = 0; s < 2; ++s) pi.set_row(h, s, random_simplex_point(2, prng));

  // Backward-induction oracle on the explicit chain.
  std::vector<double> v(2, 0.0);
  for (std::size_t h = H; h-- > 0;) {
    std::vector<double> nv(2, 0.0);
    for (std::size_t s = 0; s < 2; ++s) {
      double val = 0;
      for (std::size_t a = 0; a < 2; ++a) {
        double q = reward[s * 2 + a];
        if (h + 1 < H)
          for (std::size_t sp = 0; sp < 2; ++sp) q += kernel[(s * 2 + a) * 2 + sp] * v[sp];
        val += pi.at(h, s, a) * q;
      }
      nv[s] = val;
    }
    v = nv;
  }
  const double analytic = 0.5 * (v[0] + v[1]);

  auto est = estimate_return(game, PolicyProfile::shared(pi), 2, 10000, RngStream(6, 0), 2);
  CHECK(std::abs(est.mean - analytic) <= 3.0 * est.std_error);
}

TEST_CASE("estimate_return is independent of the worker count") {
  SymmetricTestConfig cfg;
  cfg.num_agents = 12;
  cfg.horizon = 3;
  cfg.seed = 9;
  auto env = make_symmetric_test(cfg);
  auto profile = PolicyProfile::shared(Policy::uniform(3, 2, 2));
  auto e1 = estimate_return(*env.game, profile, 0, 500, RngStream(7, 0), 1);
  auto e4 = estimate_return(*env.game, profile, 0, 500, RngStream(7, 0), 4);
  CHECK(e1.mean == e4.mean);
  CHECK(e1.std_error == e4.std_error);
}

TEST_CASE("paired arms cancel exactly under identical policies") {
  SymmetricTestConfig cfg;
  cfg.num_agents = 15;
  cfg.horizon = 4;
  cfg.seed = 2;
  auto env = make_symmetric_test(cfg);
  Policy pi = Policy::uniform(4, 2, 2);
  auto est = estimate_deviation_gain(*env.game, PolicyProfile::shared(pi), 0, pi, 300,
                                     RngStream(8, 0), 3);
  CHECK(est.mean == 0.0);
  CHECK(est.std_error == 0.0);
}

TEST_CASE("single-action games have zero exploitability estimate") {
  auto game = FunctionalGame(
      5, 3, 2, 1, {0.5, 0.5},
      [](std::size_t, std::size_t s, std::size_t, const CountTable&, std::span<double> out) {
        out[0] = 1.0 - 0.3 * (s == 0);
        out[1] = 1.0 - out[0];
      },
      [](std::size_t, std::size_t s, std::size_t, const CountTable&) { return s == 0 ? 1.0 : 0.0; });
  testing::FunctionalMfg mfg(
      3, 2, 1, {0.5, 0.5},
      [](std::size_t s, std::size_t, const PopulationDistribution&, std::span<double> out) {
        out[0] = 1.0 - 0.3 * (s == 0);
        out[1] = 1.0 - out[0];
      },
      [](std::size_t s, std::size_t, const PopulationDistribution&) { return s == 0 ? 1.0 : 0.0; });
  auto est = estimate_nplayer_exploitability(game, mfg, Policy::uniform(3, 2, 1), 100, 0.0,
                                             RngStream(9, 0));
  CHECK(est.mean == 0.0);
  CHECK(est.std_error == 0.0);
}

TEST_CASE("uniform play on the RPS population game is clearly exploitable") {
  ArpsConfig cfg;
  cfg.num_agents = 50;
  cfg.horizon = 5;
  cfg.noise_scale = 0.1;
  cfg.seed = 13;
  auto env = make_arps(cfg);
  Policy uniform = Policy::uniform(5, 3, 3);
  auto est = estimate_nplayer_exploitability(*env.game, *env.companion, uniform, 2000, 0.0,
                                             RngStream(10, 0), 2);
  CHECK(est.mean > 3.0 * est.std_error);
  CHECK(est.mean > 0.0);
}

TEST_CASE("empirical flows concentrate around the mean-field flow as N grows") {
  Policy pi = Policy::uniform(3, 2, 2);
  auto mean_gap = [&](std::size_t N) {
    SymmetricTestConfig cfg;
    cfg.num_agents = N;
    cfg.horizon = 3;
    cfg.seed = 31;
    auto env = make_symmetric_test(cfg);
    auto flow = induce_flow(*env.companion, pi);
    double total = 0.0;
    const std::size_t episodes = 200;
    for (std::size_t e = 0; e < episodes; ++e) {
      auto traj = sample_episode(*env.game, PolicyProfile::shared(pi),
                                 RngStream(11, 0).substream(e));
      double gap = 0.0;
      for (std::size_t h = 0; h < 3; ++h) {
        auto mu_hat = PopulationDistribution::from_counts(traj.profile(h, 2, 2));
        gap += l1_distance(mu_hat.weights(), flow.at(h).weights());
      }
      total += gap / 3.0;
    }
    return total / static_cast<double>(episodes);
  };
  const double g10 = mean_gap(10);
  const double g100 = mean_gap(100);
  CHECK(g100 < g10);
}
