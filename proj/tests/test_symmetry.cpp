#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "symmfg/envs.hpp"
#include "symmfg/mfg.hpp"
#include "symmfg/symmetry.hpp"

using namespace symmfg;

namespace {

TupleFunction random_tuple_function(std::size_t arity, std::size_t dim, std::size_t n_states,
                                    std::size_t n_actions, RngStream& rng) {
  // Integer-coefficient polynomial in the cell indices; asymmetric by
  // position so symmetrization has real work to do.
  std::vector<double> coeff(arity * dim);
  for (double& c : coeff) c = static_cast<double>(rng.uniform_index(7));
  TupleFunction f;
  f.arity = arity;
  f.output_dim = dim;
  f.fn = [arity, dim, n_actions, coeff](std::span<const StateAction> x) {
    std::vector<double> out(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t i = 0; i < arity; ++i) {
        const double cell = static_cast<double>(x[i].state * n_actions + x[i].action);
        out[j] += coeff[j * arity + i] * (cell + 1.0) * static_cast<double>(i + 1);
      }
    return out;
  };
  return f;
}

std::vector<StateAction> random_tuple(std::size_t arity, std::size_t n_states,
                                      std::size_t n_actions, RngStream& rng) {
  std::vector<StateAction> x(arity);
  for (auto& sa : x)
    sa = {static_cast<std::uint32_t>(rng.uniform_index(n_states)),
          static_cast<std::uint32_t>(rng.uniform_index(n_actions))};
  return x;
}

// Independent enumeration oracle: average f over all permutations, walking
// index permutations explicitly.
std::vector<double> oracle_symmetrize(const TupleFunction& f, std::span<const StateAction> x) {
  std::vector<std::size_t> idx(f.arity);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> acc(f.output_dim, 0.0);
  std::size_t count = 0;
  std::vector<StateAction> perm(f.arity);
  do {
    for (std::size_t i = 0; i < f.arity; ++i) perm[i] = x[idx[i]];
    auto v = f(perm);
    for (std::size_t j = 0; j < f.output_dim; ++j) acc[j] += v[j];
    ++count;
  } while (std::next_permutation(idx.begin(), idx.end()));
  for (double& a : acc) a /= static_cast<double>(count);
  return acc;
}

}  // namespace

TEST_CASE("symmetrization: passthrough, pair average, oracle agreement") {
  // A symmetric function passes through bitwise.
  TupleFunction sym;
  sym.arity = 3;
  sym.output_dim = 1;
  sym.fn = [](std::span<const StateAction> x) {
    double total = 0;
    for (const auto& sa : x) total += sa.state * 2.0 + sa.action;
    return std::vector<double>{total};
  };
  auto sym_g = symmetrize_bruteforce(sym);
  RngStream rng(21, 0);
  for (int t = 0; t < 20; ++t) {
    auto x = random_tuple(3, 2, 2, rng);
    CHECK(sym_g(x) == sym(x));
  }

  // K=2 with f depending only on the first slot averages the two slots.
  TupleFunction first_only;
  first_only.arity = 2;
  first_only.output_dim = 1;
  first_only.fn = [](std::span<const StateAction> x) {
    return std::vector<double>{std::exp(0.3 * x[0].state + 0.7 * x[0].action)};
  };
  auto avg = symmetrize_bruteforce(first_only);
  for (int t = 0; t < 20; ++t) {
    auto x = random_tuple(2, 3, 2, rng);
    const double phi0 = std::exp(0.3 * x[0].state + 0.7 * x[0].action);
    const double phi1 = std::exp(0.3 * x[1].state + 0.7 * x[1].action);
    CHECK(avg(x)[0] == doctest::Approx((phi0 + phi1) / 2.0).epsilon(1e-15));
  }

  // K=3 integer-valued function agrees with the enumeration oracle.
  for (int t = 0; t < 10; ++t) {
    auto f = random_tuple_function(3, 2, 2, 2, rng);
    auto g = symmetrize_bruteforce(f);
    auto x = random_tuple(3, 2, 2, rng);
    auto got = g(x);
    auto want = oracle_symmetrize(f, x);
    for (std::size_t j = 0; j < got.size(); ++j)
      CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-12));
  }

  TupleFunction too_big;
  too_big.arity = 9;
  too_big.output_dim = 1;
  too_big.fn = [](std::span<const StateAction>) { return std::vector<double>{0.0}; };
  CHECK_THROWS_WITH_AS(symmetrize_bruteforce(too_big), "arity too large for brute force",
                       std::invalid_argument);
}

TEST_CASE("symmetrization is exactly invariant and idempotent") {
  RngStream rng(22, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t K = 2 + rng.uniform_index(3);
    auto f = random_tuple_function(K, 2, 2, 2, rng);
    auto g = symmetrize_bruteforce(f);
    auto gg = symmetrize_bruteforce(g);
    auto x = random_tuple(K, 2, 2, rng);

    std::vector<std::size_t> idx(K);
    std::iota(idx.begin(), idx.end(), 0);
    const auto base = g(x);
    std::vector<StateAction> perm(K);
    do {
      for (std::size_t i = 0; i < K; ++i) perm[i] = x[idx[i]];
      CHECK(g(perm) == base);  // exact: evaluation order is canonicalized
    } while (std::next_permutation(idx.begin(), idx.end()));

    CHECK(gg(x) == base);  // idempotence, exact
  }
}

TEST_CASE("lift_population produces grid tables and rejects asymmetric input") {
  RngStream rng(23, 0);

  TupleFunction constant;
  constant.arity = 3;
  constant.output_dim = 2;
  constant.fn = [](std::span<const StateAction>) { return std::vector<double>{2.5, -1.0}; };
  auto lifted = lift_population(constant, 2, 2, rng);
  CHECK(lifted.grid().denominator() == 3);
  for (std::size_t i = 0; i < lifted.grid().size(); ++i) {
    CHECK(lifted.value(i)[0] == 2.5);
    CHECK(lifted.value(i)[1] == -1.0);
  }

  // K=2 fraction of agents in cell (0,0): the lift is mu(0,0) itself.
  TupleFunction fraction;
  fraction.arity = 2;
  fraction.output_dim = 1;
  fraction.fn = [](std::span<const StateAction> x) {
    double count = 0;
    for (const auto& sa : x) count += (sa.state == 0 && sa.action == 0) ? 1.0 : 0.0;
    return std::vector<double>{count / 2.0};
  };
  auto frac_lift = lift_population(fraction, 2, 2, rng);
  for (std::size_t i = 0; i < frac_lift.grid().size(); ++i)
    CHECK(frac_lift.value(i)[0] ==
          doctest::Approx(frac_lift.grid().point_weights(i)[0]).epsilon(1e-15));

  // Point-mass grid point evaluates the repeated tuple.
  TupleFunction sum_states;
  sum_states.arity = 4;
  sum_states.output_dim = 1;
  sum_states.fn = [](std::span<const StateAction> x) {
    double s = 0;
    for (const auto& sa : x) s += sa.state;
    return std::vector<double>{s};
  };
  auto sum_lift = lift_population(sum_states, 2, 1, rng);
  CountTable all_s1(2, 1);
  all_s1.at(1, 0) = 4;
  CHECK(sum_lift.value(all_s1)[0] == 4.0);

  TupleFunction crooked;
  crooked.arity = 2;
  crooked.output_dim = 1;
  crooked.fn = [](std::span<const StateAction> x) {
    return std::vector<double>{static_cast<double>(x[0].state)};  // order-dependent
  };
  CHECK_THROWS_WITH_AS(lift_population(crooked, 2, 2, rng), "function not symmetric",
                       std::invalid_argument);
}

TEST_CASE("lipschitz modulus estimates") {
  RngStream rng(24, 0);

  auto grid21 = std::make_shared<SimplexGrid>(2, 1, 1);  // two cells, denominator 1
  GridFunction g01(grid21, 1, {{0.0}, {1.0}});
  auto l2 = estimate_lipschitz_modulus(g01, PairNorm::l2);
  CHECK(l2.modulus == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  auto l1 = estimate_lipschitz_modulus(g01, PairNorm::l1);
  CHECK(l1.modulus == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(l1.exact);

  GridFunction constant(grid21, 1, {{3.0}, {3.0}});
  CHECK(estimate_lipschitz_modulus(constant, PairNorm::l2).modulus == 0.0);

  auto single = std::make_shared<SimplexGrid>(1, 1, 5);
  GridFunction lone(single, 1, {{2.0}});
  auto lone_est = estimate_lipschitz_modulus(lone, PairNorm::l2);
  CHECK(lone_est.singleton_grid);
  CHECK(lone_est.modulus == 0.0);

  // Sampled mode never exceeds the exact maximum.
  const std::uint64_t K = 4;
  auto grid = std::make_shared<SimplexGrid>(2, 2, K);
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < grid->size(); ++i)
    values.push_back({std::sin(static_cast<double>(i)), std::cos(static_cast<double>(i))});
  GridFunction bumpy(grid, 2, values);
  auto exact = estimate_lipschitz_modulus(bumpy, PairNorm::l2);
  RngStream srng(24, 5);
  auto sampled = estimate_lipschitz_modulus(bumpy, PairNorm::l2, false, 200, &srng);
  CHECK(sampled.modulus <= exact.modulus + 1e-15);
  CHECK(!sampled.exact);

  // Sparse occupancy curve with per-agent influence c/K: the measured
  // modulus stays below c.
  const double c = 0.8;
  auto occ_grid = std::make_shared<SimplexGrid>(2, 2, K);
  std::vector<std::vector<double>> occ_values;
  for (std::size_t i = 0; i < occ_grid->size(); ++i) {
    const double u = occ_grid->point_weights(i)[0];
    occ_values.push_back({c * (1.0 - u)});
  }
  GridFunction occ(occ_grid, 1, occ_values);
  auto occ_est = estimate_lipschitz_modulus(occ, PairNorm::l2);
  CHECK(occ_est.modulus > 0.0);
  CHECK(occ_est.modulus <= c + 1e-12);
}

TEST_CASE("mcshane extension: grid agreement, hand value, Lipschitz bound") {
  // Two cells, denominator 1, scalar values {0, 1}, L = 1/sqrt(2).
  auto grid = std::make_shared<SimplexGrid>(2, 1, 1);
  GridFunction g(grid, 1, {{0.0}, {1.0}});
  const double L = 1.0 / std::sqrt(2.0);
  auto ext = mcshane_extend(g, L);
  std::vector<double> mid = {0.5, 0.5};
  CHECK(ext(mid)[0] == doctest::Approx(0.5).epsilon(1e-12));
  for (std::size_t i = 0; i < grid->size(); ++i) {
    auto w = grid->point_weights(i);
    CHECK(ext(w)[0] == g.value(i)[0]);  // bitwise on grid nodes
  }

  CHECK_THROWS_AS(mcshane_extend(g, L / 2.0), std::invalid_argument);

  GridFunction constant(grid, 1, {{4.0}, {4.0}});
  auto const_ext = mcshane_extend(constant, 0.0);
  RngStream rng(25, 0);
  for (int t = 0; t < 50; ++t) {
    auto mu = random_simplex_point(2, rng);
    CHECK(const_ext(mu)[0] == 4.0);
  }

  // Random grid function on a 4-cell simplex: the bound holds on sampled
  // pairs, coordinate by coordinate.
  auto grid4 = std::make_shared<SimplexGrid>(2, 2, 3);
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < grid4->size(); ++i)
    values.push_back({rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0)});
  GridFunction g4(grid4, 2, values);
  const double mod = grid_coordinate_modulus(g4);
  auto ext4 = mcshane_extend(g4, mod);
  for (int t = 0; t < 2000; ++t) {
    auto mu = random_simplex_point(4, rng);
    auto nu = random_simplex_point(4, rng);
    auto em = ext4(mu);
    auto en = ext4(nu);
    const double dist = l2_distance(mu, nu);
    for (std::size_t c = 0; c < 2; ++c)
      CHECK(std::abs(em[c] - en[c]) <= mod * dist + 1e-9);
  }
  // Grid agreement is bitwise on every node.
  for (std::size_t i = 0; i < grid4->size(); ++i) {
    auto w = grid4->point_weights(i);
    auto v = ext4(w);
    CHECK(v[0] == g4.value(i)[0]);
    CHECK(v[1] == g4.value(i)[1]);
  }
}

TEST_CASE("projected extension yields valid distributions") {
  RngStream rng(26, 0);
  auto grid = std::make_shared<SimplexGrid>(2, 1, 2);
  // Distribution-valued table: rows over two states.
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double p = 0.2 + 0.6 * grid->point_weights(i)[0];
    values.push_back({p, 1.0 - p});
  }
  GridFunction g(grid, 2, values);
  auto ext = mcshane_extend(g, grid_coordinate_modulus(g), true);
  for (int t = 0; t < 200; ++t) {
    auto mu = random_simplex_point(2, rng);
    auto out = ext(mu);
    double sum = 0;
    for (double x : out) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (std::size_t i = 0; i < grid->size(); ++i) {
    auto w = grid->point_weights(i);
    auto v = ext(w);
    CHECK(v[0] == values[i][0]);  // projection leaves valid rows untouched
  }
}

TEST_CASE("kappa sparsity certificates") {
  RngStream rng(27, 0);

  // Function of the count at the agent's own cell only: 1-sparse on {(0,0)}.
  TupleFunction own_cell;
  own_cell.arity = 5;
  own_cell.output_dim = 1;
  own_cell.fn = [](std::span<const StateAction> x) {
    double count = 0;
    for (const auto& sa : x) count += (sa.state == 0 && sa.action == 0) ? 1.0 : 0.0;
    return std::vector<double>{count};
  };
  std::vector<StateAction> U = {{0, 0}};
  auto cert = check_kappa_sparsity(own_cell, U, 2, 2, RngStream(27, 1));
  CHECK(cert.sparse);
  CHECK(cert.trials == 1000);

  // Constant function: 0-sparse (empty U).
  TupleFunction constant;
  constant.arity = 4;
  constant.output_dim = 1;
  constant.fn = [](std::span<const StateAction> x) {
    return std::vector<double>{static_cast<double>(x.size())};
  };
  auto const_cert = check_kappa_sparsity(constant, {}, 2, 2, RngStream(27, 2));
  CHECK(const_cert.sparse);

  // Depends on a cell outside U: refuted with a witness pair.
  TupleFunction leaky;
  leaky.arity = 4;
  leaky.output_dim = 1;
  leaky.fn = [](std::span<const StateAction> x) {
    double count = 0;
    for (const auto& sa : x) count += (sa.state == 1 && sa.action == 1) ? 1.0 : 0.0;
    return std::vector<double>{count};
  };
  auto leak_cert = check_kappa_sparsity(leaky, U, 2, 2, RngStream(27, 3));
  CHECK(!leak_cert.sparse);
  REQUIRE(leak_cert.witness.has_value());
  CHECK(leaky(leak_cert.witness->first) != leaky(leak_cert.witness->second));

  // Count-table variant agrees.
  auto counts_fn = [](const CountTable& c) {
    return std::vector<double>{static_cast<double>(c.at(0, 0))};
  };
  auto count_cert = check_kappa_sparsity_counts(counts_fn, U, 2, 2, 6, RngStream(27, 4));
  CHECK(count_cert.sparse);
}

TEST_CASE("alpha-beta: zero on the symmetric fixture, coefficient spread on rps") {
  SymmetricTestConfig scfg;
  scfg.num_agents = 6;
  scfg.horizon = 2;
  scfg.seed = 3;
  auto sym = make_symmetric_test(scfg);
  AlphaBetaOptions exact_opt;
  exact_opt.mode = AlphaBetaOptions::Mode::exact;
  auto rep = estimate_alpha_beta(*sym.game, *sym.companion, exact_opt, RngStream(28, 0));
  CHECK(rep.exact);
  CHECK(rep.alpha <= 1e-12);
  CHECK(rep.beta <= 1e-12);

  ArpsConfig acfg;
  acfg.num_agents = 4;
  acfg.horizon = 3;
  acfg.noise_scale = 0.1;
  acfg.seed = 5;
  auto arps = make_arps(acfg);
  auto arep = estimate_alpha_beta(*arps.game, *arps.companion, exact_opt, RngStream(28, 1));
  CHECK(arep.alpha == 0.0);  // transitions ignore the population entirely
  CHECK(arep.beta > 0.0);
  CHECK(arep.beta <= 2.0 * acfg.noise_scale + 1e-12);
  REQUIRE(arep.beta_witness.has_value());

  // Sampled mode is a lower bound on the exact maximum.
  AlphaBetaOptions sampled_opt;
  sampled_opt.mode = AlphaBetaOptions::Mode::sampled;
  sampled_opt.budget = 300;
  auto srep = estimate_alpha_beta(*arps.game, *arps.companion, sampled_opt, RngStream(28, 2));
  CHECK(!srep.exact);
  CHECK(srep.beta <= arep.beta + 1e-12);
  CHECK(srep.alpha == 0.0);
}

TEST_CASE("alpha-beta on a two-agent congestion toy with flat curves") {
  // Flat occupancy curves 0.6 and 0.55: the companion averages them, so
  // each agent sits 0.025 from the mean; enumeration returns exactly that.
  CongestionConfig cfg;
  cfg.num_agents = 2;
  cfg.horizon = 2;
  cfg.n_states = 1;
  cfg.n_actions = 2;
  const std::size_t cells = 2, N = 2;
  cfg.transition = {1.0, 1.0};  // single state
  cfg.curves.assign(2, std::vector<double>(cells * (N + 1)));
  for (std::size_t cell = 0; cell < cells; ++cell)
    for (std::size_t k = 0; k <= N; ++k) {
      cfg.curves[0][cell * (N + 1) + k] = 0.60;
      cfg.curves[1][cell * (N + 1) + k] = 0.55;
    }
  cfg.base_rewards = {{0.1, 0.2}, {0.1, 0.2}};
  auto env = make_congestion(cfg);
  AlphaBetaOptions opt;
  opt.mode = AlphaBetaOptions::Mode::exact;
  auto rep = estimate_alpha_beta(*env.game, *env.companion, opt, RngStream(29, 0));
  CHECK(rep.alpha == 0.0);
  CHECK(rep.beta == doctest::Approx(0.025).epsilon(1e-12));
}

TEST_CASE("induced companion equals the lifted-table average on the grid") {
  // Tiny grid-only game: 3 cells, N = 3, kernels tabulated per agent.
  const std::size_t S = 3, A = 1, N = 3;
  auto grid = std::make_shared<SimplexGrid>(S, A, N - 1);
  RngStream rng(30, 0);
  // Per agent and grid point: a transition row and a reward.
  std::vector<std::vector<std::vector<double>>> p_tab(N);
  std::vector<std::vector<double>> r_tab(N);
  for (std::size_t i = 0; i < N; ++i) {
    p_tab[i].resize(grid->size());
    r_tab[i].resize(grid->size());
    for (std::size_t gidx = 0; gidx < grid->size(); ++gidx) {
      p_tab[i][gidx] = random_simplex_point(S, rng);
      r_tab[i][gidx] = rng.uniform01();
    }
  }
  auto game = std::make_shared<testing::FunctionalGame>(
      N, 2, S, A, std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3},
      [grid, p_tab](std::size_t agent, std::size_t, std::size_t, const CountTable& others,
                    std::span<double> out) {
        const auto& row = p_tab[agent][grid->index_of(others)];
        std::copy(row.begin(), row.end(), out.begin());
      },
      [grid, r_tab](std::size_t agent, std::size_t, std::size_t, const CountTable& others) {
        return r_tab[agent][grid->index_of(others)];
      });
  auto companion = induce_mfg(game);
  for (std::size_t gidx = 0; gidx < grid->size(); ++gidx) {
    auto mu = PopulationDistribution::from_counts(grid->point(gidx));
    for (std::size_t s = 0; s < S; ++s) {
      double want_r = 0;
      std::vector<double> want_p(S, 0.0);
      for (std::size_t i = 0; i < N; ++i) {
        want_r += r_tab[i][gidx];
        for (std::size_t sp = 0; sp < S; ++sp) want_p[sp] += p_tab[i][gidx][sp];
      }
      want_r /= N;
      for (double& x : want_p) x /= N;
      CHECK(companion->reward(s, 0, mu) == doctest::Approx(want_r).epsilon(1e-15));
      std::vector<double> got_p(S);
      companion->transition(s, 0, mu, got_p);
      for (std::size_t sp = 0; sp < S; ++sp)
        CHECK(got_p[sp] == doctest::Approx(want_p[sp]).epsilon(1e-15));
    }
  }
}

TEST_CASE("induced companion tracks the analytic limit of a symmetric game") {
  SymmetricTestConfig cfg;
  cfg.num_agents = 5;
  cfg.horizon = 2;
  cfg.seed = 12;
  auto env = make_symmetric_test(cfg);
  auto induced = induce_mfg(env.game);

  // On grid points of the opponent grid the two companions agree exactly.
  SimplexGrid grid(2, 2, cfg.num_agents - 1);
  std::vector<double> pa(2), pb(2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto mu = PopulationDistribution::from_counts(grid.point(i));
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t a = 0; a < 2; ++a) {
        CHECK(induced->reward(s, a, mu) ==
              doctest::Approx(env.companion->reward(s, a, mu)).epsilon(1e-12));
        induced->transition(s, a, mu, pa);
        env.companion->transition(s, a, mu, pb);
        for (std::size_t sp = 0; sp < 2; ++sp)
          CHECK(pa[sp] == doctest::Approx(pb[sp]).epsilon(1e-12));
      }
  }

  // Off the grid the extension stays within the worst-case Lipschitz gap.
  RngStream rng(31, 0);
  for (int t = 0; t < 100; ++t) {
    PopulationDistribution mu(2, 2, random_simplex_point(4, rng));
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t a = 0; a < 2; ++a)
        CHECK(std::abs(induced->reward(s, a, mu) - env.companion->reward(s, a, mu)) < 0.5);
  }

  // alpha-beta of the induced companion against the game vanishes on grid
  // profiles of a symmetric game.
  AlphaBetaOptions opt;
  opt.mode = AlphaBetaOptions::Mode::exact;
  auto rep = estimate_alpha_beta(*env.game, *induced, opt, RngStream(31, 1));
  CHECK(rep.alpha <= 1e-12);
  CHECK(rep.beta <= 1e-12);
}

TEST_CASE("induce_mfg refuses oversized grids") {
  ArpsConfig cfg;
  cfg.num_agents = 2000;
  cfg.horizon = 2;
  auto env = make_arps(cfg);
  CHECK_THROWS_AS(induce_mfg(env.game), std::invalid_argument);
}

TEST_CASE("two agent types average in the induced companion") {
  // Agents 0..1 share one reward table, agents 2..3 another; the induced
  // reward is the midpoint.
  const std::size_t N = 4, S = 2, A = 1;
  auto game = std::make_shared<testing::FunctionalGame>(
      N, 2, S, A, std::vector<double>{0.5, 0.5},
      [](std::size_t, std::size_t s, std::size_t, const CountTable&, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[s] = 1.0;
      },
      [](std::size_t agent, std::size_t s, std::size_t, const CountTable&) {
        return agent < 2 ? (s == 0 ? 1.0 : 0.0) : (s == 0 ? 0.0 : 1.0);
      });
  auto companion = induce_mfg(game);
  SimplexGrid grid(S, A, N - 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto mu = PopulationDistribution::from_counts(grid.point(i));
    CHECK(companion->reward(0, 0, mu) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(companion->reward(1, 0, mu) == doctest::Approx(0.5).epsilon(1e-15));
  }
}
