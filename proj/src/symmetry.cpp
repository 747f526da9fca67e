#include "symmfg/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "symmfg/sim.hpp"

namespace symmfg {

namespace {

void enumerate_counts(std::size_t cells, std::uint64_t remaining, std::size_t cell,
                      std::vector<std::uint32_t>& scratch,
                      const std::function<void(const std::vector<std::uint32_t>&)>& emit) {
  if (cell + 1 == cells) {
    scratch[cell] = static_cast<std::uint32_t>(remaining);
    emit(scratch);
    return;
  }
  for (std::uint64_t c = 0; c <= remaining; ++c) {
    scratch[cell] = static_cast<std::uint32_t>(c);
    enumerate_counts(cells, remaining - c, cell + 1, scratch, emit);
  }
}

// Values sorted per coordinate before summing: the average depends only on
// the multiset of evaluations, so permuting inputs of a symmetrized
// function leaves the result bitwise unchanged.
std::vector<double> exact_mean(std::vector<std::vector<double>>& evals, std::size_t dim) {
  std::vector<double> out(dim);
  std::vector<double> column(evals.size());
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t k = 0; k < evals.size(); ++k) column[k] = evals[k][j];
    std::sort(column.begin(), column.end());
    if (column.front() == column.back()) {
      out[j] = column.front();  // all equal: the mean is that value exactly
    } else {
      out[j] = pairwise_sum(column) / static_cast<double>(column.size());
    }
  }
  return out;
}

}  // namespace

SimplexGrid::SimplexGrid(std::size_t n_states, std::size_t n_actions, std::uint64_t denominator)
    : n_states_(n_states), n_actions_(n_actions), denominator_(denominator) {
  const std::size_t d = cells();
  if (d == 0) throw std::invalid_argument("simplex grid: empty cell set");
  auto n_points = count_points(d, denominator);
  if (!n_points) throw std::invalid_argument("simplex grid: point count overflows");
  points_.reserve(*n_points);
  std::vector<std::uint32_t> scratch(d);
  enumerate_counts(d, denominator, 0, scratch, [&](const std::vector<std::uint32_t>& counts) {
    CountTable t(n_states_, n_actions_);
    for (std::size_t c = 0; c < d; ++c) t[c] = counts[c];
    points_.push_back(std::move(t));
  });
  weights_.resize(points_.size() * d);
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (std::size_t c = 0; c < d; ++c)
      weights_[i * d + c] =
          static_cast<double>(points_[i][c]) / static_cast<double>(denominator_);
}

std::span<const double> SimplexGrid::point_weights(std::size_t index) const {
  return {weights_.data() + index * cells(), cells()};
}

std::size_t SimplexGrid::index_of(const CountTable& counts) const {
  // Lexicographic rank via direct scan is fine at oracle scale; grids are
  // capped well before this matters.
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (points_[i] == counts) return i;
  throw std::invalid_argument("simplex grid: counts are not a grid point");
}

std::optional<std::uint64_t> SimplexGrid::count_points(std::size_t cells,
                                                       std::uint64_t denominator) {
  // C(denominator + cells - 1, cells - 1) with overflow checks.
  __uint128_t result = 1;
  const std::uint64_t k = cells - 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result = result * (denominator + i) / i;
    if (result > std::numeric_limits<std::uint64_t>::max()) return std::nullopt;
  }
  return static_cast<std::uint64_t>(result);
}

GridFunction::GridFunction(std::shared_ptr<const SimplexGrid> grid, std::size_t output_dim,
                           std::vector<std::vector<double>> values)
    : grid_(std::move(grid)), output_dim_(output_dim), values_(std::move(values)) {
  if (values_.size() != grid_->size())
    throw std::invalid_argument("grid function: one value per grid point required");
  for (const auto& v : values_)
    if (v.size() != output_dim_)
      throw std::invalid_argument("grid function: output dimension mismatch");
}

GridFunction GridFunction::tabulate(
    std::shared_ptr<const SimplexGrid> grid, std::size_t output_dim,
    const std::function<std::vector<double>(const CountTable&)>& fn) {
  std::vector<std::vector<double>> values;
  values.reserve(grid->size());
  for (std::size_t i = 0; i < grid->size(); ++i) values.push_back(fn(grid->point(i)));
  return {std::move(grid), output_dim, std::move(values)};
}

TupleFunction symmetrize_bruteforce(const TupleFunction& f) {
  if (f.arity > 8) throw std::invalid_argument("arity too large for brute force");
  const std::size_t K = f.arity;
  const std::size_t dim = f.output_dim;
  auto inner = f.fn;
  TupleFunction g;
  g.arity = K;
  g.output_dim = dim;
  g.fn = [K, dim, inner](std::span<const StateAction> x) {
    if (x.size() != K) throw std::invalid_argument("symmetrized function: wrong arity");
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<StateAction> permuted(K);
    std::vector<std::vector<double>> evals;
    do {
      for (std::size_t i = 0; i < K; ++i) permuted[i] = x[perm[i]];
      evals.push_back(inner(permuted));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return exact_mean(evals, dim);
  };
  return g;
}

GridFunction lift_population(const TupleFunction& g, std::size_t n_states, std::size_t n_actions,
                             RngStream& rng, std::size_t precheck_trials) {
  const std::size_t K = g.arity;
  const std::size_t cells = n_states * n_actions;
  std::vector<StateAction> x(K), permuted(K);
  std::vector<std::size_t> perm(K);
  for (std::size_t trial = 0; trial < precheck_trials; ++trial) {
    for (auto& sa : x)
      sa = {static_cast<std::uint32_t>(rng.uniform_index(n_states)),
            static_cast<std::uint32_t>(rng.uniform_index(n_actions))};
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = K; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    for (std::size_t i = 0; i < K; ++i) permuted[i] = x[perm[i]];
    if (g(x) != g(permuted)) throw std::invalid_argument("function not symmetric");
  }

  auto grid = std::make_shared<SimplexGrid>(n_states, n_actions, K);
  std::vector<std::vector<double>> values;
  values.reserve(grid->size());
  std::vector<StateAction> representative;
  representative.reserve(K);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const CountTable& counts = grid->point(i);
    representative.clear();
    for (std::size_t c = 0; c < cells; ++c)
      for (std::uint32_t k = 0; k < counts[c]; ++k)
        representative.push_back({static_cast<std::uint32_t>(c / n_actions),
                                  static_cast<std::uint32_t>(c % n_actions)});
    values.push_back(g(representative));
  }
  return {std::move(grid), g.output_dim, std::move(values)};
}

namespace {

double pair_distance(const SimplexGrid& grid, std::size_t i, std::size_t j, PairNorm norm) {
  return norm == PairNorm::l1 ? l1_distance(grid.point_weights(i), grid.point_weights(j))
                              : l2_distance(grid.point_weights(i), grid.point_weights(j));
}

double value_distance(const std::vector<double>& a, const std::vector<double>& b, PairNorm norm) {
  return norm == PairNorm::l1 ? l1_distance(a, b) : l2_distance(a, b);
}

}  // namespace

LipschitzEstimate estimate_lipschitz_modulus(const GridFunction& g, PairNorm norm, bool exact,
                                             std::size_t pair_budget, RngStream* rng) {
  const SimplexGrid& grid = g.grid();
  LipschitzEstimate est;
  if (grid.size() < 2) {
    est.singleton_grid = true;
    est.exact = true;
    return est;
  }
  auto consider = [&](std::size_t i, std::size_t j) {
    const double dist = pair_distance(grid, i, j, norm);
    if (dist <= 0) return;
    const double ratio = value_distance(g.value(i), g.value(j), norm) / dist;
    if (ratio > est.modulus) {
      est.modulus = ratio;
      est.witness_a = i;
      est.witness_b = j;
    }
    ++est.pairs_tested;
  };
  if (exact) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t j = i + 1; j < grid.size(); ++j) consider(i, j);
    est.exact = true;
  } else {
    if (rng == nullptr) throw std::invalid_argument("sampled modulus estimate needs a stream");
    for (std::size_t t = 0; t < pair_budget; ++t) {
      const std::size_t i = rng->uniform_index(grid.size());
      std::size_t j = rng->uniform_index(grid.size() - 1);
      if (j >= i) ++j;
      consider(i, j);
    }
  }
  return est;
}

double grid_coordinate_modulus(const GridFunction& g) {
  const SimplexGrid& grid = g.grid();
  double modulus = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double dist = l2_distance(grid.point_weights(i), grid.point_weights(j));
      if (dist <= 0) continue;
      for (std::size_t c = 0; c < g.output_dim(); ++c)
        modulus = std::max(modulus, std::abs(g.value(i)[c] - g.value(j)[c]) / dist);
    }
  }
  return modulus;
}

McShaneExtension::McShaneExtension(GridFunction g, double lipschitz, bool project_to_simplex)
    : grid_fn_(std::move(g)), lipschitz_(lipschitz), project_(project_to_simplex) {}

std::vector<double> McShaneExtension::operator()(std::span<const double> mu_weights) const {
  const SimplexGrid& grid = grid_fn_.grid();
  if (mu_weights.size() != grid.cells())
    throw std::invalid_argument("extension: wrong input dimension");
  const std::size_t dim = grid_fn_.output_dim();
  std::vector<double> out(dim, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dist = l2_distance(mu_weights, grid.point_weights(i));
    if (dist == 0.0) {
      // On a grid node the extension must reproduce the table bitwise.
      out = grid_fn_.value(i);
      if (project_) project_simplex_inplace(out);
      return out;
    }
    const std::vector<double>& v = grid_fn_.value(i);
    for (std::size_t c = 0; c < dim; ++c) out[c] = std::min(out[c], v[c] + lipschitz_ * dist);
  }
  if (project_) project_simplex_inplace(out);
  return out;
}

McShaneExtension mcshane_extend(GridFunction g, double lipschitz, bool project_to_simplex) {
  const double measured = grid_coordinate_modulus(g);
  if (lipschitz < measured) {
    std::ostringstream msg;
    msg << "modulus violation: requested L=" << lipschitz << " below grid modulus " << measured;
    throw std::invalid_argument(msg.str());
  }
  return {std::move(g), lipschitz, project_to_simplex};
}

namespace {

StateAction random_cell(std::size_t n_states, std::size_t n_actions, RngStream& rng) {
  return {static_cast<std::uint32_t>(rng.uniform_index(n_states)),
          static_cast<std::uint32_t>(rng.uniform_index(n_actions))};
}

StateAction random_cell_outside(std::span<const StateAction> U, std::size_t n_states,
                                std::size_t n_actions, RngStream& rng) {
  StateAction sa;
  do {
    sa = random_cell(n_states, n_actions, rng);
  } while (std::find(U.begin(), U.end(), sa) != U.end());
  return sa;
}

bool close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

}  // namespace

SparsityCertificate check_kappa_sparsity(const TupleFunction& f, std::span<const StateAction> U,
                                         std::size_t n_states, std::size_t n_actions,
                                         RngStream rng, std::size_t trials, double tol) {
  SparsityCertificate cert;
  cert.trials = trials;
  cert.root_seed = rng.root_seed();
  cert.stream_id = rng.stream_id();
  const std::size_t outside = n_states * n_actions - U.size();
  std::vector<StateAction> x(f.arity), y(f.arity);
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < f.arity; ++i) {
      x[i] = random_cell(n_states, n_actions, rng);
      const bool in_U = std::find(U.begin(), U.end(), x[i]) != U.end();
      if (in_U || outside == 0)
        y[i] = x[i];
      else
        y[i] = random_cell_outside(U, n_states, n_actions, rng);
    }
    if (!close(f(x), f(y), tol)) {
      cert.sparse = false;
      cert.witness = {{x.begin(), x.end()}, {y.begin(), y.end()}};
      return cert;
    }
  }
  return cert;
}

SparsityCertificate check_kappa_sparsity_counts(
    const std::function<std::vector<double>(const CountTable&)>& f, std::span<const StateAction> U,
    std::size_t n_states, std::size_t n_actions, std::uint64_t total, RngStream rng,
    std::size_t trials, double tol) {
  SparsityCertificate cert;
  cert.trials = trials;
  cert.root_seed = rng.root_seed();
  cert.stream_id = rng.stream_id();

  auto in_U = [&](std::size_t cell) {
    const StateAction sa{static_cast<std::uint32_t>(cell / n_actions),
                         static_cast<std::uint32_t>(cell % n_actions)};
    return std::find(U.begin(), U.end(), sa) != U.end();
  };
  std::vector<std::size_t> outside_cells;
  for (std::size_t c = 0; c < n_states * n_actions; ++c)
    if (!in_U(c)) outside_cells.push_back(c);

  auto to_tuple = [&](const CountTable& counts) {
    std::vector<StateAction> tuple;
    for (std::size_t c = 0; c < counts.n_cells(); ++c)
      for (std::uint32_t k = 0; k < counts[c]; ++k)
        tuple.push_back({static_cast<std::uint32_t>(c / n_actions),
                         static_cast<std::uint32_t>(c % n_actions)});
    return tuple;
  };

  for (std::size_t t = 0; t < trials; ++t) {
    CountTable x(n_states, n_actions), y(n_states, n_actions);
    for (std::uint64_t k = 0; k < total; ++k) {
      const std::size_t cell = rng.uniform_index(n_states * n_actions);
      ++x[cell];
      if (in_U(cell) || outside_cells.empty()) {
        ++y[cell];
      } else {
        ++y[outside_cells[rng.uniform_index(outside_cells.size())]];
      }
    }
    if (!close(f(x), f(y), tol)) {
      cert.sparse = false;
      cert.witness = {to_tuple(x), to_tuple(y)};
      return cert;
    }
  }
  return cert;
}

namespace {

CountTable sample_grid_profile(std::size_t n_states, std::size_t n_actions, std::uint64_t total,
                               RngStream& rng) {
  // Uniform over grid points via stars and bars: choose cells-1 bar
  // positions among total + cells - 1 slots.
  const std::size_t cells = n_states * n_actions;
  const std::uint64_t slots = total + cells - 1;
  std::vector<std::uint64_t> bars;
  bars.reserve(cells - 1);
  // Floyd's algorithm for a uniform (cells-1)-subset of [0, slots).
  std::vector<bool> chosen(slots, false);
  for (std::uint64_t j = slots - (cells - 1); j < slots; ++j) {
    std::uint64_t t = rng.uniform_index(j + 1);
    if (chosen[t]) t = j;
    chosen[t] = true;
    bars.push_back(t);
  }
  std::sort(bars.begin(), bars.end());
  CountTable counts(n_states, n_actions);
  std::uint64_t prev = 0;
  for (std::size_t c = 0; c + 1 < cells; ++c) {
    counts[c] = static_cast<std::uint32_t>(bars[c] - prev);
    prev = bars[c] + 1;
  }
  counts[cells - 1] = static_cast<std::uint32_t>(slots - prev);
  return counts;
}

}  // namespace

AlphaBetaReport estimate_alpha_beta(const DynamicGame& game, const MeanFieldGame& mfg,
                                    const AlphaBetaOptions& options, RngStream rng) {
  const std::size_t N = game.num_agents();
  const std::size_t S = game.states().size;
  const std::size_t A = game.actions().size;
  const std::uint64_t opponents = N - 1;

  AlphaBetaReport report;
  std::vector<double> p_game(S), p_mfg(S);

  auto evaluate_profile = [&](const CountTable& profile, std::size_t agent) {
    const PopulationDistribution mu = PopulationDistribution::from_counts(profile);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        game.transition(agent, s, a, profile, p_game);
        mfg.transition(s, a, mu, p_mfg);
        const double tv = l1_distance(p_game, p_mfg);
        if (tv > report.alpha) {
          report.alpha = tv;
          report.alpha_witness = {agent, s, a, profile};
        }
        const double gap = std::abs(game.reward(agent, s, a, profile) - mfg.reward(s, a, mu));
        if (gap > report.beta) {
          report.beta = gap;
          report.beta_witness = {agent, s, a, profile};
        }
      }
    }
  };

  if (options.mode == AlphaBetaOptions::Mode::exact) {
    const auto n_profiles = SimplexGrid::count_points(S * A, opponents);
    if (!n_profiles || *n_profiles > 2'000'000)
      throw std::invalid_argument("alpha-beta exact mode: too many profiles to enumerate");
    SimplexGrid grid(S, A, opponents);
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t agent = 0; agent < N; ++agent) evaluate_profile(grid.point(i), agent);
    report.exact = true;
    report.samples_used = grid.size();
  } else {
    // Alternate uniform grid draws with on-policy opponent profiles.
    const Policy uniform = Policy::uniform(game.horizon(), S, A);
    const Policy& pol = options.on_policy ? *options.on_policy : uniform;
    const PolicyProfile profile = PolicyProfile::shared(pol);
    RngStream grid_rng = rng.substream(0);
    RngStream episode_rng = rng.substream(1);
    std::size_t episode = 0;
    std::size_t drawn = 0;
    while (drawn < options.budget) {
      CountTable counts(S, A);
      const std::size_t agent = drawn % N;
      if (drawn % 2 == 0) {
        counts = sample_grid_profile(S, A, opponents, grid_rng);
        evaluate_profile(counts, agent);
        ++drawn;
      } else {
        Trajectory traj = sample_episode(game, profile, episode_rng.substream(episode++));
        for (std::size_t h = 0; h < traj.horizon() && drawn < options.budget; ++h) {
          CountTable full = traj.profile(h, S, A);
          --full.at(traj.states[h][agent], traj.actions[h][agent]);
          evaluate_profile(full, agent);
          ++drawn;
        }
      }
    }
    report.samples_used = drawn;
  }

  if (report.alpha > 2.0 + 1e-9)
    throw std::logic_error("alpha-beta: total variation above 2 is impossible");
  const RewardBounds bounds = game.reward_bounds();
  if (report.beta > bounds.range() + 1e-9)
    throw std::logic_error("alpha-beta: reward gap exceeds the declared range");
  return report;
}

namespace {

// Mean-field companion assembled from the count-table kernels: tabulate each
// agent on the opponent grid, extend with the min-form formula (projecting
// transition rows), then average over agents.
class InducedMeanFieldGame final : public MeanFieldGame {
 public:
  InducedMeanFieldGame(std::shared_ptr<const DynamicGame> game, const InduceOptions& options)
      : game_(std::move(game)) {
    const std::size_t S = game_->states().size;
    const std::size_t A = game_->actions().size;
    const std::size_t N = game_->num_agents();
    const auto points = SimplexGrid::count_points(S * A, N - 1);
    if (!points || *points > options.max_grid_points)
      throw std::invalid_argument(
          "induce_mfg: opponent grid too large; supply an analytic companion instead");

    auto grid = std::make_shared<SimplexGrid>(S, A, N - 1);
    extensions_.reserve(N);
    const std::size_t dim = S * A * (S + 1);  // per (s,a): S transition probs + 1 reward
    std::vector<double> p(S);
    for (std::size_t agent = 0; agent < N; ++agent) {
      GridFunction table = GridFunction::tabulate(grid, dim, [&](const CountTable& profile) {
        std::vector<double> row(dim);
        std::size_t k = 0;
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t a = 0; a < A; ++a) {
            game_->transition(agent, s, a, profile, p);
            for (std::size_t sp = 0; sp < S; ++sp) row[k++] = p[sp];
            row[k++] = game_->reward(agent, s, a, profile);
          }
        return row;
      });
      const double modulus = grid_coordinate_modulus(table);
      extensions_.push_back(mcshane_extend(std::move(table), modulus, false));
    }
  }

  std::size_t horizon() const override { return game_->horizon(); }
  const StateSpace& states() const override { return game_->states(); }
  const ActionSpace& actions() const override { return game_->actions(); }
  std::span<const double> initial_state_dist() const override {
    return game_->initial_state_dist();
  }

  void transition(std::size_t s, std::size_t a, const PopulationDistribution& mu,
                  std::span<double> out) const override {
    const std::size_t S = game_->states().size;
    const std::size_t A = game_->actions().size;
    const std::size_t base = (s * A + a) * (S + 1);
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> row(S);
    for (const auto& ext : extensions_) {
      const std::vector<double> values = ext(mu.weights());
      for (std::size_t sp = 0; sp < S; ++sp) row[sp] = values[base + sp];
      project_simplex_inplace(row);
      for (std::size_t sp = 0; sp < S; ++sp) out[sp] += row[sp];
    }
    for (std::size_t sp = 0; sp < S; ++sp) out[sp] /= static_cast<double>(extensions_.size());
  }

  double reward(std::size_t s, std::size_t a, const PopulationDistribution& mu) const override {
    const std::size_t S = game_->states().size;
    const std::size_t A = game_->actions().size;
    const std::size_t idx = (s * A + a) * (S + 1) + S;
    double sum = 0.0;
    for (const auto& ext : extensions_) sum += ext(mu.weights())[idx];
    return sum / static_cast<double>(extensions_.size());
  }

  RewardBounds reward_bounds() const override { return game_->reward_bounds(); }

 private:
  std::shared_ptr<const DynamicGame> game_;
  std::vector<McShaneExtension> extensions_;
};

}  // namespace

std::unique_ptr<MeanFieldGame> induce_mfg(std::shared_ptr<const DynamicGame> game,
                                          const InduceOptions& options) {
  return std::make_unique<InducedMeanFieldGame>(std::move(game), options);
}

}  // namespace symmfg
