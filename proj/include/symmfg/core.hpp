#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace symmfg {

/// Tolerance used when validating probability vectors; inputs within this
/// distance of a valid distribution are renormalized on construction.
inline constexpr double kDistributionTol = 1e-9;

struct StateSpace {
  std::size_t size = 0;
  std::vector<std::string> labels;  // optional, empty or size() entries
};

struct ActionSpace {
  std::size_t size = 0;
  std::vector<std::string> labels;
};

/// One agent's (state, action) cell, indexed into StateSpace/ActionSpace.
struct StateAction {
  std::uint32_t state = 0;
  std::uint32_t action = 0;
  friend bool operator==(const StateAction&, const StateAction&) = default;
  friend auto operator<=>(const StateAction&, const StateAction&) = default;
};

/// Integer occupancy table over S x A cells. Used as the "everyone else"
/// argument of N-player kernels; then total() == N-1.
class CountTable {
 public:
  CountTable() = default;
  CountTable(std::size_t n_states, std::size_t n_actions)
      : n_states_(n_states), n_actions_(n_actions), counts_(n_states * n_actions, 0) {}

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_cells() const { return counts_.size(); }

  std::uint32_t& at(std::size_t s, std::size_t a) { return counts_[s * n_actions_ + a]; }
  std::uint32_t at(std::size_t s, std::size_t a) const { return counts_[s * n_actions_ + a]; }
  std::uint32_t& operator[](std::size_t cell) { return counts_[cell]; }
  std::uint32_t operator[](std::size_t cell) const { return counts_[cell]; }

  std::uint64_t total() const;
  std::span<const std::uint32_t> raw() const { return counts_; }

  friend bool operator==(const CountTable&, const CountTable&) = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<std::uint32_t> counts_;
};

/// Probability vector over S x A cells (a mean-field population distribution).
/// Nonnegative, sums to one; construction renormalizes round-off within
/// kDistributionTol and rejects anything worse.
class PopulationDistribution {
 public:
  PopulationDistribution() = default;
  PopulationDistribution(std::size_t n_states, std::size_t n_actions, std::vector<double> weights,
                         std::optional<std::uint64_t> grid_denominator = std::nullopt);

  /// Uniform distribution over all cells.
  static PopulationDistribution uniform(std::size_t n_states, std::size_t n_actions);
  /// Counts scaled by 1/denominator; the result carries the grid tag.
  static PopulationDistribution from_counts(const CountTable& counts);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_cells() const { return weights_.size(); }

  double at(std::size_t s, std::size_t a) const { return weights_[s * n_actions_ + a]; }
  double operator[](std::size_t cell) const { return weights_[cell]; }
  std::span<const double> weights() const { return weights_; }

  /// Marginal mass of a state (sum over actions).
  double state_marginal(std::size_t s) const;
  /// Marginal mass of an action (sum over states).
  double action_marginal(std::size_t a) const;

  /// Set when the distribution is a point of the empirical grid: every
  /// weight times the denominator is an integer.
  std::optional<std::uint64_t> grid_denominator() const { return grid_denominator_; }

  friend bool operator==(const PopulationDistribution&, const PopulationDistribution&) = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> weights_;
  std::optional<std::uint64_t> grid_denominator_;
};

/// Time-indexed sequence of population distributions, one per step.
struct PopulationFlow {
  std::vector<PopulationDistribution> per_step;
  std::size_t horizon() const { return per_step.size(); }
  const PopulationDistribution& at(std::size_t h) const { return per_step.at(h); }
};

/// Time-dependent policy: for each (step, state) a distribution over actions.
class Policy {
 public:
  Policy() = default;
  Policy(std::size_t horizon, std::size_t n_states, std::size_t n_actions);
  Policy(std::size_t horizon, std::size_t n_states, std::size_t n_actions,
         std::vector<double> table);

  static Policy uniform(std::size_t horizon, std::size_t n_states, std::size_t n_actions);

  std::size_t horizon() const { return horizon_; }
  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  double at(std::size_t h, std::size_t s, std::size_t a) const {
    return table_[(h * n_states_ + s) * n_actions_ + a];
  }
  std::span<const double> row(std::size_t h, std::size_t s) const {
    return {table_.data() + (h * n_states_ + s) * n_actions_, n_actions_};
  }
  /// Replaces one (step, state) row; validates and renormalizes it.
  void set_row(std::size_t h, std::size_t s, std::span<const double> row);

  std::span<const double> raw() const { return table_; }

  /// Throws unless every row is a distribution within tolerance.
  void validate() const;

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  std::size_t horizon_ = 0, n_states_ = 0, n_actions_ = 0;
  std::vector<double> table_;
};

/// H x |S| x |A| action-value table together with the entropy coefficient
/// that produced it.
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t horizon, std::size_t n_states, std::size_t n_actions, double tau = 0.0);

  std::size_t horizon() const { return horizon_; }
  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double tau() const { return tau_; }

  double& at(std::size_t h, std::size_t s, std::size_t a) {
    return values_[(h * n_states_ + s) * n_actions_ + a];
  }
  double at(std::size_t h, std::size_t s, std::size_t a) const {
    return values_[(h * n_states_ + s) * n_actions_ + a];
  }
  std::span<const double> row(std::size_t h, std::size_t s) const {
    return {values_.data() + (h * n_states_ + s) * n_actions_, n_actions_};
  }
  std::span<const double> raw() const { return values_; }
  std::span<double> raw_mutable() { return values_; }

 private:
  std::size_t horizon_ = 0, n_states_ = 0, n_actions_ = 0;
  double tau_ = 0.0;
  std::vector<double> values_;
};

/// Upper bound H(1 + log|A|) on learned regularized action values when
/// rewards are normalized to [0,1] and tau <= 1.
double q_value_cap(std::size_t horizon, std::size_t n_actions);

struct RewardBounds {
  double lo = 0.0;
  double hi = 1.0;
  double range() const { return hi - lo; }
};

/// Reproducible random stream: the sequence is a pure function of
/// (root_seed, stream_id). Distinct stream ids give independent streams;
/// substream() derives further independent streams without consuming draws.
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::uint64_t stream_id);

  std::uint64_t root_seed() const { return root_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  /// Inverse-CDF sample over the fixed index order; boundary ties go to the
  /// lowest index with positive weight.
  std::size_t sample(std::span<const double> weights);

  /// Independent stream derived from (root_seed, stream_id, child); pure,
  /// does not consume draws from this stream.
  RngStream substream(std::uint64_t child) const;

 private:
  std::uint64_t root_seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::mt19937_64 gen_;
};

/// Behavioral interface for an N-player finite-horizon dynamic game. Each
/// agent sees only its own (state, action) plus the occupancy table of the
/// other N-1 agents; the count-table argument bakes in permutation
/// invariance over opponents.
class DynamicGame {
 public:
  virtual ~DynamicGame() = default;

  virtual std::size_t num_agents() const = 0;
  virtual std::size_t horizon() const = 0;
  virtual const StateSpace& states() const = 0;
  virtual const ActionSpace& actions() const = 0;
  /// Initial own-state distribution, shared by all agents.
  virtual std::span<const double> initial_state_dist() const = 0;

  /// Writes the next-state distribution for agent `i` into `out`
  /// (size |S|); `others.total()` must equal num_agents()-1.
  virtual void transition(std::size_t agent, std::size_t s, std::size_t a,
                          const CountTable& others, std::span<double> out) const = 0;
  virtual double reward(std::size_t agent, std::size_t s, std::size_t a,
                        const CountTable& others) const = 0;

  /// Declared raw reward range [lo, hi]; learning normalizes with it.
  virtual RewardBounds reward_bounds() const = 0;
};

/// Behavioral interface for a finite-horizon mean-field game: a single
/// representative agent against a population distribution.
class MeanFieldGame {
 public:
  virtual ~MeanFieldGame() = default;

  virtual std::size_t horizon() const = 0;
  virtual const StateSpace& states() const = 0;
  virtual const ActionSpace& actions() const = 0;
  virtual std::span<const double> initial_state_dist() const = 0;

  /// Writes the next-state distribution into `out` (size |S|).
  virtual void transition(std::size_t s, std::size_t a, const PopulationDistribution& mu,
                          std::span<double> out) const = 0;
  virtual double reward(std::size_t s, std::size_t a,
                        const PopulationDistribution& mu) const = 0;

  virtual RewardBounds reward_bounds() const = 0;
};

/// Empirical distribution of K (state, action) pairs: weight = count / K,
/// tagged as a grid point with denominator K. Throws on an empty list.
PopulationDistribution empirical_distribution(std::span<const StateAction> pairs,
                                              std::size_t n_states, std::size_t n_actions);

/// Shannon entropy -sum u(a) log u(a), with 0 log 0 := 0.
double policy_entropy(std::span<const double> u);

/// KL divergence sum u(a) log(u(a)/v(a)); throws if u puts mass where v has none.
double kl_divergence(std::span<const double> u, std::span<const double> v);

/// Euclidean projection onto the probability simplex. Idempotent on valid
/// distributions and non-expansive.
std::vector<double> project_simplex(std::span<const double> v);
void project_simplex_inplace(std::span<double> v);

/// Sum in a fixed index-ascending pairwise tree; result is independent of
/// how callers partition work.
double pairwise_sum(std::span<const double> values);

double l1_distance(std::span<const double> a, std::span<const double> b);
double l2_distance(std::span<const double> a, std::span<const double> b);

/// Runs fn(i) for i in [0, n) on `workers` threads with a static partition.
/// Each index must touch only its own outputs; results are then identical
/// for every worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace symmfg
