#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "symmfg/core.hpp"

namespace symmfg {

/// Function of an ordered tuple of K (state, action) cells, with a fixed
/// vector output dimension. The ordered-tuple interface exists for the
/// brute-force symmetrization oracle; production games use count tables.
struct TupleFunction {
  std::size_t arity = 0;
  std::size_t output_dim = 1;
  std::function<std::vector<double>(std::span<const StateAction>)> fn;

  std::vector<double> operator()(std::span<const StateAction> x) const { return fn(x); }
};

/// Enumeration of the empirical grid: all count vectors over `cells` cells
/// summing to `denominator`, in lexicographic order.
class SimplexGrid {
 public:
  SimplexGrid(std::size_t n_states, std::size_t n_actions, std::uint64_t denominator);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t cells() const { return n_states_ * n_actions_; }
  std::uint64_t denominator() const { return denominator_; }
  std::size_t size() const { return points_.size(); }

  const CountTable& point(std::size_t index) const { return points_[index]; }
  /// Grid point as a probability vector (counts / denominator).
  std::span<const double> point_weights(std::size_t index) const;
  std::size_t index_of(const CountTable& counts) const;

  /// Number of grid points for the given shape, or nullopt on overflow.
  static std::optional<std::uint64_t> count_points(std::size_t cells, std::uint64_t denominator);

 private:
  std::size_t n_states_ = 0, n_actions_ = 0;
  std::uint64_t denominator_ = 0;
  std::vector<CountTable> points_;
  std::vector<double> weights_;  // size() * cells(), row-major
};

/// A vector-valued function defined exactly on a SimplexGrid.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(std::shared_ptr<const SimplexGrid> grid, std::size_t output_dim,
               std::vector<std::vector<double>> values);

  /// Tabulates `fn` on every grid point.
  static GridFunction tabulate(std::shared_ptr<const SimplexGrid> grid, std::size_t output_dim,
                               const std::function<std::vector<double>(const CountTable&)>& fn);

  const SimplexGrid& grid() const { return *grid_; }
  std::shared_ptr<const SimplexGrid> grid_ptr() const { return grid_; }
  std::size_t output_dim() const { return output_dim_; }
  const std::vector<double>& value(std::size_t grid_index) const { return values_[grid_index]; }
  const std::vector<double>& value(const CountTable& counts) const {
    return values_[grid_->index_of(counts)];
  }

 private:
  std::shared_ptr<const SimplexGrid> grid_;
  std::size_t output_dim_ = 1;
  std::vector<std::vector<double>> values_;
};

/// Averages f over all K! input orderings. The result is exactly
/// permutation-invariant and idempotent: per output coordinate the K!
/// evaluations are sorted before summing, and an all-equal batch short
/// circuits to the common value. Arity is capped at 8.
TupleFunction symmetrize_bruteforce(const TupleFunction& f);

/// Lifts a symmetric tuple function onto the empirical grid. Symmetry is
/// prechecked on `precheck_trials` random (tuple, permutation) draws;
/// failures throw "function not symmetric".
GridFunction lift_population(const TupleFunction& g, std::size_t n_states, std::size_t n_actions,
                             RngStream& rng, std::size_t precheck_trials = 100);

enum class PairNorm { l1, l2 };

struct LipschitzEstimate {
  double modulus = 0.0;
  bool exact = false;              // all grid pairs enumerated
  bool singleton_grid = false;     // single grid point: modulus 0 by convention
  std::size_t pairs_tested = 0;
  std::size_t witness_a = 0, witness_b = 0;  // grid indices attaining the max
};

/// Max over grid pairs of |g(v) - g(v')| / |v - v'| in the chosen norm
/// (applied to both numerator and denominator). Exact mode enumerates all
/// pairs; sampled mode draws `pair_budget` random pairs.
LipschitzEstimate estimate_lipschitz_modulus(const GridFunction& g, PairNorm norm,
                                             bool exact = true, std::size_t pair_budget = 0,
                                             RngStream* rng = nullptr);

/// Largest per-coordinate difference quotient |g_j(v) - g_j(v')| / ||v - v'||_2
/// over all grid pairs; this is the modulus the min-form extension needs.
double grid_coordinate_modulus(const GridFunction& g);

/// Min-form Lipschitz extension of a grid function to the whole simplex:
/// ext_j(mu) = min over grid points v of [g_j(v) + L * ||mu - v||_2].
/// Agrees with g bitwise on grid points and is L-Lipschitz per coordinate.
/// With project_to_simplex the output is composed with the simplex
/// projection (valid for distribution-valued kernels; projection is
/// non-expansive).
class McShaneExtension {
 public:
  McShaneExtension(GridFunction g, double lipschitz, bool project_to_simplex);

  std::vector<double> operator()(std::span<const double> mu_weights) const;
  std::vector<double> operator()(const PopulationDistribution& mu) const {
    return (*this)(mu.weights());
  }

  double lipschitz() const { return lipschitz_; }
  bool projects() const { return project_; }
  const GridFunction& grid_function() const { return grid_fn_; }

 private:
  GridFunction grid_fn_;
  double lipschitz_ = 0.0;
  bool project_ = false;
};

/// Builds the extension after checking L >= grid_coordinate_modulus(g);
/// violations throw "modulus violation" naming a witness pair.
McShaneExtension mcshane_extend(GridFunction g, double lipschitz,
                                bool project_to_simplex = false);

struct SparsityCertificate {
  bool sparse = true;
  std::size_t trials = 0;
  std::uint64_t root_seed = 0;
  std::uint64_t stream_id = 0;
  // On failure: a pair of inputs agreeing on U with different outputs.
  std::optional<std::pair<std::vector<StateAction>, std::vector<StateAction>>> witness;
};

/// Probabilistic sparsity check: over `trials` random input pairs that agree
/// on the cells in U (and keep everything else off U), the outputs must
/// match within `tol`. A passing certificate is evidence, not proof.
SparsityCertificate check_kappa_sparsity(const TupleFunction& f, std::span<const StateAction> U,
                                         std::size_t n_states, std::size_t n_actions,
                                         RngStream rng, std::size_t trials = 1000,
                                         double tol = 1e-12);

/// Count-table variant: inputs agree on the counts of cells in U; mass
/// outside U is redistributed arbitrarily.
SparsityCertificate check_kappa_sparsity_counts(
    const std::function<std::vector<double>(const CountTable&)>& f, std::span<const StateAction> U,
    std::size_t n_states, std::size_t n_actions, std::uint64_t total, RngStream rng,
    std::size_t trials = 1000, double tol = 1e-12);

struct AlphaBetaWitness {
  std::size_t agent = 0, state = 0, action = 0;
  CountTable profile;
};

/// Worst-case deviation between the per-agent kernels and the mean-field
/// companion: alpha bounds total-variation gaps of transitions, beta bounds
/// absolute reward gaps. Sampled reports are certified lower bounds.
struct AlphaBetaReport {
  double alpha = 0.0;
  double beta = 0.0;
  bool exact = false;
  std::size_t samples_used = 0;
  std::optional<AlphaBetaWitness> alpha_witness;
  std::optional<AlphaBetaWitness> beta_witness;
};

struct AlphaBetaOptions {
  enum class Mode { exact, sampled } mode = Mode::sampled;
  std::size_t budget = 2000;       // sampled: profiles to draw
  const Policy* on_policy = nullptr;  // sampled: extra on-policy profile source
  int workers = 1;
};

/// Enumerates (exact) or samples opponent profiles and evaluates both sides
/// at the profile's own empirical distribution. Exact mode refuses shapes
/// with more than 2e6 profiles.
AlphaBetaReport estimate_alpha_beta(const DynamicGame& game, const MeanFieldGame& mfg,
                                    const AlphaBetaOptions& options, RngStream rng);

struct InduceOptions {
  /// Refuse to enumerate grids larger than this (the explicit construction
  /// is an oracle for tiny instances; shipped environments carry analytic
  /// companions instead).
  std::size_t max_grid_points = 20000;
};

/// Explicit mean-field companion of a dynamic game: tabulate each agent's
/// kernels on the opponent grid, extend with the min-form extension
/// (projected for transitions), then average over agents.
std::unique_ptr<MeanFieldGame> induce_mfg(std::shared_ptr<const DynamicGame> game,
                                          const InduceOptions& options = {});

}  // namespace symmfg
