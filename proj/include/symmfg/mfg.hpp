#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "symmfg/core.hpp"

namespace symmfg {

/// One application of the population update:
/// out(s',a') = sum_{s,a} mu(s,a) P(s'|s,a,mu) pi_step(a'|s').
/// `step` selects the policy rows acting on the updated population.
PopulationDistribution gamma_step(const MeanFieldGame& mfg, const PopulationDistribution& mu,
                                  const Policy& pi, std::size_t step);

/// Population flow of a policy: flow[0](s,a) = rho0(s) pi_0(a|s), then
/// flow[h] = gamma_step(flow[h-1], pi, h). Every entry sums to one.
PopulationFlow induce_flow(const MeanFieldGame& mfg, const Policy& pi);

/// Entropy-regularized action values of `pi` against a fixed population
/// flow, by backward induction:
///   Q_{H-1}(s,a) = R(s,a,mu_{H-1}) + tau H(pi_{H-1}(.|s))
///   Q_h(s,a)     = R(s,a,mu_h) + tau H(pi_h(.|s))
///                  + sum_{s'} P(s'|s,a,mu_h) sum_{a'} pi_{h+1}(a'|s') Q_{h+1}(s',a').
/// When no flow is given, uses induce_flow(mfg, pi).
QTable q_backward(const MeanFieldGame& mfg, const Policy& pi, double tau,
                  const PopulationFlow* flow = nullptr);

/// Expected (regularized) total reward of pi against a fixed flow:
/// V = sum_s rho0(s) sum_a pi_0(a|s) Q_0(s,a).
double mf_value(const MeanFieldGame& mfg, const PopulationFlow& flow, const Policy& pi,
                double tau);

struct BestResponseResult {
  Policy policy;
  double value = 0.0;
};

/// Optimal policy against a fixed flow. tau = 0: hard backward induction
/// with greedy ties to the lowest action index. tau > 0: soft backward
/// induction, V*_h(s) = tau log sum_a exp(q_h(s,a)/tau), softmax policy.
BestResponseResult best_response(const MeanFieldGame& mfg, const PopulationFlow& flow, double tau);

struct ExploitabilityReport {
  double value = 0.0;  // v_br - v_pi, never below -1e-8
  Policy best_response;
  double v_br = 0.0;
  double v_pi = 0.0;
  double tau = 0.0;
};

/// Gain available to a single deviator against the population flow induced
/// by pi; zero at a mean-field equilibrium. tau is passed through to both
/// sides, so tau > 0 gives the regularized analogue.
ExploitabilityReport mfg_exploitability(const MeanFieldGame& mfg, const Policy& pi, double tau);

struct MonotonicityReport {
  bool violated = false;        // some pair with strictly positive coupling
  bool boundary_case = false;   // coupling identically ~0 on every tested pair
  bool p_independent_of_mu = true;
  double min_inner_product = 0.0;
  double max_inner_product = 0.0;
  std::size_t pairs_tested = 0;
  std::size_t triples_tested = 0;
  // Pair attaining max_inner_product (the violation witness when violated).
  std::optional<std::pair<PopulationDistribution, PopulationDistribution>> witness;
};

/// Samples (mu, mu') pairs and evaluates the reward coupling
/// sum_{s,a} (R(s,a,mu) - R(s,a,mu'))(mu(s,a) - mu'(s,a)), which must stay
/// strictly negative for a monotone game; also tests that P ignores mu.
MonotonicityReport check_monotonicity(const MeanFieldGame& mfg, std::size_t pair_budget,
                                      RngStream rng, std::size_t independence_triples = 1000);

struct ExactPmdOptions {
  std::size_t epochs = 100;
  double tau = 0.1;
  /// Step size per epoch; default 1/sqrt(t+1).
  std::function<double(std::size_t)> lr_schedule;
  /// Uniform-mixing weight per epoch; default 1/(t+1), which makes the
  /// first post-update policy exactly uniform.
  std::function<double(std::size_t)> mixing_schedule;
  /// Start mixing at 1/(t+2) instead (non-default variant).
  bool mixing_offset = false;
};

struct ExactPmdResult {
  std::vector<Policy> iterates;  // pi_0 .. pi_T
  Policy averaged;               // (1/(T+1)) sum_t pi_t
  bool tau_outside_convergence_range = false;  // tau not in (0, 1/2)
};

/// Mirror-descent iteration driven by exact backward-induction values
/// (the oracle the sampled learner is validated against):
/// pi_{t+1} proportional to pi_t^{1 - tau eta_t} exp(eta_t q_t), then mixed
/// with uniform.
ExactPmdResult exact_pmd(const MeanFieldGame& mfg, const ExactPmdOptions& options);

/// Uniform average of a span of equally-shaped policies.
Policy average_policies(std::span<const Policy> policies);

/// A mean-field game with rewards mapped through r -> (r-lo)/(hi-lo); used
/// when learning runs on the normalized scale.
std::unique_ptr<MeanFieldGame> normalize_rewards(std::shared_ptr<const MeanFieldGame> mfg);

/// Random interior point of the simplex over n cells (normalized
/// exponential spacings).
std::vector<double> random_simplex_point(std::size_t n, RngStream& rng);

}  // namespace symmfg
