#include "symmfg/mfg.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "symmfg/learn.hpp"

namespace symmfg {

namespace {

std::vector<double> entropy_by_state(const Policy& pi, std::size_t h) {
  std::vector<double> ent(pi.n_states());
  for (std::size_t s = 0; s < pi.n_states(); ++s) ent[s] = policy_entropy(pi.row(h, s));
  return ent;
}

}  // namespace

PopulationDistribution gamma_step(const MeanFieldGame& mfg, const PopulationDistribution& mu,
                                  const Policy& pi, std::size_t step) {
  const std::size_t S = mfg.states().size;
  const std::size_t A = mfg.actions().size;
  std::vector<double> next_state(S, 0.0);
  std::vector<double> p(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const double mass = mu.at(s, a);
      if (mass == 0.0) continue;
      mfg.transition(s, a, mu, p);
      for (std::size_t sp = 0; sp < S; ++sp) next_state[sp] += mass * p[sp];
    }
  }
  std::vector<double> out(S * A);
  for (std::size_t sp = 0; sp < S; ++sp) {
    auto row = pi.row(step, sp);
    for (std::size_t ap = 0; ap < A; ++ap) out[sp * A + ap] = next_state[sp] * row[ap];
  }
  return {S, A, std::move(out)};
}

PopulationFlow induce_flow(const MeanFieldGame& mfg, const Policy& pi) {
  const std::size_t H = mfg.horizon();
  if (pi.horizon() != H) throw std::invalid_argument("induce_flow: policy horizon mismatch");
  const std::size_t S = mfg.states().size;
  const std::size_t A = mfg.actions().size;
  PopulationFlow flow;
  flow.per_step.reserve(H);

  auto rho0 = mfg.initial_state_dist();
  std::vector<double> first(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    auto row = pi.row(0, s);
    for (std::size_t a = 0; a < A; ++a) first[s * A + a] = rho0[s] * row[a];
  }
  flow.per_step.emplace_back(S, A, std::move(first));
  for (std::size_t h = 1; h < H; ++h)
    flow.per_step.push_back(gamma_step(mfg, flow.per_step[h - 1], pi, h));
  return flow;
}

QTable q_backward(const MeanFieldGame& mfg, const Policy& pi, double tau,
                  const PopulationFlow* flow) {
  const std::size_t H = mfg.horizon();
  const std::size_t S = mfg.states().size;
  const std::size_t A = mfg.actions().size;
  PopulationFlow own_flow;
  if (flow == nullptr) {
    own_flow = induce_flow(mfg, pi);
    flow = &own_flow;
  }
  if (flow->horizon() != H) throw std::invalid_argument("q_backward: flow horizon mismatch");

  QTable q(H, S, A, tau);
  std::vector<double> p(S);
  for (std::size_t h = H; h-- > 0;) {
    const PopulationDistribution& mu = flow->at(h);
    const auto ent = entropy_by_state(pi, h);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        double value = mfg.reward(s, a, mu) + tau * ent[s];
        if (h + 1 < H) {
          mfg.transition(s, a, mu, p);
          double boot = 0.0;
          for (std::size_t sp = 0; sp < S; ++sp) {
            if (p[sp] == 0.0) continue;
            auto row = pi.row(h + 1, sp);
            double inner = 0.0;
            for (std::size_t ap = 0; ap < A; ++ap) inner += row[ap] * q.at(h + 1, sp, ap);
            boot += p[sp] * inner;
          }
          value += boot;
        }
        q.at(h, s, a) = value;
      }
    }
  }
  return q;
}

double mf_value(const MeanFieldGame& mfg, const PopulationFlow& flow, const Policy& pi,
                double tau) {
  const QTable q = q_backward(mfg, pi, tau, &flow);
  const std::size_t S = mfg.states().size;
  const std::size_t A = mfg.actions().size;
  auto rho0 = mfg.initial_state_dist();
  double v = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    auto row = pi.row(0, s);
    double inner = 0.0;
    for (std::size_t a = 0; a < A; ++a) inner += row[a] * q.at(0, s, a);
    v += rho0[s] * inner;
  }
  return v;
}

BestResponseResult best_response(const MeanFieldGame& mfg, const PopulationFlow& flow,
                                 double tau) {
  const std::size_t H = mfg.horizon();
  const std::size_t S = mfg.states().size;
  const std::size_t A = mfg.actions().size;
  if (flow.horizon() != H) throw std::invalid_argument("best_response: flow horizon mismatch");

  Policy policy(H, S, A);
  std::vector<double> v_next(S, 0.0), v_cur(S, 0.0);
  std::vector<double> qrow(A), p(S), row(A);
  for (std::size_t h = H; h-- > 0;) {
    const PopulationDistribution& mu = flow.at(h);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        double value = mfg.reward(s, a, mu);
        if (h + 1 < H) {
          mfg.transition(s, a, mu, p);
          for (std::size_t sp = 0; sp < S; ++sp) value += p[sp] * v_next[sp];
        }
        qrow[a] = value;
      }
      if (tau == 0.0) {
        std::size_t best = 0;
        for (std::size_t a = 1; a < A; ++a)
          if (qrow[a] > qrow[best]) best = a;  // ties keep the lowest index
        v_cur[s] = qrow[best];
        std::fill(row.begin(), row.end(), 0.0);
        row[best] = 1.0;
      } else {
        const double m = *std::max_element(qrow.begin(), qrow.end());
        double z = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
          row[a] = std::exp((qrow[a] - m) / tau);
          z += row[a];
        }
        for (double& x : row) x /= z;
        v_cur[s] = m + tau * std::log(z);
      }
      policy.set_row(h, s, row);
    }
    std::swap(v_next, v_cur);
  }

  auto rho0 = mfg.initial_state_dist();
  double value = 0.0;
  for (std::size_t s = 0; s < S; ++s) value += rho0[s] * v_next[s];
  return {std::move(policy), value};
}

ExploitabilityReport mfg_exploitability(const MeanFieldGame& mfg, const Policy& pi, double tau) {
  const PopulationFlow flow = induce_flow(mfg, pi);
  BestResponseResult br = best_response(mfg, flow, tau);
  ExploitabilityReport report;
  report.v_br = br.value;
  report.v_pi = mf_value(mfg, flow, pi, tau);
  report.value = report.v_br - report.v_pi;
  report.best_response = std::move(br.policy);
  report.tau = tau;
  if (report.value < -1e-8)
    throw std::logic_error("exploitability: best response lost to the evaluated policy");
  return report;
}

std::vector<double> random_simplex_point(std::size_t n, RngStream& rng) {
  std::vector<double> x(n);
  double sum = 0.0;
  for (double& v : x) {
    v = -std::log(1.0 - rng.uniform01());
    sum += v;
  }
  for (double& v : x) v /= sum;
  return x;
}

MonotonicityReport check_monotonicity(const MeanFieldGame& mfg, std::size_t pair_budget,
                                      RngStream rng, std::size_t independence_triples) {
  const std::size_t S = mfg.states().size;
  const std::size_t A = mfg.actions().size;
  const std::size_t cells = S * A;
  MonotonicityReport report;
  report.triples_tested = independence_triples;

  std::vector<double> pa(S), pb(S);
  for (std::size_t t = 0; t < independence_triples; ++t) {
    auto s = rng.uniform_index(S);
    auto a = rng.uniform_index(A);
    PopulationDistribution mu(S, A, random_simplex_point(cells, rng));
    PopulationDistribution nu(S, A, random_simplex_point(cells, rng));
    mfg.transition(s, a, mu, pa);
    mfg.transition(s, a, nu, pb);
    if (l1_distance(pa, pb) > 1e-9) {
      report.p_independent_of_mu = false;
      break;
    }
  }

  constexpr double kZeroTol = 1e-12;
  bool saw_zero = false;
  for (std::size_t t = 0; t < pair_budget; ++t) {
    PopulationDistribution mu(S, A, random_simplex_point(cells, rng));
    PopulationDistribution nu(S, A, random_simplex_point(cells, rng));
    double inner = 0.0;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a)
        inner += (mfg.reward(s, a, mu) - mfg.reward(s, a, nu)) * (mu.at(s, a) - nu.at(s, a));
    if (t == 0 || inner < report.min_inner_product) report.min_inner_product = inner;
    if (t == 0 || inner > report.max_inner_product) {
      report.max_inner_product = inner;
      report.witness = {mu, nu};
    }
    if (std::abs(inner) <= kZeroTol)
      saw_zero = true;
    ++report.pairs_tested;
  }
  report.violated = report.pairs_tested > 0 && report.max_inner_product > kZeroTol;
  report.boundary_case = !report.violated && saw_zero &&
                         report.pairs_tested > 0 && report.min_inner_product >= -kZeroTol;
  if (!report.violated) report.witness.reset();
  return report;
}

Policy average_policies(std::span<const Policy> policies) {
  if (policies.empty()) throw std::invalid_argument("average_policies: empty span");
  const std::size_t H = policies[0].horizon();
  const std::size_t S = policies[0].n_states();
  const std::size_t A = policies[0].n_actions();
  Policy out(H, S, A);
  std::vector<double> row(A);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      std::fill(row.begin(), row.end(), 0.0);
      for (const Policy& p : policies) {
        auto r = p.row(h, s);
        for (std::size_t a = 0; a < A; ++a) row[a] += r[a];
      }
      for (double& x : row) x /= static_cast<double>(policies.size());
      out.set_row(h, s, row);
    }
  }
  return out;
}

ExactPmdResult exact_pmd(const MeanFieldGame& mfg, const ExactPmdOptions& options) {
  const std::size_t H = mfg.horizon();
  const std::size_t S = mfg.states().size;
  const std::size_t A = mfg.actions().size;
  const double tau = options.tau;

  auto lr = options.lr_schedule
                ? options.lr_schedule
                : [](std::size_t t) { return 1.0 / std::sqrt(static_cast<double>(t + 1)); };
  auto mix = options.mixing_schedule ? options.mixing_schedule
                                     : std::function<double(std::size_t)>{};

  ExactPmdResult result;
  result.tau_outside_convergence_range = !(tau > 0.0 && tau < 0.5);
  result.iterates.reserve(options.epochs + 1);
  result.iterates.push_back(Policy::uniform(H, S, A));

  std::vector<double> qrow(A), updated(A), mixed(A);
  for (std::size_t t = 0; t < options.epochs; ++t) {
    const Policy& cur = result.iterates.back();
    const double eta = lr(t);
    if (tau * eta >= 1.0)
      throw std::invalid_argument("exact_pmd: tau * eta must stay below 1");
    const double mix_w = options.mixing_schedule
                             ? mix(t)
                             : 1.0 / static_cast<double>(t + 1 + (options.mixing_offset ? 1 : 0));

    const PopulationFlow flow = induce_flow(mfg, cur);
    const QTable q = q_backward(mfg, cur, tau, &flow);

    Policy next(H, S, A);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t s = 0; s < S; ++s) {
        const double ent = policy_entropy(cur.row(h, s));
        auto qr = q.row(h, s);
        for (std::size_t a = 0; a < A; ++a) qrow[a] = qr[a] - tau * ent;
        auto up = pmd_policy_update(cur.row(h, s), qrow, eta, tau);
        for (std::size_t a = 0; a < A; ++a)
          mixed[a] = (1.0 - mix_w) * up[a] + mix_w / static_cast<double>(A);
        next.set_row(h, s, mixed);
      }
    }
    result.iterates.push_back(std::move(next));
  }
  result.averaged = average_policies(result.iterates);
  return result;
}

namespace {

class RewardNormalizedGame final : public MeanFieldGame {
 public:
  explicit RewardNormalizedGame(std::shared_ptr<const MeanFieldGame> base)
      : base_(std::move(base)), bounds_(base_->reward_bounds()) {
    if (bounds_.range() <= 0) throw std::invalid_argument("normalize_rewards: empty range");
  }

  std::size_t horizon() const override { return base_->horizon(); }
  const StateSpace& states() const override { return base_->states(); }
  const ActionSpace& actions() const override { return base_->actions(); }
  std::span<const double> initial_state_dist() const override {
    return base_->initial_state_dist();
  }
  void transition(std::size_t s, std::size_t a, const PopulationDistribution& mu,
                  std::span<double> out) const override {
    base_->transition(s, a, mu, out);
  }
  double reward(std::size_t s, std::size_t a, const PopulationDistribution& mu) const override {
    return (base_->reward(s, a, mu) - bounds_.lo) / bounds_.range();
  }
  RewardBounds reward_bounds() const override { return {0.0, 1.0}; }

 private:
  std::shared_ptr<const MeanFieldGame> base_;
  RewardBounds bounds_;
};

}  // namespace

std::unique_ptr<MeanFieldGame> normalize_rewards(std::shared_ptr<const MeanFieldGame> mfg) {
  return std::make_unique<RewardNormalizedGame>(std::move(mfg));
}

}  // namespace symmfg
