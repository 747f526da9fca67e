#include "symmfg/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace symmfg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void check_distribution(std::span<const double> w, double tol, const char* what) {
  double sum = 0.0;
  for (double x : w) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
    if (x < -tol) throw std::invalid_argument(std::string(what) + ": negative weight");
    sum += x;
  }
  if (std::abs(sum - 1.0) > tol)
    throw std::invalid_argument(std::string(what) + ": weights sum to " + std::to_string(sum));
}

void renormalize(std::vector<double>& w) {
  double sum = 0.0;
  for (double& x : w) {
    if (x < 0) x = 0;
    sum += x;
  }
  for (double& x : w) x /= sum;
}

}  // namespace

std::uint64_t CountTable::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

PopulationDistribution::PopulationDistribution(std::size_t n_states, std::size_t n_actions,
                                               std::vector<double> weights,
                                               std::optional<std::uint64_t> grid_denominator)
    : n_states_(n_states), n_actions_(n_actions), weights_(std::move(weights)),
      grid_denominator_(grid_denominator) {
  if (weights_.size() != n_states_ * n_actions_)
    throw std::invalid_argument("distribution: wrong length");
  check_distribution(weights_, kDistributionTol, "distribution");
  renormalize(weights_);
  if (grid_denominator_) {
    const double k = static_cast<double>(*grid_denominator_);
    for (double w : weights_) {
      const double scaled = w * k;
      if (std::abs(scaled - std::round(scaled)) > 1e-6)
        throw std::invalid_argument("distribution: not on the stated grid");
    }
  }
}

PopulationDistribution PopulationDistribution::uniform(std::size_t n_states,
                                                       std::size_t n_actions) {
  const std::size_t n = n_states * n_actions;
  return {n_states, n_actions, std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

PopulationDistribution PopulationDistribution::from_counts(const CountTable& counts) {
  const std::uint64_t total = counts.total();
  if (total == 0) throw std::invalid_argument("empty profile");
  std::vector<double> w(counts.n_cells());
  for (std::size_t c = 0; c < w.size(); ++c)
    w[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
  return {counts.n_states(), counts.n_actions(), std::move(w), total};
}

double PopulationDistribution::state_marginal(std::size_t s) const {
  double sum = 0.0;
  for (std::size_t a = 0; a < n_actions_; ++a) sum += at(s, a);
  return sum;
}

double PopulationDistribution::action_marginal(std::size_t a) const {
  double sum = 0.0;
  for (std::size_t s = 0; s < n_states_; ++s) sum += at(s, a);
  return sum;
}

Policy::Policy(std::size_t horizon, std::size_t n_states, std::size_t n_actions)
    : horizon_(horizon), n_states_(n_states), n_actions_(n_actions),
      table_(horizon * n_states * n_actions, 0.0) {}

Policy::Policy(std::size_t horizon, std::size_t n_states, std::size_t n_actions,
               std::vector<double> table)
    : horizon_(horizon), n_states_(n_states), n_actions_(n_actions), table_(std::move(table)) {
  if (table_.size() != horizon_ * n_states_ * n_actions_)
    throw std::invalid_argument("policy: wrong table length");
  validate();
}

Policy Policy::uniform(std::size_t horizon, std::size_t n_states, std::size_t n_actions) {
  Policy p(horizon, n_states, n_actions);
  std::fill(p.table_.begin(), p.table_.end(), 1.0 / static_cast<double>(n_actions));
  return p;
}

void Policy::set_row(std::size_t h, std::size_t s, std::span<const double> row) {
  if (row.size() != n_actions_) throw std::invalid_argument("policy row: wrong length");
  check_distribution(row, kDistributionTol, "policy row");
  std::vector<double> tmp(row.begin(), row.end());
  renormalize(tmp);
  std::copy(tmp.begin(), tmp.end(), table_.begin() + (h * n_states_ + s) * n_actions_);
}

void Policy::validate() const {
  for (std::size_t h = 0; h < horizon_; ++h)
    for (std::size_t s = 0; s < n_states_; ++s)
      check_distribution(row(h, s), kDistributionTol, "policy row");
}

QTable::QTable(std::size_t horizon, std::size_t n_states, std::size_t n_actions, double tau)
    : horizon_(horizon), n_states_(n_states), n_actions_(n_actions), tau_(tau),
      values_(horizon * n_states * n_actions, 0.0) {}

double q_value_cap(std::size_t horizon, std::size_t n_actions) {
  return static_cast<double>(horizon) * (1.0 + std::log(static_cast<double>(n_actions)));
}

RngStream::RngStream(std::uint64_t root_seed, std::uint64_t stream_id)
    : root_seed_(root_seed), stream_id_(stream_id),
      gen_(splitmix64(splitmix64(root_seed) ^ splitmix64(stream_id ^ 0x5851f42d4c957f2dull))) {}

std::uint64_t RngStream::next_u64() { return gen_(); }

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  // Rejection sampling to avoid modulo bias.
  if (n == 0) throw std::invalid_argument("uniform_index: n == 0");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              (std::numeric_limits<std::uint64_t>::max() % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::size_t RngStream::sample(std::span<const double> weights) {
  const double u = uniform01();
  double cum = 0.0;
  std::size_t last_positive = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0) continue;
    cum += weights[i];
    last_positive = i;
    if (u <= cum) return i;
  }
  if (last_positive == weights.size()) throw std::invalid_argument("sample: no positive weight");
  return last_positive;  // u landed in the round-off tail
}

RngStream RngStream::substream(std::uint64_t child) const {
  return {root_seed_, splitmix64(stream_id_ ^ splitmix64(child + 0x2545f4914f6cdd1dull))};
}

PopulationDistribution empirical_distribution(std::span<const StateAction> pairs,
                                              std::size_t n_states, std::size_t n_actions) {
  if (pairs.empty()) throw std::invalid_argument("empty profile");
  CountTable counts(n_states, n_actions);
  for (const StateAction& sa : pairs) {
    if (sa.state >= n_states || sa.action >= n_actions)
      throw std::invalid_argument("empirical distribution: index out of range");
    ++counts.at(sa.state, sa.action);
  }
  return PopulationDistribution::from_counts(counts);
}

double policy_entropy(std::span<const double> u) {
  check_distribution(u, kDistributionTol, "entropy input");
  double h = 0.0;
  for (double p : u)
    if (p > 0) h -= p * std::log(p);
  return h;
}

double kl_divergence(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("KL: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] <= 0) continue;
    if (v[i] <= 0) throw std::invalid_argument("KL undefined");
    d += u[i] * std::log(u[i] / v[i]);
  }
  return std::max(d, 0.0);
}

void project_simplex_inplace(std::span<double> v) {
  double sum = 0.0;
  double min_entry = std::numeric_limits<double>::infinity();
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("project_simplex: non-finite entry");
    sum += x;
    min_entry = std::min(min_entry, x);
  }
  // Valid distributions project to themselves; return them untouched so the
  // projection is exactly idempotent.
  if (min_entry >= 0.0 && std::abs(sum - 1.0) <= 1e-12) return;
  // Sort-based KKT solve: threshold theta so that sum max(v - theta, 0) = 1.
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  std::size_t support = 0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0) {
      theta = candidate;
      support = j + 1;
    }
  }
  (void)support;
  for (double& x : v) x = std::max(x - theta, 0.0);
}

std::vector<double> project_simplex(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  project_simplex_inplace(out);
  return out;
}

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double x : values) s += x;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("l1_distance: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("l2_distance: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(n, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(w);
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace symmfg
