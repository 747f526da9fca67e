#include "symmfg/envs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace symmfg {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::vector<double> uniform_dist(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

json base_header(const std::string& type) {
  return json{{"format", "symmfg-env"}, {"version", kFormatVersion}, {"type", type}};
}

json require(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("env description missing '") + key + "'");
  return j.at(key);
}

// ---------------------------------------------------------------------------
// A-RPS

struct ArpsData {
  ArpsConfig cfg;
  StateSpace states{3, {"R", "P", "S"}};
  ActionSpace actions{3, {"R", "P", "S"}};
  std::vector<double> rho0;
  // Per agent: u[s], v[s] for own state s, plus crowd cost c.
  std::vector<std::array<double, 3>> u, v;
  std::vector<double> c;
  std::array<double, 3> u_mean{}, v_mean{};
  double c_mean = 0.0;
  RewardBounds bounds;

  // State that beats s, and state s beats, in the R<P<S<R cycle.
  static std::size_t beaten_by(std::size_t s) { return (s + 1) % 3; }
  static std::size_t beats(std::size_t s) { return (s + 2) % 3; }
};

double CrowdCostSpecMaxAbs(const CrowdCostSpec& spec) {
  return spec.kind == CrowdCostSpec::Kind::constant ? std::abs(spec.value)
                                                    : std::max(std::abs(spec.lo), std::abs(spec.hi));
}

std::shared_ptr<ArpsData> arps_data(const ArpsConfig& cfg,
                                    const std::vector<std::array<double, 3>>* u_draws,
                                    const std::vector<std::array<double, 3>>* v_draws,
                                    const std::vector<double>* c_draws) {
  if (cfg.num_agents < 2) throw std::invalid_argument("arps: need at least two agents");
  if (cfg.noise_scale < 0) throw std::invalid_argument("arps: negative noise scale");
  auto data = std::make_shared<ArpsData>();
  data->cfg = cfg;
  data->rho0 = cfg.rho0.empty() ? uniform_dist(3) : cfg.rho0;
  if (data->rho0.size() != 3) throw std::invalid_argument("arps: rho0 needs three entries");

  const std::size_t N = cfg.num_agents;
  const std::array<double, 3> u_base = {2.0, 4.0, 6.0};
  const std::array<double, 3> v_base = {1.0, 2.0, 3.0};
  data->u.resize(N);
  data->v.resize(N);
  data->c.resize(N);
  if (u_draws) {
    data->u = *u_draws;
    data->v = *v_draws;
    data->c = *c_draws;
  } else {
    RngStream rng(cfg.seed, 0);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t s = 0; s < 3; ++s) {
        data->u[i][s] = u_base[s] + rng.uniform(-cfg.noise_scale, cfg.noise_scale);
        data->v[i][s] = v_base[s] + rng.uniform(-cfg.noise_scale, cfg.noise_scale);
      }
      switch (cfg.crowd_cost.kind) {
        case CrowdCostSpec::Kind::constant: data->c[i] = cfg.crowd_cost.value; break;
        case CrowdCostSpec::Kind::uniform:
          data->c[i] = rng.uniform(cfg.crowd_cost.lo, cfg.crowd_cost.hi);
          break;
      }
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    double us = 0, vs = 0;
    for (std::size_t i = 0; i < N; ++i) {
      us += data->u[i][s];
      vs += data->v[i][s];
    }
    data->u_mean[s] = us / static_cast<double>(N);
    data->v_mean[s] = vs / static_cast<double>(N);
  }
  data->c_mean = 0;
  for (double ci : data->c) data->c_mean += ci;
  data->c_mean /= static_cast<double>(N);

  const double c_max = CrowdCostSpecMaxAbs(cfg.crowd_cost);
  data->bounds = {-(c_max + 6.0 + cfg.noise_scale), 3.0 + cfg.noise_scale};
  return data;
}

class ArpsGame final : public DynamicGame {
 public:
  explicit ArpsGame(std::shared_ptr<const ArpsData> data) : data_(std::move(data)) {}

  std::size_t num_agents() const override { return data_->cfg.num_agents; }
  std::size_t horizon() const override { return data_->cfg.horizon; }
  const StateSpace& states() const override { return data_->states; }
  const ActionSpace& actions() const override { return data_->actions; }
  std::span<const double> initial_state_dist() const override { return data_->rho0; }

  void transition(std::size_t, std::size_t, std::size_t a, const CountTable&,
                  std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    out[a] = 1.0;  // next state is the chosen move, population plays no part
  }

  double reward(std::size_t agent, std::size_t s, std::size_t a,
                const CountTable& others) const override {
    const double denom = static_cast<double>(data_->cfg.include_self
                                                 ? data_->cfg.num_agents
                                                 : data_->cfg.num_agents - 1);
    double action_mass = 0, beaten_by_mass = 0, beats_mass = 0;
    const std::size_t loser = ArpsData::beaten_by(s);
    const std::size_t winner_over = ArpsData::beats(s);
    for (std::size_t st = 0; st < 3; ++st) {
      for (std::size_t ac = 0; ac < 3; ++ac) {
        const double n = others.at(st, ac);
        if (ac == a) action_mass += n;
        if (st == loser) beaten_by_mass += n;
        if (st == winner_over) beats_mass += n;
      }
    }
    if (data_->cfg.include_self) {
      action_mass += 1;  // own action always matches itself
      if (s == loser) beaten_by_mass += 1;
      if (s == winner_over) beats_mass += 1;
    }
    return -data_->c[agent] * (action_mass / denom) -
           data_->u[agent][s] * (beaten_by_mass / denom) +
           data_->v[agent][s] * (beats_mass / denom);
  }

  RewardBounds reward_bounds() const override { return data_->bounds; }

 private:
  std::shared_ptr<const ArpsData> data_;
};

class ArpsMeanField final : public MeanFieldGame {
 public:
  explicit ArpsMeanField(std::shared_ptr<const ArpsData> data) : data_(std::move(data)) {}

  std::size_t horizon() const override { return data_->cfg.horizon; }
  const StateSpace& states() const override { return data_->states; }
  const ActionSpace& actions() const override { return data_->actions; }
  std::span<const double> initial_state_dist() const override { return data_->rho0; }

  void transition(std::size_t, std::size_t a, const PopulationDistribution&,
                  std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    out[a] = 1.0;
  }

  double reward(std::size_t s, std::size_t a, const PopulationDistribution& mu) const override {
    return -data_->c_mean * mu.action_marginal(a) -
           data_->u_mean[s] * mu.state_marginal(ArpsData::beaten_by(s)) +
           data_->v_mean[s] * mu.state_marginal(ArpsData::beats(s));
  }

  RewardBounds reward_bounds() const override { return data_->bounds; }

 private:
  std::shared_ptr<const ArpsData> data_;
};

json arps_to_json(const ArpsData& data) {
  json j = base_header("arps");
  const ArpsConfig& cfg = data.cfg;
  j["config"] = {{"num_agents", cfg.num_agents},
                 {"horizon", cfg.horizon},
                 {"noise_scale", cfg.noise_scale},
                 {"include_self", cfg.include_self},
                 {"rho0", data.rho0},
                 {"seed", cfg.seed},
                 {"crowd_cost",
                  {{"kind", cfg.crowd_cost.kind == CrowdCostSpec::Kind::constant ? "constant"
                                                                                 : "uniform"},
                   {"value", cfg.crowd_cost.value},
                   {"lo", cfg.crowd_cost.lo},
                   {"hi", cfg.crowd_cost.hi}}}};
  json u = json::array(), v = json::array();
  for (const auto& row : data.u) u.push_back(std::vector<double>(row.begin(), row.end()));
  for (const auto& row : data.v) v.push_back(std::vector<double>(row.begin(), row.end()));
  j["draws"] = {{"u", u}, {"v", v}, {"c", data.c}};
  return j;
}

EnvironmentPair arps_pair(std::shared_ptr<const ArpsData> data) {
  EnvironmentPair env;
  env.kind = "arps";
  env.game = std::make_shared<ArpsGame>(data);
  env.companion = std::make_shared<ArpsMeanField>(data);
  env.description_json = arps_to_json(*data).dump(2);
  return env;
}

ArpsConfig arps_config_from_json(const json& c) {
  ArpsConfig cfg;
  cfg.num_agents = require(c, "num_agents").get<std::size_t>();
  cfg.horizon = require(c, "horizon").get<std::size_t>();
  cfg.noise_scale = require(c, "noise_scale").get<double>();
  cfg.include_self = c.value("include_self", false);
  cfg.rho0 = c.value("rho0", std::vector<double>{});
  cfg.seed = c.value("seed", std::uint64_t{0});
  if (c.contains("crowd_cost")) {
    const json& cc = c.at("crowd_cost");
    const std::string kind = cc.value("kind", "constant");
    cfg.crowd_cost.kind =
        kind == "uniform" ? CrowdCostSpec::Kind::uniform : CrowdCostSpec::Kind::constant;
    cfg.crowd_cost.value = cc.value("value", 0.0);
    cfg.crowd_cost.lo = cc.value("lo", 0.0);
    cfg.crowd_cost.hi = cc.value("hi", 0.0);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// A-SIS. States {H=0, I=1}, actions {D=0, U=1}.

struct AsisData {
  AsisConfig cfg;
  StateSpace states{2, {"H", "I"}};
  ActionSpace actions{2, {"D", "U"}};
  std::vector<double> rho0 = uniform_dist(2);
  std::vector<double> susceptibility, healing, aversion;
  double susceptibility_mean = 0, healing_mean = 0, aversion_mean = 0;
};

constexpr std::size_t kHealthy = 0, kInfected = 1;
constexpr std::size_t kDistance = 0, kGoOut = 1;

std::shared_ptr<AsisData> asis_data(const AsisConfig& cfg, const std::vector<double>* alpha,
                                    const std::vector<double>* theta,
                                    const std::vector<double>* xi) {
  if (cfg.num_agents < 2) throw std::invalid_argument("asis: need at least two agents");
  auto check01 = [](double lo, double hi, const char* what) {
    if (lo < 0 || hi > 1 || lo > hi)
      throw std::invalid_argument(std::string("asis: ") + what + " range must sit inside [0,1]");
  };
  check01(cfg.susceptibility_lo, cfg.susceptibility_hi, "susceptibility");
  check01(cfg.healing_lo, cfg.healing_hi, "healing");
  check01(cfg.aversion_lo, cfg.aversion_hi, "aversion");

  auto data = std::make_shared<AsisData>();
  data->cfg = cfg;
  const std::size_t N = cfg.num_agents;
  if (alpha) {
    data->susceptibility = *alpha;
    data->healing = *theta;
    data->aversion = *xi;
  } else {
    RngStream rng(cfg.seed, 0);
    data->susceptibility.resize(N);
    data->healing.resize(N);
    data->aversion.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      data->susceptibility[i] = rng.uniform(cfg.susceptibility_lo, cfg.susceptibility_hi);
      data->healing[i] = rng.uniform(cfg.healing_lo, cfg.healing_hi);
      data->aversion[i] = rng.uniform(cfg.aversion_lo, cfg.aversion_hi);
    }
  }
  for (std::size_t i = 0; i < N; ++i) {
    data->susceptibility_mean += data->susceptibility[i];
    data->healing_mean += data->healing[i];
    data->aversion_mean += data->aversion[i];
  }
  data->susceptibility_mean /= static_cast<double>(N);
  data->healing_mean /= static_cast<double>(N);
  data->aversion_mean /= static_cast<double>(N);
  return data;
}

class AsisGame final : public DynamicGame {
 public:
  explicit AsisGame(std::shared_ptr<const AsisData> data) : data_(std::move(data)) {}

  std::size_t num_agents() const override { return data_->cfg.num_agents; }
  std::size_t horizon() const override { return data_->cfg.horizon; }
  const StateSpace& states() const override { return data_->states; }
  const ActionSpace& actions() const override { return data_->actions; }
  std::span<const double> initial_state_dist() const override { return data_->rho0; }

  void transition(std::size_t agent, std::size_t s, std::size_t a, const CountTable& others,
                  std::span<double> out) const override {
    double p_infected = 0.0;
    if (s == kInfected) {
      p_infected = 1.0 - data_->healing[agent];
    } else if (a == kGoOut) {
      const double frac_iu = static_cast<double>(others.at(kInfected, kGoOut)) /
                             static_cast<double>(data_->cfg.num_agents - 1);
      p_infected = data_->susceptibility[agent] * frac_iu;
    }
    out[kInfected] = p_infected;
    out[kHealthy] = 1.0 - p_infected;
  }

  double reward(std::size_t agent, std::size_t s, std::size_t a,
                const CountTable&) const override {
    return -(s == kInfected ? 1.0 : 0.0) - data_->aversion[agent] * (a == kDistance ? 1.0 : 0.0);
  }

  RewardBounds reward_bounds() const override { return {-2.0, 0.0}; }

 private:
  std::shared_ptr<const AsisData> data_;
};

class AsisMeanField final : public MeanFieldGame {
 public:
  explicit AsisMeanField(std::shared_ptr<const AsisData> data) : data_(std::move(data)) {}

  std::size_t horizon() const override { return data_->cfg.horizon; }
  const StateSpace& states() const override { return data_->states; }
  const ActionSpace& actions() const override { return data_->actions; }
  std::span<const double> initial_state_dist() const override { return data_->rho0; }

  void transition(std::size_t s, std::size_t a, const PopulationDistribution& mu,
                  std::span<double> out) const override {
    double p_infected = 0.0;
    if (s == kInfected) {
      p_infected = 1.0 - data_->healing_mean;
    } else if (a == kGoOut) {
      p_infected = data_->susceptibility_mean * mu.at(kInfected, kGoOut);
    }
    out[kInfected] = p_infected;
    out[kHealthy] = 1.0 - p_infected;
  }

  double reward(std::size_t s, std::size_t a, const PopulationDistribution&) const override {
    return -(s == kInfected ? 1.0 : 0.0) -
           data_->aversion_mean * (a == kDistance ? 1.0 : 0.0);
  }

  RewardBounds reward_bounds() const override { return {-2.0, 0.0}; }

 private:
  std::shared_ptr<const AsisData> data_;
};

json asis_to_json(const AsisData& data) {
  json j = base_header("asis");
  const AsisConfig& cfg = data.cfg;
  j["config"] = {{"num_agents", cfg.num_agents},
                 {"horizon", cfg.horizon},
                 {"susceptibility", {cfg.susceptibility_lo, cfg.susceptibility_hi}},
                 {"healing", {cfg.healing_lo, cfg.healing_hi}},
                 {"aversion", {cfg.aversion_lo, cfg.aversion_hi}},
                 {"seed", cfg.seed}};
  j["draws"] = {{"susceptibility", data.susceptibility},
                {"healing", data.healing},
                {"aversion", data.aversion}};
  return j;
}

EnvironmentPair asis_pair(std::shared_ptr<const AsisData> data) {
  EnvironmentPair env;
  env.kind = "asis";
  env.game = std::make_shared<AsisGame>(data);
  env.companion = std::make_shared<AsisMeanField>(data);
  env.description_json = asis_to_json(*data).dump(2);
  return env;
}

AsisConfig asis_config_from_json(const json& c) {
  AsisConfig cfg;
  cfg.num_agents = require(c, "num_agents").get<std::size_t>();
  cfg.horizon = require(c, "horizon").get<std::size_t>();
  auto range = [&](const char* key, double& lo, double& hi) {
    if (!c.contains(key)) return;
    lo = c.at(key).at(0).get<double>();
    hi = c.at(key).at(1).get<double>();
  };
  range("susceptibility", cfg.susceptibility_lo, cfg.susceptibility_hi);
  range("healing", cfg.healing_lo, cfg.healing_hi);
  range("aversion", cfg.aversion_lo, cfg.aversion_hi);
  cfg.seed = c.value("seed", std::uint64_t{0});
  return cfg;
}

// ---------------------------------------------------------------------------
// Congestion

struct CongestionData {
  CongestionConfig cfg;
  StateSpace states;
  ActionSpace actions;
  std::vector<double> rho0;
  std::vector<double> transition;                // (S*A) x S
  std::vector<std::vector<double>> curves;       // per agent: (S*A) x (N+1)
  std::vector<std::vector<double>> base_rewards;  // per agent: S*A
  // Population averages; interpolation is linear in the curve values, so
  // the companion can use the mean curve directly.
  std::vector<double> mean_curve;   // (S*A) x (N+1)
  std::vector<double> mean_base;    // S*A

  double curve_at(std::size_t agent, std::size_t cell, std::size_t occupancy) const {
    return curves[agent][cell * (cfg.num_agents + 1) + occupancy];
  }

  void finalize_means() {
    const std::size_t N = cfg.num_agents;
    const std::size_t cells = cfg.n_states * cfg.n_actions;
    mean_curve.assign(cells * (N + 1), 0.0);
    mean_base.assign(cells, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t k = 0; k < mean_curve.size(); ++k) mean_curve[k] += curves[i][k];
      for (std::size_t c = 0; c < cells; ++c) mean_base[c] += base_rewards[i][c];
    }
    for (double& x : mean_curve) x /= static_cast<double>(N);
    for (double& x : mean_base) x /= static_cast<double>(N);
  }
};

std::shared_ptr<CongestionData> congestion_data(const CongestionConfig& cfg) {
  if (cfg.num_agents < 2) throw std::invalid_argument("congestion: need at least two agents");
  if (cfg.n_states == 0 || cfg.n_actions == 0)
    throw std::invalid_argument("congestion: empty spaces");
  auto data = std::make_shared<CongestionData>();
  data->cfg = cfg;
  data->states.size = cfg.n_states;
  data->actions.size = cfg.n_actions;
  data->rho0 = uniform_dist(cfg.n_states);

  const std::size_t N = cfg.num_agents;
  const std::size_t cells = cfg.n_states * cfg.n_actions;
  RngStream rng(cfg.seed, 0);

  if (!cfg.transition.empty()) {
    if (cfg.transition.size() != cells * cfg.n_states)
      throw std::invalid_argument("congestion: transition table has the wrong shape");
    data->transition = cfg.transition;
    for (std::size_t row = 0; row < cells; ++row) {
      double sum = 0;
      for (std::size_t sp = 0; sp < cfg.n_states; ++sp) {
        const double p = data->transition[row * cfg.n_states + sp];
        if (p < 0) throw std::invalid_argument("congestion: negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kDistributionTol)
        throw std::invalid_argument("congestion: transition rows must sum to one");
    }
  } else {
    data->transition.resize(cells * cfg.n_states);
    RngStream trng = rng.substream(0);
    for (std::size_t row = 0; row < cells; ++row) {
      double sum = 0;
      for (std::size_t sp = 0; sp < cfg.n_states; ++sp) {
        const double x = 0.2 + trng.uniform01();
        data->transition[row * cfg.n_states + sp] = x;
        sum += x;
      }
      for (std::size_t sp = 0; sp < cfg.n_states; ++sp)
        data->transition[row * cfg.n_states + sp] /= sum;
    }
  }

  if (!cfg.curves.empty()) {
    if (cfg.curves.size() != N) throw std::invalid_argument("congestion: one curve set per agent");
    data->curves = cfg.curves;
    for (std::size_t i = 0; i < N; ++i) {
      if (data->curves[i].size() != cells * (N + 1))
        throw std::invalid_argument("congestion: curve table has the wrong shape");
      for (std::size_t cell = 0; cell < cells; ++cell)
        for (std::size_t k = 0; k + 1 <= N; ++k) {
          const double cur = data->curves[i][cell * (N + 1) + k];
          const double nxt = data->curves[i][cell * (N + 1) + k + 1];
          if (cur < 0 || cur > 1 || nxt < 0 || nxt > 1)
            throw std::invalid_argument("congestion: curve values must sit inside [0,1]");
          if (nxt > cur) {
            std::ostringstream msg;
            msg << "congestion: curve not non-increasing for agent " << i << ", cell " << cell
                << ", occupancy " << k << " -> " << k + 1;
            throw std::invalid_argument(msg.str());
          }
        }
    }
  } else {
    // Strictly decreasing linear curves: h_i(cell, k) = b_cell f_i (1 - k/N).
    RngStream crng = rng.substream(1);
    std::vector<double> cell_strength(cells);
    for (double& b : cell_strength)
      b = cfg.congestion_strength * (0.5 + 0.5 * crng.uniform01());
    data->curves.assign(N, std::vector<double>(cells * (N + 1)));
    for (std::size_t i = 0; i < N; ++i) {
      const double factor = 1.0 + cfg.heterogeneity * crng.uniform(-1.0, 1.0);
      for (std::size_t cell = 0; cell < cells; ++cell) {
        const double slope = std::min(cell_strength[cell] * factor, 1.0);
        for (std::size_t k = 0; k <= N; ++k)
          data->curves[i][cell * (N + 1) + k] =
              slope * (1.0 - static_cast<double>(k) / static_cast<double>(N));
      }
    }
  }

  if (!cfg.base_rewards.empty()) {
    if (cfg.base_rewards.size() != N)
      throw std::invalid_argument("congestion: one base reward row per agent");
    data->base_rewards = cfg.base_rewards;
    for (const auto& row : data->base_rewards) {
      if (row.size() != cells)
        throw std::invalid_argument("congestion: base reward row has the wrong shape");
      for (double r : row)
        if (r < 0 || r > 1)
          throw std::invalid_argument("congestion: base rewards must sit inside [0,1]");
    }
  } else {
    RngStream rrng = rng.substream(2);
    std::vector<double> shared(cells);
    for (double& r : shared) r = rrng.uniform(0.2, 0.8);
    data->base_rewards.assign(N, std::vector<double>(cells));
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t cell = 0; cell < cells; ++cell)
        data->base_rewards[i][cell] =
            std::clamp(shared[cell] + cfg.heterogeneity * rrng.uniform(-1.0, 1.0), 0.0, 1.0);
  }
  data->finalize_means();
  return data;
}

class CongestionGame final : public DynamicGame {
 public:
  explicit CongestionGame(std::shared_ptr<const CongestionData> data) : data_(std::move(data)) {}

  std::size_t num_agents() const override { return data_->cfg.num_agents; }
  std::size_t horizon() const override { return data_->cfg.horizon; }
  const StateSpace& states() const override { return data_->states; }
  const ActionSpace& actions() const override { return data_->actions; }
  std::span<const double> initial_state_dist() const override { return data_->rho0; }

  void transition(std::size_t, std::size_t s, std::size_t a, const CountTable&,
                  std::span<double> out) const override {
    const std::size_t row = s * data_->cfg.n_actions + a;
    for (std::size_t sp = 0; sp < data_->cfg.n_states; ++sp)
      out[sp] = data_->transition[row * data_->cfg.n_states + sp];
  }

  double reward(std::size_t agent, std::size_t s, std::size_t a,
                const CountTable& others) const override {
    const std::size_t cell = s * data_->cfg.n_actions + a;
    const std::size_t occupancy = others.at(s, a) + 1;  // the agent counts itself
    return data_->curve_at(agent, cell, occupancy) + data_->base_rewards[agent][cell];
  }

  RewardBounds reward_bounds() const override { return {0.0, 2.0}; }

 private:
  std::shared_ptr<const CongestionData> data_;
};

class CongestionMeanField final : public MeanFieldGame {
 public:
  explicit CongestionMeanField(std::shared_ptr<const CongestionData> data)
      : data_(std::move(data)) {}

  std::size_t horizon() const override { return data_->cfg.horizon; }
  const StateSpace& states() const override { return data_->states; }
  const ActionSpace& actions() const override { return data_->actions; }
  std::span<const double> initial_state_dist() const override { return data_->rho0; }

  void transition(std::size_t s, std::size_t a, const PopulationDistribution&,
                  std::span<double> out) const override {
    const std::size_t row = s * data_->cfg.n_actions + a;
    for (std::size_t sp = 0; sp < data_->cfg.n_states; ++sp)
      out[sp] = data_->transition[row * data_->cfg.n_states + sp];
  }

  double reward(std::size_t s, std::size_t a, const PopulationDistribution& mu) const override {
    const std::size_t cell = s * data_->cfg.n_actions + a;
    const std::size_t N = data_->cfg.num_agents;
    // Linear interpolation of the mean occupancy curve at N * mu(s,a).
    const double scaled = mu.at(s, a) * static_cast<double>(N);
    const std::size_t lo = static_cast<std::size_t>(std::min(std::floor(scaled),
                                                             static_cast<double>(N)));
    const std::size_t hi = std::min<std::size_t>(lo + 1, N);
    const double frac = scaled - static_cast<double>(lo);
    const double h_lo = data_->mean_curve[cell * (N + 1) + lo];
    const double h_hi = data_->mean_curve[cell * (N + 1) + hi];
    const double h = lo == hi ? h_lo : (1.0 - frac) * h_lo + frac * h_hi;
    return h + data_->mean_base[cell];
  }

  RewardBounds reward_bounds() const override { return {0.0, 2.0}; }

 private:
  std::shared_ptr<const CongestionData> data_;
};

json congestion_to_json(const CongestionData& data) {
  json j = base_header("congestion");
  const CongestionConfig& cfg = data.cfg;
  j["config"] = {{"num_agents", cfg.num_agents}, {"horizon", cfg.horizon},
                 {"n_states", cfg.n_states},     {"n_actions", cfg.n_actions},
                 {"congestion_strength", cfg.congestion_strength},
                 {"heterogeneity", cfg.heterogeneity},
                 {"seed", cfg.seed}};
  j["draws"] = {{"transition", data.transition},
                {"curves", data.curves},
                {"base_rewards", data.base_rewards}};
  return j;
}

EnvironmentPair congestion_pair(std::shared_ptr<const CongestionData> data) {
  EnvironmentPair env;
  env.kind = "congestion";
  env.game = std::make_shared<CongestionGame>(data);
  env.companion = std::make_shared<CongestionMeanField>(data);
  env.description_json = congestion_to_json(*data).dump(2);
  return env;
}

CongestionConfig congestion_config_from_json(const json& c) {
  CongestionConfig cfg;
  cfg.num_agents = require(c, "num_agents").get<std::size_t>();
  cfg.horizon = require(c, "horizon").get<std::size_t>();
  cfg.n_states = require(c, "n_states").get<std::size_t>();
  cfg.n_actions = require(c, "n_actions").get<std::size_t>();
  cfg.congestion_strength = c.value("congestion_strength", 0.8);
  cfg.heterogeneity = c.value("heterogeneity", 0.05);
  cfg.seed = c.value("seed", std::uint64_t{0});
  return cfg;
}

// ---------------------------------------------------------------------------
// Exactly symmetric control fixture

struct SymmetricTestData {
  SymmetricTestConfig cfg;
  StateSpace states;
  ActionSpace actions;
  std::vector<double> rho0;
  std::vector<double> base_kernel;   // (S*A) x S, row-stochastic
  std::vector<double> base_reward;   // S*A in [0,1]
  std::vector<double> reward_weights;  // (S*A) x (S*A) in [-1,1]

  // Shared kernels as functions of a population distribution.
  void limit_transition(std::size_t s, std::size_t a, std::span<const double> mu_weights,
                        std::span<double> out) const {
    const std::size_t S = cfg.n_states;
    const std::size_t A = cfg.n_actions;
    const std::size_t row = s * A + a;
    const double gamma = cfg.transition_coupling;
    for (std::size_t sp = 0; sp < S; ++sp) {
      double state_mass = 0;
      for (std::size_t ac = 0; ac < A; ++ac) state_mass += mu_weights[sp * A + ac];
      out[sp] = (base_kernel[row * S + sp] + gamma * state_mass) / (1.0 + gamma);
    }
  }

  double limit_reward(std::size_t s, std::size_t a, std::span<const double> mu_weights) const {
    const std::size_t cells = cfg.n_states * cfg.n_actions;
    const std::size_t row = s * cfg.n_actions + a;
    double coupling = 0;
    for (std::size_t c = 0; c < cells; ++c)
      coupling += reward_weights[row * cells + c] * mu_weights[c];
    return base_reward[row] + cfg.reward_coupling * coupling;
  }
};

std::shared_ptr<SymmetricTestData> symmetric_test_data(const SymmetricTestConfig& cfg) {
  if (cfg.num_agents < 2) throw std::invalid_argument("symmetric test: need at least two agents");
  auto data = std::make_shared<SymmetricTestData>();
  data->cfg = cfg;
  data->states.size = cfg.n_states;
  data->actions.size = cfg.n_actions;
  data->rho0 = uniform_dist(cfg.n_states);
  const std::size_t cells = cfg.n_states * cfg.n_actions;
  RngStream rng(cfg.seed, 0);
  data->base_kernel.resize(cells * cfg.n_states);
  for (std::size_t row = 0; row < cells; ++row) {
    double sum = 0;
    for (std::size_t sp = 0; sp < cfg.n_states; ++sp) {
      const double x = 0.1 + rng.uniform01();
      data->base_kernel[row * cfg.n_states + sp] = x;
      sum += x;
    }
    for (std::size_t sp = 0; sp < cfg.n_states; ++sp)
      data->base_kernel[row * cfg.n_states + sp] /= sum;
  }
  data->base_reward.resize(cells);
  for (double& r : data->base_reward) r = rng.uniform01();
  data->reward_weights.resize(cells * cells);
  for (double& w : data->reward_weights) w = rng.uniform(-1.0, 1.0);
  return data;
}

class SymmetricTestGame final : public DynamicGame {
 public:
  explicit SymmetricTestGame(std::shared_ptr<const SymmetricTestData> data)
      : data_(std::move(data)) {}

  std::size_t num_agents() const override { return data_->cfg.num_agents; }
  std::size_t horizon() const override { return data_->cfg.horizon; }
  const StateSpace& states() const override { return data_->states; }
  const ActionSpace& actions() const override { return data_->actions; }
  std::span<const double> initial_state_dist() const override { return data_->rho0; }

  void transition(std::size_t, std::size_t s, std::size_t a, const CountTable& others,
                  std::span<double> out) const override {
    data_->limit_transition(s, a, opponent_weights(others), out);
  }

  double reward(std::size_t, std::size_t s, std::size_t a,
                const CountTable& others) const override {
    return data_->limit_reward(s, a, opponent_weights(others));
  }

  RewardBounds reward_bounds() const override {
    return {-data_->cfg.reward_coupling, 1.0 + data_->cfg.reward_coupling};
  }

 private:
  std::vector<double> opponent_weights(const CountTable& others) const {
    std::vector<double> w(others.n_cells());
    const double total = static_cast<double>(data_->cfg.num_agents - 1);
    for (std::size_t c = 0; c < w.size(); ++c)
      w[c] = static_cast<double>(others[c]) / total;
    return w;
  }

  std::shared_ptr<const SymmetricTestData> data_;
};

class SymmetricTestMeanField final : public MeanFieldGame {
 public:
  explicit SymmetricTestMeanField(std::shared_ptr<const SymmetricTestData> data)
      : data_(std::move(data)) {}

  std::size_t horizon() const override { return data_->cfg.horizon; }
  const StateSpace& states() const override { return data_->states; }
  const ActionSpace& actions() const override { return data_->actions; }
  std::span<const double> initial_state_dist() const override { return data_->rho0; }

  void transition(std::size_t s, std::size_t a, const PopulationDistribution& mu,
                  std::span<double> out) const override {
    data_->limit_transition(s, a, mu.weights(), out);
  }

  double reward(std::size_t s, std::size_t a, const PopulationDistribution& mu) const override {
    return data_->limit_reward(s, a, mu.weights());
  }

  RewardBounds reward_bounds() const override {
    return {-data_->cfg.reward_coupling, 1.0 + data_->cfg.reward_coupling};
  }

 private:
  std::shared_ptr<const SymmetricTestData> data_;
};

json symmetric_test_to_json(const SymmetricTestData& data) {
  json j = base_header("symmetric-test");
  const SymmetricTestConfig& cfg = data.cfg;
  j["config"] = {{"num_agents", cfg.num_agents}, {"horizon", cfg.horizon},
                 {"n_states", cfg.n_states},     {"n_actions", cfg.n_actions},
                 {"transition_coupling", cfg.transition_coupling},
                 {"reward_coupling", cfg.reward_coupling},
                 {"seed", cfg.seed}};
  return j;
}

SymmetricTestConfig symmetric_test_config_from_json(const json& c) {
  SymmetricTestConfig cfg;
  cfg.num_agents = require(c, "num_agents").get<std::size_t>();
  cfg.horizon = require(c, "horizon").get<std::size_t>();
  cfg.n_states = require(c, "n_states").get<std::size_t>();
  cfg.n_actions = require(c, "n_actions").get<std::size_t>();
  cfg.transition_coupling = c.value("transition_coupling", 0.5);
  cfg.reward_coupling = c.value("reward_coupling", 0.5);
  cfg.seed = c.value("seed", std::uint64_t{0});
  return cfg;
}

}  // namespace

double CrowdCostSpec::max_abs() const { return CrowdCostSpecMaxAbs(*this); }

EnvironmentPair make_arps(const ArpsConfig& cfg) {
  return arps_pair(arps_data(cfg, nullptr, nullptr, nullptr));
}

EnvironmentPair make_asis(const AsisConfig& cfg) {
  return asis_pair(asis_data(cfg, nullptr, nullptr, nullptr));
}

EnvironmentPair make_congestion(const CongestionConfig& cfg) {
  return congestion_pair(congestion_data(cfg));
}

EnvironmentPair make_symmetric_test(const SymmetricTestConfig& cfg) {
  auto data = symmetric_test_data(cfg);
  EnvironmentPair env;
  env.kind = "symmetric-test";
  env.game = std::make_shared<SymmetricTestGame>(data);
  env.companion = std::make_shared<SymmetricTestMeanField>(data);
  env.description_json = symmetric_test_to_json(*data).dump(2);
  return env;
}

EnvironmentPair build_environment_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.value("format", "symmfg-env") != "symmfg-env")
    throw std::invalid_argument("environment description: unknown format tag");
  if (j.value("version", kFormatVersion) != kFormatVersion)
    throw std::invalid_argument("environment description: unsupported version");
  const std::string type = require(j, "type").get<std::string>();
  const json cfg_json = require(j, "config");

  if (type == "arps") {
    ArpsConfig cfg = arps_config_from_json(cfg_json);
    if (j.contains("draws")) {
      const json& d = j.at("draws");
      std::vector<std::array<double, 3>> u, v;
      for (const auto& row : d.at("u")) u.push_back({row.at(0), row.at(1), row.at(2)});
      for (const auto& row : d.at("v")) v.push_back({row.at(0), row.at(1), row.at(2)});
      std::vector<double> c = d.at("c").get<std::vector<double>>();
      if (u.size() != cfg.num_agents || v.size() != cfg.num_agents || c.size() != cfg.num_agents)
        throw std::invalid_argument("arps: draw arrays must cover every agent");
      return arps_pair(arps_data(cfg, &u, &v, &c));
    }
    return make_arps(cfg);
  }
  if (type == "asis") {
    AsisConfig cfg = asis_config_from_json(cfg_json);
    if (j.contains("draws")) {
      const json& d = j.at("draws");
      auto alpha = d.at("susceptibility").get<std::vector<double>>();
      auto theta = d.at("healing").get<std::vector<double>>();
      auto xi = d.at("aversion").get<std::vector<double>>();
      if (alpha.size() != cfg.num_agents)
        throw std::invalid_argument("asis: draw arrays must cover every agent");
      return asis_pair(asis_data(cfg, &alpha, &theta, &xi));
    }
    return make_asis(cfg);
  }
  if (type == "congestion") {
    CongestionConfig cfg = congestion_config_from_json(cfg_json);
    if (j.contains("draws")) {
      const json& d = j.at("draws");
      cfg.transition = d.at("transition").get<std::vector<double>>();
      cfg.curves = d.at("curves").get<std::vector<std::vector<double>>>();
      cfg.base_rewards = d.at("base_rewards").get<std::vector<std::vector<double>>>();
    }
    return make_congestion(cfg);
  }
  if (type == "symmetric-test") {
    return make_symmetric_test(symmetric_test_config_from_json(cfg_json));
  }
  throw std::invalid_argument("unknown environment type '" + type + "'");
}

EnvironmentPair load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open environment file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return build_environment_from_json(buffer.str());
}

void dump_environment(const EnvironmentPair& env, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write environment file '" + path + "'");
  out << env.description_json << "\n";
}

}  // namespace symmfg
