#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "symmfg/mfg.hpp"
#include "symmfg/serialize.hpp"
#include "symmfg/sim.hpp"

using namespace symmfg;

TEST_CASE("policy text round trip is exact") {
  RngStream rng(70, 0);
  Policy pi(3, 2, 4);
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t s = 0; s < 2; ++s) pi.set_row(h, s, random_simplex_point(4, rng));
  Policy back = policy_from_text(policy_to_text(pi));
  CHECK(back == pi);

  CHECK_THROWS_AS(policy_from_text("garbage"), std::runtime_error);
  // Truncated tables are rejected.
  std::string text = policy_to_text(pi);
  text.erase(text.rfind('\n', text.size() - 2));
  CHECK_THROWS_AS(policy_from_text(text), std::runtime_error);
}

TEST_CASE("policy profile round trip") {
  RngStream rng(71, 0);
  std::vector<Policy> ps;
  for (int i = 0; i < 3; ++i) {
    Policy pi(2, 2, 2);
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t s = 0; s < 2; ++s) pi.set_row(h, s, random_simplex_point(2, rng));
    ps.push_back(pi);
  }
  auto back = policy_profile_from_text(policy_profile_to_text(ps));
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(back[i] == ps[i]);
}

TEST_CASE("qtable text round trip keeps tau and values") {
  QTable q(2, 2, 3, 0.12345678901234567);
  RngStream rng(72, 0);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t a = 0; a < 3; ++a) q.at(h, s, a) = rng.uniform(-5.0, 5.0);
  QTable back = qtable_from_text(qtable_to_text(q));
  CHECK(back.tau() == q.tau());
  for (std::size_t k = 0; k < q.raw().size(); ++k) CHECK(back.raw()[k] == q.raw()[k]);
}

TEST_CASE("grid function text round trip") {
  auto grid = std::make_shared<SimplexGrid>(2, 2, 3);
  RngStream rng(73, 0);
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < grid->size(); ++i)
    values.push_back({rng.uniform(-1.0, 1.0), rng.uniform01()});
  GridFunction g(grid, 2, values);
  GridFunction back = grid_function_from_text(grid_function_to_text(g));
  CHECK(back.grid().denominator() == 3);
  CHECK(back.output_dim() == 2);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    CHECK(back.value(i)[0] == g.value(i)[0]);
    CHECK(back.value(i)[1] == g.value(i)[1]);
  }
}

TEST_CASE("metric trace round trip including NaN fields") {
  MetricTrace trace;
  MetricRow row;
  row.epoch = 10;
  row.samples_consumed = 5000;
  row.mfg_exploitability = 0.125;
  row.wall_time_s = 1.5;
  trace.rows.push_back(row);
  row.epoch = 20;
  row.nplayer_exploitability_mean = 0.0625;
  row.nplayer_exploitability_stderr = 0.001953125;
  trace.rows.push_back(row);

  MetricTrace back = metric_trace_from_text(metric_trace_to_text(trace));
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].epoch == 10);
  CHECK(back.rows[0].mfg_exploitability == 0.125);
  CHECK(std::isnan(back.rows[0].nplayer_exploitability_mean));
  CHECK(back.rows[1].nplayer_exploitability_mean == 0.0625);
}

TEST_CASE("trajectory records format") {
  Trajectory t;
  t.states = {{1, 0}, {0, 1}};
  t.actions = {{0, 1}, {1, 0}};
  t.rewards = {{0.5, -0.25}, {1.0, 0.0}};
  std::ostringstream out;
  write_trajectory_header(out);
  append_trajectory_records(out, 7, t);
  const std::string text = out.str();
  CHECK(text.find("episode\tstep\tagent\tstate\taction\treward\n") == 0);
  CHECK(text.find("7\t0\t1\t0\t1\t-0.25") != std::string::npos);
  CHECK(text.find("7\t1\t0\t0\t1\t1") != std::string::npos);
}
