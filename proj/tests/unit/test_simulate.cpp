#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "locfield/simulate.hpp"
#include "support/models.hpp"

using namespace locfield;
namespace tmod = testing_models;

namespace {

Graph triangle() {
  const std::vector<std::pair<int, int>> e{{0, 1}, {0, 2}, {1, 2}};
  return Graph::from_edges(3, e);
}

Graph single_edge() {
  const std::vector<std::pair<int, int>> e{{0, 1}};
  return Graph::from_edges(2, e);
}

ModelSpec sis() {
  return ModelSpec(
      "sis", {{0, "S"}, {1, "I"}}, {1, -1},
      [](std::size_t j, double, int a, std::span<const double> c, int) {
        if (j == 0 && a == 0) return c[1];
        if (j == 1 && a == 1) return 1.0;
        return 0.0;
      },
      {{0, 1}, {1, 0}}, [](int d, double) { return std::max(d - 1.0, 1.0); });
}

}  // namespace

TEST(Simulate, ZeroRatesGiveEmptyLog) {
  Engine rng = make_stream(51);
  const auto log = simulate(triangle(), tmod::zero_rates(2), std::vector<int>{0, 1, 0}, 10.0, rng);
  EXPECT_TRUE(log.events.empty());
  EXPECT_EQ(log.initial, (std::vector<int>{0, 1, 0}));
}

TEST(Simulate, PureDeathSurvival) {
  Engine rng = make_stream(52);
  const Graph lone(1);
  const int runs = 100'000;
  int alive = 0;
  for (int r = 0; r < runs; ++r) {
    const auto log = simulate(lone, tmod::pure_death(), std::vector<int>{0}, 1.0, rng);
    alive += log.events.empty();
  }
  const double p = std::exp(-1.0), sigma = std::sqrt(p * (1 - p) / runs);
  EXPECT_NEAR(static_cast<double>(alive) / runs, p, 4 * sigma);
}

TEST(Simulate, FirstRecoveryOnInfectedEdge) {
  Engine rng = make_stream(53);
  const auto m = tmod::sir(3.0, 1.0);
  const int runs = 100'000;
  double sum = 0.0;
  for (int r = 0; r < runs; ++r) {
    const auto log = simulate(single_edge(), m, std::vector<int>{1, 1}, 50.0, rng);
    ASSERT_FALSE(log.events.empty());
    sum += log.events.front().time;
  }
  EXPECT_NEAR(sum / runs, 0.5, 4 * 0.5 / std::sqrt(runs));
}

TEST(Simulate, TimeVaryingRateThinning) {
  const ModelSpec m("pulse", {{0, "A"}, {1, "D"}}, {1},
                    [](std::size_t, double t, int a, std::span<const double>, int) {
                      return a == 0 ? 1.0 + std::sin(t) : 0.0;
                    },
                    {{0, 1}}, [](int, double) { return 2.0; });
  Engine rng = make_stream(54);
  const int runs = 20'000;
  std::vector<double> death;
  for (int r = 0; r < runs; ++r) {
    const auto log = simulate(Graph(1), m, std::vector<int>{0}, 3.0, rng);
    death.push_back(log.events.empty() ? 1e9 : log.events.front().time);
  }
  for (double t : {0.5, 1.0, 2.0, 3.0}) {
    const double p = std::exp(-(t + 1.0 - std::cos(t)));
    const double emp = static_cast<double>(std::count_if(death.begin(), death.end(), [&](double s) { return s > t; })) / runs;
    EXPECT_NEAR(emp, p, 4 * std::sqrt(p * (1 - p) / runs)) << "t=" << t;
  }
}

TEST(EmpiricalMeasure, Examples) {
  const auto m = tmod::sir();
  const EventLog quiet{{0, 0, 0}, {}, 5.0};
  EXPECT_EQ(empirical_measure(quiet, m, 3.3).dist, (std::vector<double>{1, 0, 0}));
  const EventLog mixed{{0, 0, 1, 2}, {}, 1.0};
  EXPECT_EQ(empirical_measure(mixed, m, 0.0).dist, (std::vector<double>{0.5, 0.25, 0.25}));
}

TEST(EmpiricalMeasure, RightContinuousAtEventTimes) {
  const auto m = tmod::sir();
  const EventLog log{{0, 1}, {{0.5, 0, 1}, {0.75, 1, 1}}, 1.0};
  EXPECT_EQ(state_at(log, m, 0.4999), (std::vector<int>{0, 1}));
  EXPECT_EQ(state_at(log, m, 0.5), (std::vector<int>{1, 1}));
  EXPECT_EQ(state_at(log, m, 0.75), (std::vector<int>{1, 2}));
  const std::vector<double> grid{0.0, 0.5, 0.6, 0.75, 1.0};
  const auto on_grid = marginals_on_grid(log, m, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(on_grid[i].dist, empirical_measure(log, m, grid[i]).dist);
}

TEST(NeighborhoodMeasure, Examples) {
  const auto m = tmod::sir();
  const auto all_s = neighborhood_empirical_measure(triangle(), std::vector<int>{0, 0, 0}, 2);
  ASSERT_EQ(all_s.size(), 1u);
  EXPECT_EQ(all_s.begin()->first, parse_config_string("S|S,S", m, 2));
  EXPECT_EQ(all_s.begin()->second, 1.0);

  const auto edge = neighborhood_empirical_measure(single_edge(), std::vector<int>{0, 1}, 1);
  ASSERT_EQ(edge.size(), 2u);
  EXPECT_EQ(edge.at(parse_config_string("S|I", m, 1)), 0.5);
  EXPECT_EQ(edge.at(parse_config_string("I|S", m, 1)), 0.5);

  const auto padded = neighborhood_empirical_measure(single_edge(), std::vector<int>{0, 1}, 3);
  EXPECT_EQ(padded.at(parse_config_string("S|I,*,*", m, 3)), 0.5);
  EXPECT_THROW(neighborhood_empirical_measure(triangle(), std::vector<int>{0, 0, 0}, 1), GraphError);

  const EventLog log{{0, 1}, {{0.5, 0, 1}}, 1.0};
  const auto later = neighborhood_empirical_measure(single_edge(), log, m, 0.5, 1);
  EXPECT_EQ(later.at(parse_config_string("I|I", m, 1)), 1.0);
}

TEST(Simulate, SeedDeterminism) {
  Engine g_rng = make_stream(55);
  const auto g = sample_configuration_model(std::vector<int>(60, 3), g_rng);
  const auto m = tmod::seizure();
  std::vector<int> seizure_init(60);
  for (int v = 0; v < 60; ++v) seizure_init[v] = v % 7 == 0 ? 3 : v % 3 == 0 ? 0 : 1;
  Engine a = make_stream(9, 1), b = make_stream(9, 1), c = make_stream(9, 2);
  const auto la = simulate(g, m, seizure_init, 5.0, a);
  const auto lb = simulate(g, m, seizure_init, 5.0, b);
  const auto lc = simulate(g, m, seizure_init, 5.0, c);
  EXPECT_EQ(la, lb);
  EXPECT_NE(la, lc);
  std::ostringstream sa, sb;
  write_event_log_csv(sa, la);
  write_event_log_csv(sb, lb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, 16), "time,vertex,jump");
}

TEST(Simulate, JumpCountBoundedByStateCount) {
  Engine rng = make_stream(56);
  const auto g = sample_configuration_model(std::vector<int>(40, 3), rng);
  for (const auto& m : tmod::catalog()) {
    for (int run = 0; run < 20; ++run) {
      std::vector<int> init(40);
      for (auto& a : init) a = static_cast<int>(uniform_index(rng, m.num_states()));
      const auto log = simulate(g, m, init, 20.0, rng);
      std::vector<int> jumps(40, 0);
      for (const auto& e : log.events) ++jumps[e.vertex];
      for (int k : jumps) EXPECT_LE(k, m.num_states() - 1) << m.name();
      for (std::size_t i = 1; i < log.events.size(); ++i) EXPECT_LE(log.events[i - 1].time, log.events[i].time);
    }
  }
}

TEST(Simulate, EnvelopeViolationIsAnError) {
  const ModelSpec greedy("greedy", {{0, "S"}, {1, "I"}}, {1},
                         [](std::size_t, double, int a, std::span<const double> c, int) {
                           return a == 0 ? 2.0 * c[1] : 0.0;
                         },
                         {{0, 1}}, [](int d, double) { return d - 1.0; });
  Engine rng = make_stream(57);
  try {
    simulate(single_edge(), greedy, std::vector<int>{0, 1}, 100.0, rng);
    FAIL() << "expected a model error";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("envelope"), std::string::npos);
  }
}

TEST(Simulate, LeavingTheStateSpaceIsAnError) {
  const ModelSpec leaky("leaky", {{0, "A"}, {1, "B"}}, {1},
                        [](std::size_t, double, int, std::span<const double>, int) { return 1.0; },
                        {{0, 1}}, [](int, double) { return 1.0; });
  Engine rng = make_stream(58);
  EXPECT_THROW(simulate(Graph(1), leaky, std::vector<int>{1}, 100.0, rng), ModelError);
}

TEST(Simulate, CyclicModels) {
  Engine rng = make_stream(59);
  EXPECT_THROW(simulate(single_edge(), sis(), std::vector<int>{0, 1}, 1.0, rng), ModelError);
  const auto log = simulate(single_edge(), sis(), std::vector<int>{0, 1}, 20.0, rng, {true});
  EXPECT_FALSE(log.events.empty());
}

TEST(Simulate, InputErrors) {
  Engine rng = make_stream(60);
  EXPECT_THROW(simulate(triangle(), tmod::sir(), std::vector<int>{0, 0}, 1.0, rng), ModelError);
  EXPECT_THROW(simulate(triangle(), tmod::sir(), std::vector<int>{0, 0, 7}, 1.0, rng), ModelError);
  EXPECT_THROW(simulate(triangle(), tmod::sir(), std::vector<int>{0, 0, 0}, -1.0, rng), ModelError);
}
