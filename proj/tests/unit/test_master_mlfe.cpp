#include <gtest/gtest.h>

#include <cmath>

#include "locfield/local_field_ode.hpp"
#include "locfield/master_equation.hpp"
#include "locfield/mlfe.hpp"
#include "support/models.hpp"

using namespace locfield;
namespace tmod = testing_models;

namespace {

Graph single_edge() {
  const std::vector<std::pair<int, int>> e{{0, 1}};
  return Graph::from_edges(2, e);
}

}  // namespace

TEST(MasterEquation, SingleVertexPureDeath) {
  const auto grid = uniform_grid(5.0, 0.5);
  const auto sol = exact_master_equation(Graph(1), tmod::pure_death(), std::vector<double>{1, 0}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(sol.average[i][0], std::exp(-grid[i]), 1e-6);
}

TEST(MasterEquation, ZeroRatesKeepTheLaw) {
  const std::vector<std::pair<int, int>> e{{0, 1}, {1, 2}, {2, 3}};
  const auto g = Graph::from_edges(4, e);
  const auto q = tmod::spread_marginal(3);
  const auto sol = exact_master_equation(g, tmod::zero_rates(3), q, uniform_grid(2.0, 1.0));
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    for (std::size_t s = 0; s < sol.joint[i].size(); ++s) EXPECT_NEAR(sol.joint[i][s], sol.joint[0][s], 1e-15);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(sol.average[i][a], q[a], 1e-15);
  }
}

TEST(MasterEquation, CompetingExponentialsOnAnEdge) {
  // Infected vertex 0 infects vertex 1 before recovering with probability 1/2.
  SolverOptions tight;
  tight.atol = 1e-12;
  tight.rtol = 1e-10;
  const std::vector<std::vector<double>> init{{0, 1, 0}, {1, 0, 0}};
  const std::vector<double> times{0.0, 40.0};
  const auto sol = exact_master_equation(single_edge(), tmod::sir(1.0, 1.0), init, times, {6, 1'000'000, tight, false});
  EXPECT_NEAR(sol.per_vertex.back()[1][0], 0.5, 1e-8);
  EXPECT_NEAR(sol.per_vertex.back()[0][2], 1.0, 1e-8);
}

TEST(MasterEquation, Caps) {
  const auto m = tmod::sir();
  const auto grid = uniform_grid(1.0, 0.5);
  EXPECT_THROW(exact_master_equation(Graph(7), m, std::vector<double>{1, 0, 0}, grid), ModelError);
  MasterEquationOptions small;
  small.max_states = 26;
  EXPECT_THROW(exact_master_equation(Graph(3), m, std::vector<double>{1, 0, 0}, grid, small), ModelError);
  EXPECT_THROW(exact_master_equation(Graph(2), m, std::vector<std::vector<double>>{{1, 0, 0}}, grid), ModelError);
}

TEST(Mlfe, ZeroRatesKeepTheSample) {
  const auto p0 = build_initial_law(DegreeDistribution::point_mass(2), tmod::spread_marginal(3));
  const auto res = mlfe_ensemble(tmod::zero_rates(3), p0, uniform_grid(1.0, 0.25), 1, {4000});
  for (const auto& law : res.laws) EXPECT_EQ(law, res.laws.front());
  for (std::size_t c = 0; c < p0.size(); ++c) {
    EXPECT_NEAR(res.laws.front()[c], p0[c], 4 * std::sqrt(p0[c] * (1 - p0[c]) / 4000) + 1e-12);
  }
}

TEST(Mlfe, RootOnlyMatchesMasterEquation) {
  const auto grid = uniform_grid(3.0, 0.5);
  const auto exact = exact_master_equation(Graph(1), tmod::pure_death(), std::vector<double>{1, 0}, grid);
  const auto p0 = build_initial_law(DegreeDistribution::point_mass(0), std::vector<double>{1, 0});
  const std::size_t n = 10'000;
  const auto res = mlfe_ensemble(tmod::pure_death(), p0, grid, 2, {n});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double p = exact.average[i][0];
    EXPECT_NEAR(res.marginals[i][0], p, 3 * std::sqrt(p * (1 - p) / n) + 1e-12) << "t=" << grid[i];
  }
}

TEST(Mlfe, SirDegreeTwoMatchesOde) {
  const auto m = tmod::sir();
  const auto p0 = build_initial_law(DegreeDistribution::point_mass(2), std::vector<double>{0.9, 0.1, 0.0});
  const std::vector<double> times{0.0, 1.0};
  const auto ode = integrate(m, p0, times).marginals();
  const auto res = mlfe_ensemble(m, p0, times, 3);
  EXPECT_LE(total_variation(res.marginals.back(), ode.back()), 0.02);
}

TEST(Mlfe, ThreadCountDoesNotChangeResults) {
  const auto m = tmod::seizure();
  const auto p0 = build_initial_law(DegreeDistribution::from_pmf({{2, 0.5}, {3, 0.5}}),
                                    std::vector<double>{0.285, 0.665, 0.015, 0.035, 0, 0});
  const auto times = uniform_grid(1.0, 0.5);
  MlfeOptions one{2000}, many{2000};
  one.dt = many.dt = 1e-3;
  many.threads = 3;
  const auto a = mlfe_ensemble(m, p0, times, 4, one);
  const auto b = mlfe_ensemble(m, p0, times, 4, many);
  EXPECT_EQ(a.laws, b.laws);
  const auto c = mlfe_ensemble(m, p0, times, 5, one);
  EXPECT_NE(a.laws.back(), c.laws.back());
}

TEST(Mlfe, Preconditions) {
  const auto m = tmod::sir();
  const auto p0 = build_initial_law(DegreeDistribution::point_mass(3), std::vector<double>{0.9, 0.1, 0.0});
  const std::vector<double> times{0.0, 1.0};
  EXPECT_THROW(mlfe_ensemble(m, p0, times, 1, {999}), ConfigError);
  MlfeOptions coarse;
  coarse.dt = 0.1;
  EXPECT_THROW(mlfe_ensemble(m, p0, times, 1, coarse), ConfigError);
  EXPECT_THROW(mlfe_ensemble(m, p0, std::vector<double>{0.0, 0.0005}, 1, {1000}), ConfigError);
  EXPECT_THROW(mlfe_ensemble(m, p0, std::vector<double>{}, 1), ConfigError);
  MlfeOptions loose{100};
  loose.dt = 0.1;
  loose.enforce_limits = false;
  EXPECT_NO_THROW(mlfe_ensemble(m, p0, times, 1, loose));
}

TEST(Mlfe, FiniteDifferenceMatchesRhs) {
  const auto m = tmod::sir();
  const auto p0 = build_initial_law(DegreeDistribution::point_mass(2), std::vector<double>{0.7, 0.3, 0.0});
  const double h = 0.01;
  const std::vector<double> times{0.0, h};
  const std::size_t nc = p0.size();
  // Bias of the forward difference itself, measured on the ODE solution.
  const auto exact = integrate(m, p0, times, {{1e-12, 1e-10}});
  const auto rhs0 = ode_rhs(m, 0.0, p0);
  std::vector<double> bias(nc);
  for (std::size_t c = 0; c < nc; ++c) bias[c] = std::abs((exact.laws[1][c] - exact.laws[0][c]) / h - rhs0[c]);

  const int runs = 20;
  std::vector<std::vector<double>> err(runs, std::vector<double>(nc));
  for (int r = 0; r < runs; ++r) {
    const auto res = mlfe_ensemble(m, p0, times, 100 + r, {100'000});
    const auto rhs = ode_rhs(m, 0.0, LawVector(p0.space_ptr(), res.laws[0]));
    for (std::size_t c = 0; c < nc; ++c) err[r][c] = (res.laws[1][c] - res.laws[0][c]) / h - rhs[c];
  }
  for (std::size_t c = 0; c < nc; ++c) {
    double mean = 0.0, var = 0.0;
    for (int r = 0; r < runs; ++r) mean += err[r][c] / runs;
    for (int r = 0; r < runs; ++r) var += (err[r][c] - mean) * (err[r][c] - mean) / (runs - 1);
    const double sigma = std::sqrt(var);
    // single-run estimate and the average over runs
    EXPECT_LE(std::abs(err[0][c]), 3 * sigma + 2 * bias[c] + 1e-9) << "class " << c;
    EXPECT_LE(std::abs(mean), 3 * sigma / std::sqrt(runs) + 2 * bias[c] + 1e-9) << "class " << c;
  }
}
