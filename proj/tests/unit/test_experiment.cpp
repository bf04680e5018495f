#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "locfield/experiment.hpp"

using namespace locfield;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = LOCFIELD_SOURCE_DIR;

std::string sir_doc(const std::string& extra = "") {
  return R"({"schema_version": 1, "name": "t",
             "model": {"name": "sir", "params": {"beta": 1, "gamma": 0.5}},
             "graph": {"theta": {"3": 1.0}, "n": 50},
             "initial": {"q": {"S": 0.9, "I": 0.1}},
             "horizon": 2, "replicas": 4, "seed": 1, "grid_step": 0.5)" +
         extra + "}";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("locfield_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LOCFIELD_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Experiment, ParsesDefaultsAndOverrides) {
  const auto spec = parse_experiment(sir_doc(R"(, "mlfe": {"copies": 2000, "dt": 0.002},
      "solver": {"atol": 1e-10}, "mean_field": {"closure": "complete_graph"})"));
  EXPECT_EQ(spec.name, "t");
  EXPECT_EQ(spec.model.num_states(), 3);
  EXPECT_EQ(spec.q, (std::vector<double>{0.9, 0.1, 0.0}));
  EXPECT_EQ(spec.grid(), (std::vector<double>{0, 0.5, 1, 1.5, 2}));
  EXPECT_EQ(spec.mlfe_copies, 2000u);
  EXPECT_EQ(spec.mlfe_dt, 0.002);
  EXPECT_EQ(spec.solver.atol, 1e-10);
  EXPECT_EQ(spec.closure, MeanFieldClosure::complete_graph);
  EXPECT_EQ(solve_theta(spec), DegreeDistribution::point_mass(3));
}

TEST(Experiment, ParseErrors) {
  const std::vector<std::string> bad{
      R"({"schema_version": 2})",
      R"({"schema_version": 1, "name": "a/b"})",
      sir_doc().substr(0, 40),
  };
  for (const auto& text : bad) EXPECT_THROW(parse_experiment(text), ConfigError) << text;

  auto with = [](const std::string& from, const std::string& to) {
    auto doc = sir_doc();
    const auto at = doc.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return doc.replace(at, from.size(), to);
  };
  const std::vector<std::string> edits{
      with(R"("S": 0.9, "I": 0.1)", R"("S": 0.9, "I": 0.2)"),
      with(R"("S": 0.9, "I": 0.1)", R"("S": 0.9, "Q": 0.1)"),
      with(R"("horizon": 2)", R"("horizon": 0)"),
      with(R"("replicas": 4)", R"("replicas": 0)"),
      with(R"({"3": 1.0})", R"({"x": 1.0})"),
      with(R"({"3": 1.0})", R"({"3": 0.5})"),
      with(R"("n": 50)", R"("n": 50, "matching": "loose")"),
      with(R"("n": 50)", R"("n": 50, "degrees": [1, 1])"),
      with(R"("theta": {"3": 1.0}, "n": 50)", R"("degrees": [3, 1])"),
      with(R"("theta": {"3": 1.0}, "n": 50)", R"("edge_list": "missing.txt")"),
      with(R"("grid_step": 0.5)", R"("grid_step": -1)"),
      with(R"("model")", R"("model_file": "x.json", "model")"),
      with(R"({"q": {"S": 0.9, "I": 0.1}})", R"({})"),
  };
  for (const auto& text : edits) EXPECT_THROW(parse_experiment(text), ConfigError) << text;
  EXPECT_THROW(parse_experiment(sir_doc(R"(, "mean_field": {"closure": "x"})")), ConfigError);
}

TEST(Experiment, EdgeListSourceGivesEmpiricalDegreeLaw) {
  const auto spec = load_experiment((kSource / "configs/experiments/sir_petersen.json").string());
  EXPECT_EQ(spec.graph.kind, GraphSource::Kind::edge_list);
  EXPECT_EQ(spec.graph.graph.size(), 10u);
  EXPECT_EQ(solve_theta(spec), DegreeDistribution::point_mass(3));
  const auto via_file = run_solve(spec);
  const auto direct = integrate(spec.model, DegreeDistribution::point_mass(3), spec.q, spec.grid());
  ASSERT_EQ(via_file.laws.size(), direct.laws.size());
  for (std::size_t i = 0; i < direct.laws.size(); ++i) EXPECT_EQ(via_file.laws[i], direct.laws[i]);
  Engine rng = make_stream(1);
  EXPECT_EQ(replica_graph(spec.graph, rng), spec.graph.graph);
}

TEST(Experiment, ZeroRatesKeepEveryReplicaConstant) {
  const auto spec = parse_experiment(R"({"schema_version": 1, "name": "still",
      "model": {"custom": "still", "states": [{"code": 0, "label": "A"}, {"code": 1, "label": "B"}],
                "jumps": [1], "rates": [], "rate_bound": "0"},
      "graph": {"degrees": [1, 1, 2, 2, 2, 2]},
      "initial": {"q": {"A": 0.3, "B": 0.7}},
      "horizon": 3, "replicas": 1, "seed": 5, "grid_step": 1})");
  const auto sim = run_simulation(spec);
  ASSERT_EQ(sim.mean.size(), 4u);
  for (const auto& mu : sim.mean) EXPECT_EQ(mu, sim.mean.front());
  EXPECT_NEAR(sim.mean.front()[0] * 6.0, std::round(sim.mean.front()[0] * 6.0), 1e-12);
  for (const auto& row : sim.stderr_) EXPECT_EQ(row, (std::vector<double>{0, 0}));
}

TEST(Experiment, RootOnlySolveIsExponentialDecay) {
  const auto spec = load_experiment((kSource / "configs/experiments/pure_death_root_only.json").string());
  const auto ode = run_solve(spec).marginals();
  const auto grid = spec.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(ode[i][0], std::exp(-grid[i]), 1e-6);
  const auto sim = run_simulation(spec);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(sim.mean[i][0], ode[i][0], 4 * sim.stderr_[i][0] + 1e-12) << "t=" << grid[i];
  }
}

TEST(Experiment, StandardErrorShrinksWithReplicas) {
  auto spec = load_experiment((kSource / "configs/experiments/pure_death_root_only.json").string());
  spec.graph.n = 100;
  spec.replicas = 100;
  const auto small = run_simulation(spec);
  spec.replicas = 400;
  spec.seed = 77;
  const auto large = run_simulation(spec);
  for (std::size_t i = 1; i < small.times.size(); ++i) {
    const double ratio = small.stderr_[i][0] / large.stderr_[i][0];
    EXPECT_NEAR(ratio, 2.0, 0.4) << "t=" << small.times[i];
  }
}

TEST(Experiment, SimulationIsDeterministicAcrossThreadCounts) {
  auto spec = parse_experiment(sir_doc());
  spec.replicas = 12;
  const auto a = run_simulation(spec, {1, true});
  const auto b = run_simulation(spec, {3, true});
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stderr_, b.stderr_);
  EXPECT_EQ(a.neighborhood, b.neighborhood);
  spec.seed = 2;
  EXPECT_NE(run_simulation(spec).mean, a.mean);
}

TEST(Experiment, NeighborhoodInitialLaw) {
  const auto spec = parse_experiment(R"({"schema_version": 1, "name": "nb",
      "model": {"name": "sir", "params": {"beta": 1, "gamma": 0.5}}, "graph": {"theta": {"1": 1.0}, "n": 10},
      "initial": {"law": {"I|S": 0.5, "S|I": 0.5}}, "horizon": 1, "seed": 1})");
  const auto p = initial_law(spec, solve_theta(spec));
  EXPECT_EQ(marginalize(p), (std::vector<double>{0.5, 0.5, 0.0}));
  EXPECT_THROW(run_simulation(spec), ConfigError);
  auto outside = spec;
  outside.law = {{"I|S,S", 1.0}};
  EXPECT_THROW(initial_law(outside, solve_theta(outside)), ConfigError);
  auto short_mass = spec;
  short_mass.law = {{"I|S", 0.4}};
  EXPECT_THROW(initial_law(short_mass, solve_theta(short_mass)), ConfigError);
}

TEST(Experiment, MarginalsCsvRoundTrip) {
  const auto spec = parse_experiment(sir_doc());
  const auto sim = run_simulation(spec, {1, false});
  std::stringstream buf;
  write_marginals_csv(buf, spec.model, sim.times, sim.mean, &sim.stderr_);
  const auto back = read_simulation_marginals(buf, spec.model);
  EXPECT_EQ(back.times, sim.times);
  for (std::size_t k = 0; k < sim.times.size(); ++k) {
    for (int a = 0; a < 3; ++a) {
      EXPECT_NEAR(back.mean[k][a], sim.mean[k][a], 1e-15);
      EXPECT_NEAR(back.stderr_[k][a], sim.stderr_[k][a], 1e-15);
    }
  }
  std::stringstream junk("t,s\n");
  EXPECT_THROW(read_simulation_marginals(junk, spec.model), ConfigError);
  EXPECT_THROW(tv_series({{1.0}}, {}), ConfigError);
}

TEST(Cli, CheckExitCodes) {
  const auto dir = scratch("check");
  const auto models = kSource / "configs/models";
  EXPECT_EQ(run_cli("check " + (models / "sir.json").string(), dir / "sir.txt"), 0);
  EXPECT_NE(slurp(dir / "sir.txt").find("status: pass"), std::string::npos);
  EXPECT_EQ(run_cli("check " + (models / "sis.json").string(), dir / "sis.txt"), 1);
  EXPECT_NE(slurp(dir / "sis.txt").find("\"fail\""), std::string::npos);
  EXPECT_EQ(run_cli("check " + (models / "bad_bound.json").string(), dir / "bad.txt"), 1);
  EXPECT_EQ(run_cli("check " + (dir / "missing.json").string(), dir / "missing.txt"), 1);
}

TEST(Cli, SameSeedGivesIdenticalOutputs) {
  const auto exp = (kSource / "configs/experiments/sir_petersen.json").string();
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  ASSERT_EQ(run_cli("--seed 4 --out-dir " + a.string() + " simulate " + exp, a / "log.txt"), 0);
  ASSERT_EQ(run_cli("--seed 4 --threads 2 --out-dir " + b.string() + " simulate " + exp, b / "log.txt"), 0);
  const auto file = "sir_petersen_sim_marginals.csv";
  EXPECT_FALSE(slurp(a / file).empty());
  EXPECT_EQ(slurp(a / file), slurp(b / file));
  EXPECT_EQ(slurp(a / "sir_petersen_sim_neighborhood.csv"), slurp(b / "sir_petersen_sim_neighborhood.csv"));
}

TEST(Cli, CompareReusesSimulation) {
  const auto exp = (kSource / "configs/experiments/sir_petersen.json").string();
  const auto dir = scratch("compare");
  ASSERT_EQ(run_cli("--out-dir " + dir.string() + " compare --mean-field " + exp, dir / "first.txt"), 0);
  const auto tv = slurp(dir / "sir_petersen_tv.csv");
  EXPECT_EQ(tv.substr(0, tv.find('\n')), "time,tv_ode_sim,tv_mf_sim");
  EXPECT_TRUE(fs::exists(dir / "sir_petersen_tv.svg"));
  ASSERT_EQ(run_cli("--out-dir " + dir.string() + " compare --mean-field --reuse-sim " + exp, dir / "second.txt"), 0);
  EXPECT_NE(slurp(dir / "second.txt").find("reused"), std::string::npos);
  EXPECT_EQ(slurp(dir / "sir_petersen_tv.csv"), tv);
  EXPECT_NE(run_cli("--out-dir " + dir.string() + " --grid-step 0.25 compare --reuse-sim " + exp, dir / "third.txt"), 0);
}
