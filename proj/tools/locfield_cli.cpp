// locfield: simulate interacting jump processes on sparse random graphs and
// solve their local-field equations.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "locfield/locfield.hpp"

namespace fs = std::filesystem;
using namespace locfield;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::string out_dir = ".";
  std::optional<double> grid_step;
};

ExperimentSpec load(const std::string& path, const Globals& g) {
  ExperimentSpec spec = load_experiment(path);
  if (g.seed) spec.seed = *g.seed;
  if (g.grid_step) {
    if (!(*g.grid_step > 0.0)) throw ConfigError("--grid-step must be positive");
    spec.grid_step = *g.grid_step;
  }
  return spec;
}

std::ofstream open_out(const Globals& g, const std::string& file) {
  fs::create_directories(g.out_dir);
  const auto path = fs::path(g.out_dir) / file;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  std::cout << "wrote " << path.string() << '\n';
  return out;
}

int cmd_check(const std::string& path, const Globals& g) {
  nlohmann::json report;
  report["config"] = path;
  ModelSpec m;
  try {
    m = parse_model_config(read_file(path));
  } catch (const std::exception& e) {
    report["status"] = "fail";
    report["errors"] = {{{"kind", "config"}, {"message", e.what()}}};
    std::cout << report.dump(2) << '\n';
    return 1;
  }
  report["model"] = m.name();
  bool ok = true;
  nlohmann::json errors = nlohmann::json::array();

  std::cout << "model " << m.name() << "\ntransition graph:\n";
  nlohmann::json edges = nlohmann::json::array();
  for (auto [a, b] : m.declared_edges()) {
    std::cout << "  " << m.label(a) << " -> " << m.label(b) << '\n';
    edges.push_back({m.label(a), m.label(b)});
  }
  report["edges"] = edges;

  const auto acyclic = check_acyclic(declared_transition_graph(m));
  if (acyclic) {
    std::cout << "topological order: " << format_states(m, acyclic.order) << '\n';
    nlohmann::json order = nlohmann::json::array();
    for (int a : acyclic.order) order.push_back(m.label(a));
    report["order"] = order;
  } else {
    ok = false;
    std::cout << "cycle: " << format_states(m, acyclic.cycle) << '\n';
    nlohmann::json cycle = nlohmann::json::array();
    for (int a : acyclic.cycle) cycle.push_back(m.label(a));
    errors.push_back({{"kind", "cycle"}, {"states", cycle}});
  }

  ProbeOptions probe;
  if (g.seed) probe.seed = *g.seed;
  const auto pr = probe_rates(m, probe);
  std::cout << "rate probe: " << pr.draws << " draws, " << pr.violations.size() << " violation kinds\n";
  for (const auto& v : pr.violations) {
    ok = false;
    const char* kind = "";
    switch (v.kind) {
      case ViolationKind::undeclared_edge: kind = "undeclared_edge"; break;
      case ViolationKind::leaves_state_space: kind = "leaves_state_space"; break;
      case ViolationKind::bound_exceeded: kind = "bound_exceeded"; break;
      case ViolationKind::negative_rate: kind = "negative_rate"; break;
    }
    std::cout << "  " << v.describe(m) << '\n';
    errors.push_back({{"kind", kind}, {"message", v.describe(m)}});
  }
  std::cout << "rate bound audit: " << (pr.has(ViolationKind::bound_exceeded) ? "fail" : "pass") << '\n';
  report["status"] = ok ? "pass" : "fail";
  if (!ok) {
    report["errors"] = errors;
    std::cout << report.dump(2) << '\n';
  } else {
    std::cout << "status: pass\n";
  }
  return ok ? 0 : 1;
}

SimulationSummary do_simulate(const ExperimentSpec& spec, const Globals& g) {
  fs::path log_dir = fs::path(g.out_dir) / (spec.name + "_events");
  if (spec.event_logs) fs::create_directories(log_dir);
  auto sim = run_simulation(spec, {g.threads, true}, [&](std::size_t i, const EventLog& log) {
    std::ofstream out(log_dir / ("replica_" + std::to_string(i) + ".csv"), std::ios::binary);
    write_event_log_csv(out, log);
  });
  auto marg = open_out(g, spec.name + "_sim_marginals.csv");
  write_marginals_csv(marg, spec.model, sim.times, sim.mean, &sim.stderr_);
  auto nbh = open_out(g, spec.name + "_sim_neighborhood.csv");
  write_neighborhood_csv(nbh, spec.model, sim);
  return sim;
}

OdeSolution do_solve(const ExperimentSpec& spec, const Globals& g) {
  auto sol = run_solve(spec);
  auto law = open_out(g, spec.name + "_ode_law.csv");
  write_law_csv(law, sol.times, sol.laws);
  auto classes = open_out(g, spec.name + "_ode_classes.csv");
  write_classes_csv(classes, spec.model, *sol.space);
  auto marg = open_out(g, spec.name + "_ode_marginals.csv");
  write_marginals_csv(marg, spec.model, sol.times, sol.marginals());
  std::cout << "integrator: " << sol.stats.accepted << " accepted, " << sol.stats.rejected
            << " rejected steps, " << sol.stats.clamp_events << " clamp events (mass "
            << sol.stats.clamped_mass << ")\n";
  return sol;
}

MeanFieldSolution do_mean_field(const ExperimentSpec& spec, const Globals& g) {
  auto mf = run_mean_field(spec);
  auto out = open_out(g, spec.name + "_mf_marginals.csv");
  write_marginals_csv(out, spec.model, mf.times, mf.marginals);
  return mf;
}

void do_mlfe(const ExperimentSpec& spec, const Globals& g) {
  auto res = run_mlfe(spec, g.threads);
  auto out = open_out(g, spec.name + "_mlfe_marginals.csv");
  write_marginals_csv(out, spec.model, res.times, res.marginals);
}

void plot_fractions(const ExperimentSpec& spec, const Globals& g, const SimulationSummary& sim,
                    const OdeSolution& ode, const MeanFieldSolution* mf) {
  std::vector<PlotSeries> series;
  std::vector<std::size_t> colors;
  const auto om = ode.marginals();
  for (int a = 0; a < spec.model.num_states(); ++a) {
    PlotSeries s{"sim " + spec.model.label(a), sim.times, {}, false};
    for (const auto& row : sim.mean) s.y.push_back(row[a]);
    series.push_back(std::move(s));
    colors.push_back(a);
    PlotSeries o{"ODE " + spec.model.label(a), ode.times, {}, true};
    for (const auto& row : om) o.y.push_back(row[a]);
    series.push_back(std::move(o));
    colors.push_back(a);
    if (mf) {
      PlotSeries f{"MF " + spec.model.label(a), mf->times, {}, true};
      for (const auto& row : mf->marginals) f.y.push_back(row[a]);
      series.push_back(std::move(f));
      colors.push_back(a + spec.model.num_states());
    }
  }
  auto out = open_out(g, spec.name + "_fractions.svg");
  write_line_plot(out, spec.name + ": state fractions", "t", "fraction", series, colors);
}

int cmd_compare(const std::string& path, const Globals& g, bool mean_field, bool reuse_sim) {
  const auto spec = load(path, g);
  SimulationSummary sim;
  const auto cached = fs::path(g.out_dir) / (spec.name + "_sim_marginals.csv");
  if (reuse_sim && fs::exists(cached)) {
    std::ifstream in(cached);
    sim = read_simulation_marginals(in, spec.model);
    const auto grid = spec.grid();
    if (sim.times.size() != grid.size()) throw ConfigError("cached simulation grid does not match the experiment");
    std::cout << "reused " << cached.string() << '\n';
  } else {
    sim = do_simulate(spec, g);
  }
  const auto ode = do_solve(spec, g);
  std::optional<MeanFieldSolution> mf;
  if (mean_field) mf = do_mean_field(spec, g);

  const auto tv_ode = tv_series(sim.mean, ode.marginals());
  std::vector<double> tv_mf;
  if (mf) tv_mf = tv_series(sim.mean, mf->marginals);
  auto out = open_out(g, spec.name + "_tv.csv");
  write_tv_csv(out, sim.times, tv_ode, mf ? &tv_mf : nullptr);

  std::vector<PlotSeries> tv_plot{{"TV(ODE, sim)", sim.times, tv_ode, false}};
  if (mf) tv_plot.push_back({"TV(MF, sim)", sim.times, tv_mf, true});
  auto svg = open_out(g, spec.name + "_tv.svg");
  write_line_plot(svg, spec.name + ": total variation", "t", "TV", tv_plot);
  plot_fractions(spec, g, sim, ode, mf ? &*mf : nullptr);

  std::cout << "sup TV(ODE, sim) = " << *std::max_element(tv_ode.begin(), tv_ode.end()) << '\n';
  if (mf) std::cout << "sup TV(MF, sim) = " << *std::max_element(tv_mf.begin(), tv_mf.end()) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and local-field ODEs for interacting jump processes on sparse graphs"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  double grid_step = 0.0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the experiment seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Directory for output files");
  auto* grid_opt = app.add_option("--grid-step", grid_step, "Override the output grid step");

  std::string path;
  bool mean_field = false, mlfe = false, reuse_sim = false;
  auto* check = app.add_subcommand("check", "Validate a model config");
  check->add_option("config", path, "Model config (JSON)")->required();
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo simulation of an experiment");
  simulate_cmd->add_option("experiment", path, "Experiment file (JSON)")->required();
  auto* solve = app.add_subcommand("solve", "Solve the local-field ODE of an experiment");
  solve->add_option("experiment", path, "Experiment file (JSON)")->required();
  solve->add_flag("--mean-field", mean_field, "Also solve the mean-field baseline");
  solve->add_flag("--mlfe", mlfe, "Also run the local-field particle ensemble");
  auto* compare = app.add_subcommand("compare", "Simulation vs ODE total variation");
  compare->add_option("experiment", path, "Experiment file (JSON)")->required();
  compare->add_flag("--mean-field", mean_field, "Include the mean-field baseline");
  compare->add_flag("--reuse-sim", reuse_sim, "Reuse an existing simulation marginals file");
  auto* mlfe_cmd = app.add_subcommand("mlfe", "Local-field particle ensemble");
  mlfe_cmd->add_option("experiment", path, "Experiment file (JSON)")->required();

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) g.seed = seed;
  if (grid_opt->count()) g.grid_step = grid_step;

  try {
    if (check->parsed()) return cmd_check(path, g);
    if (simulate_cmd->parsed()) {
      do_simulate(load(path, g), g);
      return 0;
    }
    if (solve->parsed()) {
      const auto spec = load(path, g);
      do_solve(spec, g);
      if (mean_field) do_mean_field(spec, g);
      if (mlfe) do_mlfe(spec, g);
      return 0;
    }
    if (compare->parsed()) return cmd_compare(path, g, mean_field, reuse_sim);
    if (mlfe_cmd->parsed()) {
      do_mlfe(load(path, g), g);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
