#pragma once

// Experiment documents and the simulate / solve / compare pipelines.
//
//   {"schema_version": 1,
//    "name": "sir_3reg",
//    "model": {"name": "sir", "params": {"beta": 1, "gamma": 0.5}},
//    "graph": {"theta": {"3": 1.0}, "n": 400, "matching": "reject"},
//    "initial": {"q": {"S": 0.9, "I": 0.1}},
//    "horizon": 5, "replicas": 500, "seed": 1, "grid_step": 0.1}
//
// Optional keys: "model_file" instead of "model", "theta" (degree law used by
// the ODE, otherwise derived from the graph source), "solver" {atol, rtol,
// fixed_step, fixed_dt}, "mlfe" {copies, dt}, "mean_field" {closure}, and
// "event_logs" (write one CSV per replica). Graph sources are
// {"theta", "n"}, {"degrees": [...]} or {"edge_list": "path"}; relative paths
// are resolved against the experiment file's directory. "initial" is either
// an i.i.d. marginal {"q": {label: p}} or a neighborhood law
// {"law": {"S|I,S,*": p, ...}} (solve only).

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "locfield/config_space.hpp"
#include "locfield/csv.hpp"
#include "locfield/errors.hpp"
#include "locfield/graphs.hpp"
#include "locfield/integrator.hpp"
#include "locfield/local_field_ode.hpp"
#include "locfield/mean_field.hpp"
#include "locfield/mlfe.hpp"
#include "locfield/model.hpp"
#include "locfield/model_config.hpp"
#include "locfield/simulate.hpp"

namespace locfield {

struct GraphSource {
  enum class Kind { theta, degree_sequence, edge_list };
  Kind kind = Kind::theta;
  DegreeDistribution theta;
  std::size_t n = 0;
  std::vector<int> degrees;
  Graph graph;
  MatchingMode matching = MatchingMode::reject;

  int d_max() const {
    switch (kind) {
      case Kind::theta: return theta.max_degree();
      case Kind::degree_sequence: return degrees.empty() ? 0 : *std::max_element(degrees.begin(), degrees.end());
      case Kind::edge_list: {
        const auto d = graph.degrees();
        return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
      }
    }
    return 0;
  }
};

struct ExperimentSpec {
  std::string name;
  ModelSpec model;
  GraphSource graph;
  std::optional<DegreeDistribution> theta;
  std::vector<double> q;                    // i.i.d. marginal, empty if `law` is used
  std::map<std::string, double> law;        // configuration string -> mass
  double horizon = 0.0;
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  double grid_step = 0.1;
  SolverOptions solver;
  std::size_t mlfe_copies = 10'000;
  double mlfe_dt = 1e-3;
  MeanFieldClosure closure = MeanFieldClosure::independent_neighbors;
  bool event_logs = false;

  std::vector<double> grid() const { return uniform_grid(horizon, grid_step); }
};

namespace detail {

inline DegreeDistribution theta_from_json(const nlohmann::json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": degree law must be an object");
  std::map<int, double> pmf;
  for (const auto& [key, value] : j.items()) {
    int k = 0;
    auto res = std::from_chars(key.data(), key.data() + key.size(), k);
    if (res.ec != std::errc() || res.ptr != key.data() + key.size()) {
      throw ConfigError(std::string(where) + ": degree '" + key + "' is not an integer");
    }
    if (!value.is_number()) throw ConfigError(std::string(where) + ": probabilities must be numbers");
    pmf[k] = value.get<double>();
  }
  try {
    return DegreeDistribution::from_pmf(pmf);
  } catch (const GraphError& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

inline std::string resolve_path(const std::string& path, const std::filesystem::path& base) {
  std::filesystem::path p(path);
  return p.is_absolute() ? p.string() : (base / p).string();
}

}  // namespace detail

inline ExperimentSpec parse_experiment(std::string_view text,
                                       const std::filesystem::path& base_dir = ".") {
  const auto doc = detail::parse_json(text, "experiment");
  detail::check_schema_version(doc, "experiment");
  ExperimentSpec spec;
  spec.name = detail::get_field<std::string>(doc, "name", "experiment");
  if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("experiment: 'name' must be a plain file stem");
  }
  const std::string where = "experiment '" + spec.name + "'";

  if (doc.contains("model") == doc.contains("model_file")) {
    throw ConfigError(where + ": exactly one of 'model' or 'model_file' is required");
  }
  if (doc.contains("model")) {
    spec.model = model_from_json(doc["model"]);
  } else {
    const auto path = detail::resolve_path(detail::get_field<std::string>(doc, "model_file", where), base_dir);
    spec.model = parse_model_config(read_file(path));
  }

  if (!doc.contains("graph") || !doc["graph"].is_object()) {
    throw ConfigError(where + ": 'graph' section is required");
  }
  const auto& g = doc["graph"];
  const int sources = g.contains("theta") + g.contains("degrees") + g.contains("edge_list");
  if (sources != 1) {
    throw ConfigError(where + ": graph needs exactly one of 'theta', 'degrees', 'edge_list'");
  }
  if (g.contains("matching")) {
    const auto mode = detail::get_field<std::string>(g, "matching", where);
    if (mode == "reject") {
      spec.graph.matching = MatchingMode::reject;
    } else if (mode == "erase") {
      spec.graph.matching = MatchingMode::erase;
    } else {
      throw ConfigError(where + ": matching must be 'reject' or 'erase'");
    }
  }
  if (g.contains("theta")) {
    spec.graph.kind = GraphSource::Kind::theta;
    spec.graph.theta = detail::theta_from_json(g["theta"], where + " graph.theta");
    const auto n = detail::get_field<long long>(g, "n", where);
    if (n < 1) throw ConfigError(where + ": graph.n must be positive");
    spec.graph.n = static_cast<std::size_t>(n);
  } else if (g.contains("degrees")) {
    spec.graph.kind = GraphSource::Kind::degree_sequence;
    spec.graph.degrees = detail::get_field<std::vector<int>>(g, "degrees", where);
    if (spec.graph.degrees.empty()) throw ConfigError(where + ": empty degree sequence");
    if (spec.graph.matching == MatchingMode::reject && !validate_graphical(spec.graph.degrees)) {
      throw ConfigError(where + ": degree sequence is not graphical");
    }
  } else {
    spec.graph.kind = GraphSource::Kind::edge_list;
    const auto path = detail::resolve_path(detail::get_field<std::string>(g, "edge_list", where), base_dir);
    std::ifstream in(path);
    if (!in) throw ConfigError(where + ": cannot open edge list '" + path + "'");
    try {
      spec.graph.graph = read_edge_list(in);
    } catch (const GraphError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (doc.contains("theta")) spec.theta = detail::theta_from_json(doc["theta"], where + " theta");

  if (!doc.contains("initial") || !doc["initial"].is_object()) {
    throw ConfigError(where + ": 'initial' section is required");
  }
  const auto& init = doc["initial"];
  if (init.contains("q") == init.contains("law")) {
    throw ConfigError(where + ": initial needs exactly one of 'q' or 'law'");
  }
  if (init.contains("q")) {
    spec.q.assign(spec.model.num_states(), 0.0);
    double total = 0.0;
    for (const auto& [label, value] : init["q"].items()) {
      const int a = spec.model.index_of_label(label);
      if (a == kStar) throw ConfigError(where + ": initial.q names unknown state '" + label + "'");
      if (!value.is_number() || value.get<double>() < 0.0) {
        throw ConfigError(where + ": initial.q entries must be non-negative numbers");
      }
      spec.q[a] = value.get<double>();
      total += spec.q[a];
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError(where + ": initial.q must sum to 1");
  } else {
    for (const auto& [config, value] : init["law"].items()) {
      if (!value.is_number()) throw ConfigError(where + ": initial.law masses must be numbers");
      spec.law[config] = value.get<double>();
    }
  }

  spec.horizon = detail::get_field<double>(doc, "horizon", where);
  if (!(spec.horizon > 0.0)) throw ConfigError(where + ": horizon must be positive");
  const auto replicas = doc.contains("replicas") ? detail::get_field<long long>(doc, "replicas", where) : 1;
  if (replicas < 1) throw ConfigError(where + ": replicas must be at least 1");
  spec.replicas = static_cast<std::size_t>(replicas);
  spec.seed = detail::get_field<std::uint64_t>(doc, "seed", where);
  if (doc.contains("grid_step")) spec.grid_step = detail::get_field<double>(doc, "grid_step", where);
  if (!(spec.grid_step > 0.0)) throw ConfigError(where + ": grid_step must be positive");

  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    spec.solver.atol = s.value("atol", spec.solver.atol);
    spec.solver.rtol = s.value("rtol", spec.solver.rtol);
    spec.solver.fixed_step = s.value("fixed_step", false);
    spec.solver.fixed_dt = s.value("fixed_dt", spec.solver.fixed_dt);
  }
  if (doc.contains("mlfe")) {
    const auto& s = doc["mlfe"];
    spec.mlfe_copies = s.value("copies", spec.mlfe_copies);
    spec.mlfe_dt = s.value("dt", spec.mlfe_dt);
  }
  if (doc.contains("mean_field")) {
    const auto closure = doc["mean_field"].value("closure", std::string("independent"));
    if (closure == "independent") {
      spec.closure = MeanFieldClosure::independent_neighbors;
    } else if (closure == "complete_graph") {
      spec.closure = MeanFieldClosure::complete_graph;
    } else {
      throw ConfigError(where + ": mean_field.closure must be 'independent' or 'complete_graph'");
    }
  }
  spec.event_logs = doc.value("event_logs", false);
  return spec;
}

inline ExperimentSpec load_experiment(const std::string& path) {
  return parse_experiment(read_file(path), std::filesystem::path(path).parent_path());
}

/// Degree law for the ODE: explicit, or derived from the graph source.
inline DegreeDistribution solve_theta(const ExperimentSpec& spec) {
  if (spec.theta) return *spec.theta;
  switch (spec.graph.kind) {
    case GraphSource::Kind::theta: return spec.graph.theta;
    case GraphSource::Kind::degree_sequence: {
      std::map<int, double> counts;
      for (int d : spec.graph.degrees) counts[d] += 1.0;
      return DegreeDistribution::from_weights(counts);
    }
    case GraphSource::Kind::edge_list: return empirical_degree_distribution(spec.graph.graph);
  }
  throw ConfigError("unknown graph source");
}

inline Graph replica_graph(const GraphSource& src, Engine& rng) {
  ConfigurationModelOptions opts;
  opts.mode = src.matching;
  switch (src.kind) {
    case GraphSource::Kind::theta: {
      const auto degrees = sample_degree_sequence(src.theta, src.n, rng);
      return sample_configuration_model(degrees, rng, opts);
    }
    case GraphSource::Kind::degree_sequence:
      return sample_configuration_model(src.degrees, rng, opts);
    case GraphSource::Kind::edge_list: return src.graph;
  }
  throw GraphError("unknown graph source");
}

inline LawVector initial_law(const ExperimentSpec& spec, const DegreeDistribution& theta) {
  auto space = enumerate_configs(theta, spec.model.num_states());
  if (!spec.q.empty()) return build_initial_law(space, spec.q);
  std::vector<double> mass(space->size(), 0.0);
  double total = 0.0;
  for (const auto& [text, p] : spec.law) {
    const auto c = parse_config_string(text, spec.model, space->d_max());
    const auto i = space->index_of(c);
    if (i == ConfigSpace::npos) {
      throw ConfigError("initial law: configuration '" + text + "' has a degree outside the support");
    }
    if (p < 0.0) throw ConfigError("initial law: negative mass for '" + text + "'");
    mass[i] += p;
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("initial law: masses must sum to 1");
  return LawVector(space, std::move(mass));
}

struct SimulationSummary {
  std::vector<double> times;
  std::vector<std::vector<double>> mean;    // [time][state]
  std::vector<std::vector<double>> stderr_;  // [time][state]
  int d_max = 0;
  std::vector<std::map<NeighborhoodConfig, double>> neighborhood;  // [time]
};

struct ReplicaResult {
  std::vector<std::vector<double>> marginals;
  std::vector<std::map<NeighborhoodConfig, double>> neighborhood;
  EventLog log;
};

struct SimulationRunOptions {
  unsigned threads = 1;
  bool neighborhoods = true;
};

/// Replica i uses stream (seed, i) for its graph, initial states and dynamics.
inline ReplicaResult run_replica(const ExperimentSpec& spec, std::size_t index, int d_max,
                                 bool neighborhoods, bool keep_log) {
  Engine rng = make_stream(spec.seed, index);
  const Graph g = replica_graph(spec.graph, rng);
  std::vector<int> init(g.size());
  for (auto& a : init) a = static_cast<int>(categorical(rng, spec.q));
  EventLog log = simulate(g, spec.model, init, spec.horizon, rng);
  ReplicaResult out;
  const auto grid = spec.grid();
  std::vector<int> state = log.initial;
  std::size_t next = 0;
  for (double t : grid) {
    while (next < log.events.size() && log.events[next].time <= t) {
      const auto& e = log.events[next++];
      state[e.vertex] = spec.model.jump_target(state[e.vertex], *spec.model.jump_index(e.jump));
    }
    out.marginals.push_back(histogram(state, spec.model.num_states()));
    if (neighborhoods) out.neighborhood.push_back(neighborhood_empirical_measure(g, state, d_max));
  }
  if (keep_log) out.log = std::move(log);
  return out;
}

/// Runs every replica on a worker pool. Results are folded into the averages
/// strictly in replica order, so the output does not depend on scheduling.
/// `on_log(i, log)` receives each replica's event log when event logs are on.
template <class OnLog>
SimulationSummary run_simulation(const ExperimentSpec& spec, const SimulationRunOptions& opts,
                                 OnLog&& on_log) {
  if (spec.q.empty()) {
    throw ConfigError("experiment '" + spec.name + "': simulation needs an i.i.d. initial marginal 'q'");
  }
  require_acyclic(spec.model);
  const int d_max = spec.graph.d_max();
  const std::size_t R = spec.replicas;
  const int m = spec.model.num_states();

  SimulationSummary out;
  out.times = spec.grid();
  out.d_max = d_max;
  const std::size_t nt_grid = out.times.size();
  out.mean.assign(nt_grid, std::vector<double>(m, 0.0));
  out.stderr_.assign(nt_grid, std::vector<double>(m, 0.0));
  if (opts.neighborhoods) out.neighborhood.resize(nt_grid);
  std::vector<std::vector<std::vector<double>>> marginals(R);

  std::vector<std::optional<ReplicaResult>> pending(R);
  std::size_t folded = 0;
  std::mutex mutex;
  auto fold_ready = [&] {  // caller holds the mutex
    while (folded < R && pending[folded]) {
      auto& r = *pending[folded];
      for (std::size_t k = 0; k < nt_grid; ++k) {
        for (int a = 0; a < m; ++a) out.mean[k][a] += r.marginals[k][a];
        if (opts.neighborhoods) {
          for (const auto& [c, p] : r.neighborhood[k]) out.neighborhood[k][c] += p;
        }
      }
      if (spec.event_logs) on_log(folded, r.log);
      marginals[folded] = std::move(r.marginals);
      pending[folded].reset();
      ++folded;
    }
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= R) return;
      try {
        auto r = run_replica(spec, i, d_max, opts.neighborhoods, spec.event_logs);
        std::lock_guard lock(mutex);
        pending[i] = std::move(r);
        fold_ready();
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next = R;
        return;
      }
    }
  };
  const unsigned nt = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(R)));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < nt; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t k = 0; k < nt_grid; ++k) {
    for (int a = 0; a < m; ++a) out.mean[k][a] /= static_cast<double>(R);
    if (opts.neighborhoods) {
      for (auto& [c, p] : out.neighborhood[k]) p /= static_cast<double>(R);
    }
  }
  if (R > 1) {
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t k = 0; k < nt_grid; ++k) {
        for (int a = 0; a < m; ++a) {
          const double dev = marginals[i][k][a] - out.mean[k][a];
          out.stderr_[k][a] += dev * dev;
        }
      }
    }
    for (auto& row : out.stderr_) {
      for (double& v : row) v = std::sqrt(v / static_cast<double>(R - 1) / static_cast<double>(R));
    }
  }
  return out;
}

inline SimulationSummary run_simulation(const ExperimentSpec& spec,
                                        const SimulationRunOptions& opts = {}) {
  return run_simulation(spec, opts, [](std::size_t, const EventLog&) {});
}

inline OdeSolution run_solve(const ExperimentSpec& spec) {
  const auto theta = solve_theta(spec);
  IntegrateOptions opts;
  opts.solver = spec.solver;
  const auto grid = spec.grid();
  return integrate(spec.model, initial_law(spec, theta), grid, opts);
}

inline MeanFieldSolution run_mean_field(const ExperimentSpec& spec) {
  const auto theta = solve_theta(spec);
  const auto mu0 = marginalize(initial_law(spec, theta));
  const auto grid = spec.grid();
  return mean_field_ode(spec.model, theta, mu0, grid, spec.closure, spec.solver);
}

inline MlfeResult run_mlfe(const ExperimentSpec& spec, unsigned threads = 1) {
  const auto theta = solve_theta(spec);
  MlfeOptions opts;
  opts.copies = spec.mlfe_copies;
  opts.dt = spec.mlfe_dt;
  opts.threads = threads;
  const auto grid = spec.grid();
  return mlfe_ensemble(spec.model, initial_law(spec, theta), grid, spec.seed, opts);
}

inline std::vector<double> tv_series(const std::vector<std::vector<double>>& a,
                                     const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) throw ConfigError("time grids do not match");
  std::vector<double> out;
  for (std::size_t k = 0; k < a.size(); ++k) out.push_back(total_variation(a[k], b[k]));
  return out;
}

// ---- CSV output -----------------------------------------------------------

inline void write_marginals_csv(std::ostream& out, const ModelSpec& m,
                                const std::vector<double>& times,
                                const std::vector<std::vector<double>>& marginals,
                                const std::vector<std::vector<double>>* stderr_ = nullptr) {
  out << "time,state,probability" << (stderr_ ? ",stderr" : "") << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (int a = 0; a < m.num_states(); ++a) {
      out << format_number(times[k]) << ',' << m.label(a) << ',' << format_number(marginals[k][a]);
      if (stderr_) out << ',' << format_number((*stderr_)[k][a]);
      out << '\n';
    }
  }
}

inline void write_neighborhood_csv(std::ostream& out, const ModelSpec& m,
                                   const SimulationSummary& sim) {
  out << "time,config,probability\n";
  for (std::size_t k = 0; k < sim.times.size(); ++k) {
    for (const auto& [c, p] : sim.neighborhood[k]) {
      out << format_number(sim.times[k]) << ',' << '"' << to_string(c, m) << '"' << ','
          << format_number(p) << '\n';
    }
  }
}

inline void write_law_csv(std::ostream& out, const std::vector<double>& times,
                          const std::vector<std::vector<double>>& laws) {
  out << "time,class_index,probability\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t c = 0; c < laws[k].size(); ++c) {
      out << format_number(times[k]) << ',' << c << ',' << format_number(laws[k][c]) << '\n';
    }
  }
}

inline void write_classes_csv(std::ostream& out, const ModelSpec& m, const ConfigSpace& space) {
  out << "class_index,config\n";
  for (std::size_t c = 0; c < space.size(); ++c) {
    out << c << ',' << '"' << to_string(space.config(c), m) << '"' << '\n';
  }
}

inline void write_tv_csv(std::ostream& out, const std::vector<double>& times,
                         const std::vector<double>& tv_ode,
                         const std::vector<double>* tv_mf = nullptr) {
  out << "time,tv_ode_sim" << (tv_mf ? ",tv_mf_sim" : "") << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    out << format_number(times[k]) << ',' << format_number(tv_ode[k]);
    if (tv_mf) out << ',' << format_number((*tv_mf)[k]);
    out << '\n';
  }
}

/// Reads a marginals CSV written by write_marginals_csv (with stderr column).
inline SimulationSummary read_simulation_marginals(std::istream& in, const ModelSpec& m) {
  SimulationSummary out;
  std::string line;
  if (!std::getline(in, line) || line.rfind("time,state,probability", 0) != 0) {
    throw ConfigError("cached marginals: unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 3) throw ConfigError("cached marginals: short row");
    const double t = parse_number(f[0]);
    const int a = m.index_of_label(f[1]);
    if (a == kStar) throw ConfigError("cached marginals: unknown state '" + f[1] + "'");
    if (out.times.empty() || out.times.back() != t) {
      out.times.push_back(t);
      out.mean.emplace_back(m.num_states(), 0.0);
      out.stderr_.emplace_back(m.num_states(), 0.0);
    }
    out.mean.back()[a] = parse_number(f[2]);
    if (f.size() > 3) out.stderr_.back()[a] = parse_number(f[3]);
  }
  return out;
}

}  // namespace locfield
