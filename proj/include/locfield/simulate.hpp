#pragma once

// Exact event-driven simulation of interacting jump processes on a finite
// graph. Every vertex carries a Poisson clock at the envelope rate
// |J| * C(d_v + 1, T); a ring is accepted as a jump with probability
// rate / envelope, with rates read from the configuration just before the ring.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "locfield/config_space.hpp"
#include "locfield/csv.hpp"
#include "locfield/errors.hpp"
#include "locfield/graphs.hpp"
#include "locfield/model.hpp"
#include "locfield/random.hpp"

namespace locfield {

struct Event {
  double time = 0.0;
  int vertex = 0;
  int jump = 0;  // jump code

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventLog {
  std::vector<int> initial;  // state indices
  std::vector<Event> events;
  double horizon = 0.0;

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

struct SimulateOptions {
  bool allow_cyclic = false;
};

namespace detail {

inline std::string describe_neighbors(const ModelSpec& m, std::span<const double> counts) {
  std::string out;
  for (int x = 0; x < m.num_states(); ++x) {
    for (int r = 0; r < static_cast<int>(counts[x]); ++r) {
      if (!out.empty()) out += ",";
      out += m.label(x);
    }
  }
  return "{" + out + "}";
}

}  // namespace detail

inline EventLog simulate(const Graph& g, const ModelSpec& m, std::span<const int> init,
                         double horizon, Engine& rng, const SimulateOptions& opts = {}) {
  if (!opts.allow_cyclic) require_acyclic(m);
  const std::size_t n = g.size();
  const int ns = m.num_states();
  const std::size_t nj = m.num_jumps();
  if (init.size() != n) throw ModelError("initial state has the wrong number of vertices");
  for (int a : init) {
    if (a < 0 || a >= ns) throw ModelError("initial state outside the state space");
  }
  if (!(horizon >= 0.0)) throw ModelError("negative horizon");

  EventLog log{std::vector<int>(init.begin(), init.end()), {}, horizon};
  std::vector<int> state(init.begin(), init.end());
  std::vector<double> counts(n * ns, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    for (int w : g.neighbors(static_cast<int>(v))) counts[v * ns + state[w]] += 1.0;
  }
  std::vector<double> bound(n), envelope(n);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> clocks;
  for (std::size_t v = 0; v < n; ++v) {
    bound[v] = m.rate_bound(g.degree(static_cast<int>(v)) + 1, horizon);
    if (!(bound[v] >= 0.0) || !std::isfinite(bound[v])) {
      throw ModelError(m.name() + ": rate bound is negative or not finite");
    }
    envelope[v] = bound[v] * static_cast<double>(nj);
    if (envelope[v] > 0.0) clocks.emplace(exponential(rng, envelope[v]), static_cast<int>(v));
  }

  std::vector<double> rates(nj);
  while (!clocks.empty()) {
    auto [t, v] = clocks.top();
    if (t > horizon) break;
    clocks.pop();
    clocks.emplace(t + exponential(rng, envelope[v]), v);

    const std::span<const double> c(counts.data() + static_cast<std::size_t>(v) * ns, ns);
    const int d = g.degree(v);
    double total = 0.0;
    for (std::size_t j = 0; j < nj; ++j) {
      const double r = m.rate(j, t, state[v], c, d);
      if (!(r >= 0.0) || r > bound[v]) {
        std::ostringstream msg;
        msg << m.name() << ": rate " << r << " for jump " << m.jumps()[j] << " at t=" << t
            << " in state " << m.label(state[v]) << " with neighbors "
            << detail::describe_neighbors(m, c) << " violates the envelope " << bound[v];
        throw ModelError(msg.str());
      }
      rates[j] = r;
      total += r;
    }
    const double u = uniform01(rng) * envelope[v];
    if (u >= total) continue;
    double acc = 0.0;
    std::size_t j = 0;
    for (; j + 1 < nj; ++j) {
      acc += rates[j];
      if (u < acc) break;
    }
    while (rates[j] == 0.0) --j;  // floating-point edge of the last bucket
    const int b = m.jump_target(state[v], j);
    if (b == kStar) {
      throw ModelError(m.name() + ": jump " + std::to_string(m.jumps()[j]) + " from state " +
                       m.label(state[v]) + " leaves the state space");
    }
    for (int w : g.neighbors(v)) {
      counts[static_cast<std::size_t>(w) * ns + state[v]] -= 1.0;
      counts[static_cast<std::size_t>(w) * ns + b] += 1.0;
    }
    state[v] = b;
    log.events.push_back({t, v, m.jumps()[j]});
  }
  return log;
}

/// Vertex states at time t (events at exactly t are included).
inline std::vector<int> state_at(const EventLog& log, const ModelSpec& m, double t) {
  std::vector<int> state = log.initial;
  for (const auto& e : log.events) {
    if (e.time > t) break;
    state[e.vertex] = m.jump_target(state[e.vertex], *m.jump_index(e.jump));
  }
  return state;
}

struct Marginal {
  double time = 0.0;
  std::vector<double> dist;
};

inline std::vector<double> histogram(std::span<const int> state, int num_states) {
  std::vector<double> dist(num_states, 0.0);
  if (state.empty()) return dist;
  for (int a : state) dist[a] += 1.0;
  for (double& p : dist) p /= static_cast<double>(state.size());
  return dist;
}

inline Marginal empirical_measure(const EventLog& log, const ModelSpec& m, double t) {
  return {t, histogram(state_at(log, m, t), m.num_states())};
}

/// Empirical measures on an increasing time grid, in one pass over the log.
inline std::vector<Marginal> marginals_on_grid(const EventLog& log, const ModelSpec& m,
                                               std::span<const double> grid) {
  std::vector<Marginal> out;
  out.reserve(grid.size());
  std::vector<int> state = log.initial;
  std::size_t next = 0;
  for (double t : grid) {
    while (next < log.events.size() && log.events[next].time <= t) {
      const auto& e = log.events[next++];
      state[e.vertex] = m.jump_target(state[e.vertex], *m.jump_index(e.jump));
    }
    out.push_back({t, histogram(state, m.num_states())});
  }
  return out;
}

/// Fraction of vertices whose (own state; sorted neighbor states) equals each
/// configuration, padded to d_max slots.
inline std::map<NeighborhoodConfig, double> neighborhood_empirical_measure(
    const Graph& g, std::span<const int> state, int d_max) {
  std::map<NeighborhoodConfig, double> out;
  const double w = 1.0 / static_cast<double>(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto nb = g.neighbors(static_cast<int>(v));
    if (static_cast<int>(nb.size()) > d_max) {
      throw GraphError("vertex " + std::to_string(v) + " has degree " + std::to_string(nb.size()) +
                       " above d_max " + std::to_string(d_max));
    }
    NeighborhoodConfig c;
    c.entries.assign(static_cast<std::size_t>(d_max) + 1, kStar);
    c.entries[0] = state[v];
    for (std::size_t i = 0; i < nb.size(); ++i) c.entries[i + 1] = state[nb[i]];
    out[c.canonical()] += w;
  }
  return out;
}

inline std::map<NeighborhoodConfig, double> neighborhood_empirical_measure(
    const Graph& g, const EventLog& log, const ModelSpec& m, double t, int d_max) {
  return neighborhood_empirical_measure(g, state_at(log, m, t), d_max);
}

/// CSV with header time,vertex,jump (jump codes).
inline void write_event_log_csv(std::ostream& out, const EventLog& log) {
  out << "time,vertex,jump\n";
  for (const auto& e : log.events) {
    out << format_number(e.time) << ',' << e.vertex << ',' << e.jump << '\n';
  }
}

}  // namespace locfield
