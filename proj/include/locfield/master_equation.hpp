#pragma once

// Forward Kolmogorov equation of the full chain on a tiny graph. The law over
// all |X|^n joint configurations is integrated directly; used as an exact
// reference for the simulator.

#include <cmath>
#include <span>
#include <vector>

#include "locfield/errors.hpp"
#include "locfield/graphs.hpp"
#include "locfield/integrator.hpp"
#include "locfield/model.hpp"

namespace locfield {

struct MasterEquationOptions {
  std::size_t max_vertices = 6;
  std::size_t max_states = 1'000'000;
  SolverOptions solver;
  bool allow_cyclic = false;
};

struct MasterEquationSolution {
  std::vector<double> times;
  std::vector<std::vector<double>> joint;                    // [time][global state]
  std::vector<std::vector<std::vector<double>>> per_vertex;  // [time][vertex][state]
  std::vector<std::vector<double>> average;                  // [time][state]
  IntegrationStats stats;
};

/// Global state s encodes vertex v's state as digit v of s in base |X|.
class MasterEquation {
 public:
  MasterEquation(const Graph& g, ModelSpec m, const MasterEquationOptions& opts = {})
      : g_(g), m_(std::move(m)) {
    if (g_.size() > opts.max_vertices) {
      throw ModelError("master equation: graph has more than " +
                       std::to_string(opts.max_vertices) + " vertices");
    }
    const std::size_t ns = static_cast<std::size_t>(m_.num_states());
    double total = 1.0;
    for (std::size_t v = 0; v < g_.size(); ++v) total *= static_cast<double>(ns);
    if (total > static_cast<double>(opts.max_states)) {
      throw ModelError("master equation: joint state space exceeds " +
                       std::to_string(opts.max_states) + " configurations");
    }
    size_ = static_cast<std::size_t>(total);
    power_.assign(g_.size(), 1);
    for (std::size_t v = 1; v < g_.size(); ++v) power_[v] = power_[v - 1] * ns;
  }

  std::size_t size() const { return size_; }

  int digit(std::size_t s, std::size_t v) const {
    return static_cast<int>((s / power_[v]) % static_cast<std::size_t>(m_.num_states()));
  }

  void rhs(double t, std::span<const double> p, std::span<double> dp) const {
    const int ns = m_.num_states();
    const std::size_t n = g_.size();
    std::fill(dp.begin(), dp.end(), 0.0);
    std::vector<double> counts(ns);
    for (std::size_t s = 0; s < size_; ++s) {
      if (p[s] == 0.0) continue;
      for (std::size_t v = 0; v < n; ++v) {
        std::fill(counts.begin(), counts.end(), 0.0);
        for (int w : g_.neighbors(static_cast<int>(v))) counts[digit(s, w)] += 1.0;
        const int a = digit(s, v);
        for (std::size_t j = 0; j < m_.num_jumps(); ++j) {
          const double r = m_.rate(j, t, a, counts, g_.degree(static_cast<int>(v)));
          if (r == 0.0) continue;
          const int b = m_.jump_target(a, j);
          if (b == kStar) throw ModelError(m_.name() + ": positive rate leaving the state space");
          const std::size_t to = s + (static_cast<std::size_t>(b) - a) * power_[v];
          dp[s] -= p[s] * r;
          dp[to] += p[s] * r;
        }
      }
    }
  }

  /// Product law with per-vertex marginals.
  std::vector<double> product_law(const std::vector<std::vector<double>>& q) const {
    std::vector<double> p(size_, 1.0);
    for (std::size_t s = 0; s < size_; ++s) {
      for (std::size_t v = 0; v < g_.size(); ++v) p[s] *= q[v][digit(s, v)];
    }
    return p;
  }

  std::vector<std::vector<double>> vertex_marginals(std::span<const double> p) const {
    std::vector<std::vector<double>> out(g_.size(), std::vector<double>(m_.num_states(), 0.0));
    for (std::size_t s = 0; s < size_; ++s) {
      for (std::size_t v = 0; v < g_.size(); ++v) out[v][digit(s, v)] += p[s];
    }
    return out;
  }

 private:
  Graph g_;
  ModelSpec m_;
  std::size_t size_ = 1;
  std::vector<std::size_t> power_;
};

inline MasterEquationSolution exact_master_equation(const Graph& g, const ModelSpec& m,
                                                    const std::vector<std::vector<double>>& init,
                                                    std::span<const double> output_times,
                                                    const MasterEquationOptions& opts = {}) {
  if (!opts.allow_cyclic) require_acyclic(m);
  if (init.size() != g.size()) throw ModelError("master equation: one marginal per vertex required");
  for (const auto& q : init) {
    if (static_cast<int>(q.size()) != m.num_states()) {
      throw ModelError("master equation: marginal has the wrong number of states");
    }
  }
  MasterEquation me(g, m, opts);
  auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) { me.rhs(t, y, dy); };
  Trajectory tr = integrate_probability_flow(rhs, me.product_law(init), output_times, opts.solver);
  MasterEquationSolution out;
  out.times = tr.times;
  out.stats = tr.stats;
  for (auto& p : tr.states) {
    auto pv = me.vertex_marginals(p);
    std::vector<double> avg(m.num_states(), 0.0);
    for (const auto& q : pv) {
      for (int a = 0; a < m.num_states(); ++a) avg[a] += q[a] / static_cast<double>(g.size());
    }
    out.per_vertex.push_back(std::move(pv));
    out.average.push_back(std::move(avg));
    out.joint.push_back(std::move(p));
  }
  return out;
}

/// Same law at every vertex.
inline MasterEquationSolution exact_master_equation(const Graph& g, const ModelSpec& m,
                                                    std::span<const double> q,
                                                    std::span<const double> output_times,
                                                    const MasterEquationOptions& opts = {}) {
  return exact_master_equation(g, m, std::vector<std::vector<double>>(g.size(), {q.begin(), q.end()}),
                               output_times, opts);
}

}  // namespace locfield
