#pragma once

// Rate-function interface for interacting jump processes, transition-graph
// extraction, and the acyclicity check that every solver relies on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "locfield/errors.hpp"
#include "locfield/random.hpp"

namespace locfield {

// State indices are positions in ModelSpec::states(); kStar marks an absent
// particle (a padded neighbor slot, or a vertex outside the graph).
inline constexpr int kStar = -1;

struct StateInfo {
  int code = 0;
  std::string label;
};

// rate(jump index, t, own state index, neighbor counts per state, degree).
// Neighbors enter only through their counts, so every rate is invariant
// under reordering of the neighbors.
using RateFunction =
    std::function<double(std::size_t, double, int, std::span<const double>, int)>;

// C(d, t): bound on every jump rate of a particle with d - 1 neighbors.
using RateBound = std::function<double(int, double)>;

class ModelSpec {
 public:
  ModelSpec() = default;

  /// `edges` are (from, to) state-index pairs whose code difference must be a jump.
  ModelSpec(std::string name, std::vector<StateInfo> states, std::vector<int> jumps,
            RateFunction rate, std::vector<std::pair<int, int>> edges, RateBound bound)
      : name_(std::move(name)),
        states_(std::move(states)),
        jumps_(std::move(jumps)),
        rate_(std::move(rate)),
        edges_(std::move(edges)),
        bound_(std::move(bound)) {
    if (states_.empty()) throw ModelError(name_ + ": empty state space");
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (states_[i].label.empty()) states_[i].label = std::to_string(states_[i].code);
      for (std::size_t k = 0; k < i; ++k) {
        if (states_[k].code == states_[i].code) {
          throw ModelError(name_ + ": duplicate state code " + std::to_string(states_[i].code));
        }
        if (states_[k].label == states_[i].label) {
          throw ModelError(name_ + ": duplicate state label " + states_[i].label);
        }
      }
    }
    for (std::size_t i = 0; i < jumps_.size(); ++i) {
      if (jumps_[i] == 0) throw ModelError(name_ + ": zero jump");
      for (std::size_t k = 0; k < i; ++k) {
        if (jumps_[k] == jumps_[i]) throw ModelError(name_ + ": duplicate jump");
      }
    }
    targets_.assign(states_.size() * jumps_.size(), kStar);
    for (std::size_t a = 0; a < states_.size(); ++a) {
      for (std::size_t j = 0; j < jumps_.size(); ++j) {
        targets_[a * jumps_.size() + j] = index_of_code(states_[a].code + jumps_[j]);
      }
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    for (auto [a, b] : edges_) {
      if (a < 0 || b < 0 || a >= num_states() || b >= num_states()) {
        throw ModelError(name_ + ": declared edge references an unknown state");
      }
      if (!jump_index(states_[b].code - states_[a].code)) {
        throw ModelError(name_ + ": declared edge " + states_[a].label + "->" + states_[b].label +
                         " is not a permitted jump");
      }
    }
  }

  const std::string& name() const { return name_; }
  int num_states() const { return static_cast<int>(states_.size()); }
  std::size_t num_jumps() const { return jumps_.size(); }
  const std::vector<StateInfo>& states() const { return states_; }
  const std::vector<int>& jumps() const { return jumps_; }
  int code(int state) const { return states_[state].code; }
  const std::string& label(int state) const { return states_[state].label; }
  const std::vector<std::pair<int, int>>& declared_edges() const { return edges_; }

  int index_of_code(int code) const {
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (states_[i].code == code) return static_cast<int>(i);
    }
    return kStar;
  }

  int index_of_label(std::string_view label) const {
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (states_[i].label == label) return static_cast<int>(i);
    }
    return kStar;
  }

  std::optional<std::size_t> jump_index(int jump_code) const {
    for (std::size_t j = 0; j < jumps_.size(); ++j) {
      if (jumps_[j] == jump_code) return j;
    }
    return std::nullopt;
  }

  /// State index reached from `state` by jump `j`, or kStar if it leaves the state space.
  int jump_target(int state, std::size_t j) const {
    if (state == kStar) return kStar;
    return targets_[static_cast<std::size_t>(state) * jumps_.size() + j];
  }

  double rate(std::size_t j, double t, int state, std::span<const double> neighbor_counts,
              int degree) const {
    if (state == kStar) return 0.0;
    return rate_(j, t, state, neighbor_counts, degree);
  }

  double rate_bound(int d, double t) const { return bound_(d, t); }

 private:
  std::string name_;
  std::vector<StateInfo> states_;
  std::vector<int> jumps_;
  RateFunction rate_;
  std::vector<std::pair<int, int>> edges_;
  RateBound bound_;
  std::vector<int> targets_;
};

/// Rate of jump `jump_code` for a particle in state `a` (index or kStar) with
/// the given neighbor states; kStar neighbors are absent particles.
inline double evaluate_rate(const ModelSpec& m, int jump_code, double t, int a,
                            std::span<const int> neighbors) {
  auto j = m.jump_index(jump_code);
  if (!j || a == kStar) return 0.0;
  std::vector<double> counts(m.num_states(), 0.0);
  int degree = 0;
  for (int x : neighbors) {
    if (x == kStar) continue;
    counts[x] += 1.0;
    ++degree;
  }
  return m.rate(*j, t, a, counts, degree);
}

struct TransitionGraph {
  int num_states = 0;
  std::vector<std::pair<int, int>> edges;

  std::vector<std::vector<int>> successors() const {
    std::vector<std::vector<int>> out(num_states);
    for (auto [a, b] : edges) out[a].push_back(b);
    return out;
  }

  /// Is b reachable from a by a directed path of length >= 1?
  bool reachable(int a, int b) const {
    auto succ = successors();
    std::vector<char> seen(num_states, 0);
    std::vector<int> stack = succ[a];
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      if (x == b) return true;
      if (seen[x]) continue;
      seen[x] = 1;
      for (int y : succ[x]) stack.push_back(y);
    }
    return false;
  }
};

/// The graph of declared edges, without probing the rates.
inline TransitionGraph declared_transition_graph(const ModelSpec& m) {
  return {m.num_states(), m.declared_edges()};
}

struct ProbeOptions {
  std::size_t draws = 10'000;
  int max_degree = 6;
  double max_time = 10.0;
  std::uint64_t seed = 0x5eed;
};

enum class ViolationKind { undeclared_edge, leaves_state_space, bound_exceeded, negative_rate };

struct RateViolation {
  ViolationKind kind;
  int jump = 0;  // jump code
  double t = 0.0;
  int state = kStar;
  std::vector<int> neighbors;
  double rate = 0.0;
  double bound = 0.0;

  std::string describe(const ModelSpec& m) const {
    std::ostringstream out;
    out.precision(6);
    switch (kind) {
      case ViolationKind::undeclared_edge: out << "positive rate on undeclared edge"; break;
      case ViolationKind::leaves_state_space: out << "positive rate leaving the state space"; break;
      case ViolationKind::bound_exceeded: out << "rate exceeds declared bound " << bound; break;
      case ViolationKind::negative_rate: out << "rate is negative or not a number"; break;
    }
    out << ": j=" << jump << " t=" << t << " a=" << m.label(state) << " x={";
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      out << (i ? "," : "") << m.label(neighbors[i]);
    }
    out << "} rate=" << rate;
    return out.str();
  }
};

struct ProbeReport {
  std::size_t draws = 0;
  std::vector<RateViolation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const RateViolation& v) { return v.kind == kind; });
  }
};

/// Randomized audit of a black-box rate function over (t, a, neighbor multiset).
/// Only the first violation of each kind is recorded.
inline ProbeReport probe_rates(const ModelSpec& m, const ProbeOptions& opts = {}) {
  ProbeReport report;
  Engine rng = make_stream(opts.seed, 0);
  const auto edges = m.declared_edges();
  auto declared = [&](int a, int b) {
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(a, b));
  };
  std::vector<double> counts(m.num_states());
  std::vector<int> neighbors;
  for (std::size_t draw = 0; draw < opts.draws; ++draw) {
    ++report.draws;
    const double t = uniform01(rng) * opts.max_time;
    const int a = static_cast<int>(uniform_index(rng, m.num_states()));
    const int degree = static_cast<int>(uniform_index(rng, opts.max_degree + 1));
    neighbors.assign(degree, 0);
    std::fill(counts.begin(), counts.end(), 0.0);
    for (auto& x : neighbors) {
      x = static_cast<int>(uniform_index(rng, m.num_states()));
      counts[x] += 1.0;
    }
    std::sort(neighbors.begin(), neighbors.end());
    for (std::size_t j = 0; j < m.num_jumps(); ++j) {
      const double r = m.rate(j, t, a, counts, degree);
      const double bound = m.rate_bound(degree + 1, t);
      auto record = [&](ViolationKind kind) {
        if (report.has(kind)) return;
        report.violations.push_back({kind, m.jumps()[j], t, a, neighbors, r, bound});
      };
      if (!(r >= 0.0)) {
        record(ViolationKind::negative_rate);
        continue;
      }
      if (r > bound) record(ViolationKind::bound_exceeded);
      if (r > 0.0) {
        const int b = m.jump_target(a, j);
        if (b == kStar) {
          record(ViolationKind::leaves_state_space);
        } else if (!declared(a, b)) {
          record(ViolationKind::undeclared_edge);
        }
      }
    }
  }
  return report;
}

/// Declared transition graph, after probing that no positive rate escapes it.
inline TransitionGraph transition_graph(const ModelSpec& m, const ProbeOptions& opts = {}) {
  const ProbeReport report = probe_rates(m, opts);
  for (const auto& v : report.violations) {
    if (v.kind == ViolationKind::undeclared_edge || v.kind == ViolationKind::leaves_state_space) {
      throw ModelError(m.name() + ": " + v.describe(m));
    }
  }
  return declared_transition_graph(m);
}

struct AcyclicityResult {
  bool acyclic = false;
  std::vector<int> order;  // topological order when acyclic
  std::vector<int> cycle;  // closed walk s0, s1, ..., s0 otherwise

  explicit operator bool() const { return acyclic; }
};

/// Kahn's algorithm with smallest-index tie breaking; a DFS extracts a cycle
/// witness when the sort stalls.
inline AcyclicityResult check_acyclic(const TransitionGraph& tg) {
  const int n = tg.num_states;
  auto succ = tg.successors();
  std::vector<int> indegree(n, 0);
  for (auto [a, b] : tg.edges) ++indegree[b];
  AcyclicityResult result;
  std::vector<char> done(n, 0);
  for (int placed = 0; placed < n; ++placed) {
    int next = -1;
    for (int v = 0; v < n; ++v) {
      if (!done[v] && indegree[v] == 0) {
        next = v;
        break;
      }
    }
    if (next < 0) break;
    done[next] = 1;
    result.order.push_back(next);
    for (int w : succ[next]) --indegree[w];
  }
  if (static_cast<int>(result.order.size()) == n) {
    result.acyclic = true;
    return result;
  }
  result.order.clear();

  std::vector<int> color(n, 0), stack;
  std::function<bool(int)> dfs = [&](int v) {
    color[v] = 1;
    stack.push_back(v);
    for (int w : succ[v]) {
      if (color[w] == 1) {
        auto it = std::find(stack.begin(), stack.end(), w);
        result.cycle.assign(it, stack.end());
        result.cycle.push_back(w);
        return true;
      }
      if (color[w] == 0 && dfs(w)) return true;
    }
    color[v] = 2;
    stack.pop_back();
    return false;
  };
  for (int v = 0; v < n && result.cycle.empty(); ++v) {
    if (color[v] == 0) dfs(v);
  }
  return result;
}

inline std::string format_states(const ModelSpec& m, std::span<const int> states) {
  std::string out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i) out += ",";
    out += m.label(states[i]);
  }
  return out;
}

/// Throws ModelError with a cycle witness unless the declared edges form a DAG.
inline void require_acyclic(const ModelSpec& m) {
  auto result = check_acyclic(declared_transition_graph(m));
  if (!result) {
    throw ModelError(m.name() + ": transition graph has a cycle (" +
                     format_states(m, result.cycle) + ")");
  }
}

}  // namespace locfield
