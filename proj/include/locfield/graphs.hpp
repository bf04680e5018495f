#pragma once

// Degree distributions, finite simple graphs, configuration-model sampling
// and truncated unimodular Galton-Watson trees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "locfield/errors.hpp"
#include "locfield/random.hpp"

namespace locfield {

/// Finite-support probability mass function over vertex degrees.
class DegreeDistribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  DegreeDistribution() = default;

  /// Takes probabilities as given; they must already sum to one.
  static DegreeDistribution from_pmf(const std::map<int, double>& pmf) {
    double total = 0.0;
    DegreeDistribution out;
    for (auto [k, p] : pmf) {
      if (k < 0) throw GraphError("degree distribution: negative degree " + std::to_string(k));
      if (!(p >= 0.0) || p > 1.0) {
        throw GraphError("degree distribution: probability out of [0,1] at degree " +
                         std::to_string(k));
      }
      total += p;
      if (p > 0.0) out.pmf_[k] = p;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "degree distribution: probabilities sum to " << total << ", expected 1";
      throw GraphError(msg.str());
    }
    return out;
  }

  /// Normalizes non-negative weights.
  static DegreeDistribution from_weights(const std::map<int, double>& weights) {
    double total = 0.0;
    for (auto [k, w] : weights) {
      if (k < 0 || !(w >= 0.0)) throw GraphError("degree distribution: invalid weight");
      total += w;
    }
    if (!(total > 0.0)) throw GraphError("degree distribution: weights sum to zero");
    DegreeDistribution out;
    for (auto [k, w] : weights) {
      if (w > 0.0) out.pmf_[k] = w / total;
    }
    return out;
  }

  static DegreeDistribution point_mass(int k) { return from_pmf({{k, 1.0}}); }

  double operator()(int k) const {
    auto it = pmf_.find(k);
    return it == pmf_.end() ? 0.0 : it->second;
  }

  const std::map<int, double>& pmf() const { return pmf_; }

  std::vector<int> support() const {
    std::vector<int> out;
    for (auto [k, p] : pmf_) out.push_back(k);
    return out;
  }

  int max_degree() const { return pmf_.empty() ? 0 : pmf_.rbegin()->first; }

  double mean() const {
    double m = 0.0;
    for (auto [k, p] : pmf_) m += k * p;
    return m;
  }

  int sample(Engine& rng) const {
    std::vector<double> w;
    std::vector<int> ks;
    for (auto [k, p] : pmf_) {
      ks.push_back(k);
      w.push_back(p);
    }
    return ks[categorical(rng, w)];
  }

  friend bool operator==(const DegreeDistribution&, const DegreeDistribution&) = default;

 private:
  std::map<int, double> pmf_;
};

/// Offspring law of non-root vertices in a unimodular Galton-Watson tree.
inline DegreeDistribution size_biased(const DegreeDistribution& theta) {
  const double mean = theta.mean();
  if (!(mean > 0.0)) throw GraphError("size_biased: distribution has zero mean");
  std::map<int, double> out;
  for (auto [k, p] : theta.pmf()) {
    if (k >= 1) out[k - 1] = k * p / mean;
  }
  return DegreeDistribution::from_weights(out);
}

/// Undirected simple graph on vertices 0..n-1 with sorted adjacency lists.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::size_t n) : adj_(n) {}

  static Graph from_edges(std::size_t n, std::span<const std::pair<int, int>> edges) {
    Graph g(n);
    for (auto [u, v] : edges) {
      if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
        throw GraphError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                         ") out of range");
      }
      if (u == v) throw GraphError("self-loop at vertex " + std::to_string(u));
      g.adj_[u].push_back(v);
      g.adj_[v].push_back(u);
    }
    for (auto& nb : g.adj_) {
      std::sort(nb.begin(), nb.end());
      if (std::adjacent_find(nb.begin(), nb.end()) != nb.end()) {
        throw GraphError("duplicate edge in edge list");
      }
    }
    return g;
  }

  std::size_t size() const { return adj_.size(); }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }
  std::span<const int> neighbors(int v) const { return adj_[v]; }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& nb : adj_) twice += nb.size();
    return twice / 2;
  }

  std::vector<int> degrees() const {
    std::vector<int> out;
    out.reserve(adj_.size());
    for (const auto& nb : adj_) out.push_back(static_cast<int>(nb.size()));
    return out;
  }

  /// Edges (u, v) with u < v in lexicographic order.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t u = 0; u < adj_.size(); ++u) {
      for (int v : adj_[u]) {
        if (static_cast<int>(u) < v) out.emplace_back(static_cast<int>(u), v);
      }
    }
    return out;
  }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::vector<int>> adj_;
};

/// Erdős–Gallai test: is `seq` the degree sequence of some simple graph?
inline bool validate_graphical(std::span<const int> seq) {
  std::vector<long long> d(seq.begin(), seq.end());
  long long total = 0;
  for (long long x : d) {
    if (x < 0) return false;
    total += x;
  }
  if (total % 2 != 0) return false;
  std::sort(d.begin(), d.end(), std::greater<>());
  const auto n = static_cast<long long>(d.size());
  long long prefix = 0;
  for (long long k = 1; k <= n; ++k) {
    prefix += d[k - 1];
    long long rhs = k * (k - 1);
    for (long long i = k; i < n; ++i) rhs += std::min(d[i], k);
    if (prefix > rhs) return false;
  }
  return true;
}

enum class MatchingMode { reject, erase };

struct ConfigurationModelOptions {
  MatchingMode mode = MatchingMode::reject;
  std::size_t max_attempts = 1'000'000;
};

namespace detail {

inline std::vector<int> half_edges(std::span<const int> degrees) {
  std::vector<int> stubs;
  for (std::size_t v = 0; v < degrees.size(); ++v) {
    for (int i = 0; i < degrees[v]; ++i) stubs.push_back(static_cast<int>(v));
  }
  return stubs;
}

inline void shuffle(std::vector<int>& xs, Engine& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    std::swap(xs[i - 1], xs[uniform_index(rng, i)]);
  }
}

}  // namespace detail

/// Uniform half-edge matching. In reject mode the matching is repeated until
/// it is simple, which yields the uniform law over simple graphs with the
/// given degrees; erase mode drops loops and collapses multi-edges instead.
inline Graph sample_configuration_model(std::span<const int> degrees, Engine& rng,
                                        const ConfigurationModelOptions& opts = {}) {
  const std::size_t n = degrees.size();
  if (opts.mode == MatchingMode::reject) {
    if (!validate_graphical(degrees)) throw GraphError("degree sequence is not graphical");
  } else {
    long long total = 0;
    for (int d : degrees) {
      if (d < 0) throw GraphError("negative degree");
      total += d;
    }
    if (total % 2 != 0) throw GraphError("degree sum is odd");
  }

  std::vector<int> stubs = detail::half_edges(degrees);
  if (opts.mode == MatchingMode::erase) {
    detail::shuffle(stubs, rng);
    std::vector<std::pair<int, int>> edges;
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      int u = stubs[i], v = stubs[i + 1];
      if (u == v) continue;
      edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return Graph::from_edges(n, edges);
  }

  std::vector<std::vector<int>> adj(n);
  for (std::size_t attempt = 0; attempt < opts.max_attempts; ++attempt) {
    detail::shuffle(stubs, rng);
    for (auto& nb : adj) nb.clear();
    bool simple = true;
    for (std::size_t i = 0; i + 1 < stubs.size() && simple; i += 2) {
      int u = stubs[i], v = stubs[i + 1];
      if (u == v || std::find(adj[u].begin(), adj[u].end(), v) != adj[u].end()) {
        simple = false;
        break;
      }
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    if (!simple) continue;
    std::vector<std::pair<int, int>> edges;
    for (std::size_t u = 0; u < n; ++u) {
      for (int v : adj[u]) {
        if (static_cast<int>(u) < v) edges.emplace_back(static_cast<int>(u), v);
      }
    }
    return Graph::from_edges(n, edges);
  }
  throw GraphError("configuration model: no simple matching after " +
                   std::to_string(opts.max_attempts) + " attempts");
}

/// i.i.d. degrees from theta; the last degree is redrawn until the sum is even.
inline std::vector<int> sample_degree_sequence(const DegreeDistribution& theta, std::size_t n,
                                               Engine& rng) {
  if (n == 0) return {};
  bool has_even = false, has_odd = false;
  for (int k : theta.support()) (k % 2 == 0 ? has_even : has_odd) = true;
  std::vector<int> degrees(n);
  long long total = 0;
  for (auto& d : degrees) {
    d = theta.sample(rng);
    total += d;
  }
  if (total % 2 != 0) {
    if (!(has_even && has_odd)) {
      throw GraphError("degree sequence: every draw has the same parity and n makes the sum odd");
    }
    total -= degrees.back();
    do {
      degrees.back() = theta.sample(rng);
    } while ((total + degrees.back()) % 2 != 0);
  }
  return degrees;
}

inline DegreeDistribution empirical_degree_distribution(const Graph& g) {
  if (g.size() == 0) throw GraphError("empirical degree distribution of an empty graph");
  std::map<int, double> counts;
  for (int d : g.degrees()) counts[d] += 1.0;
  for (auto& [k, c] : counts) c /= static_cast<double>(g.size());
  return DegreeDistribution::from_weights(counts);
}

/// Tree with Ulam–Harris labels: the root is the empty label, the children
/// of label v are v·1, ..., v·k.
struct RootedTree {
  struct Node {
    std::vector<int> label;
    int parent = -1;
    std::vector<int> children;
    int depth = 0;
  };

  std::vector<Node> nodes;
  int depth_cutoff = 0;

  std::size_t size() const { return nodes.size(); }

  std::string label_string(std::size_t i) const {
    if (nodes[i].label.empty()) return "root";
    std::string s;
    for (std::size_t k = 0; k < nodes[i].label.size(); ++k) {
      if (k) s += '.';
      s += std::to_string(nodes[i].label[k]);
    }
    return s;
  }

  Graph to_graph() const {
    std::vector<std::pair<int, int>> edges;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      edges.emplace_back(nodes[i].parent, static_cast<int>(i));
    }
    return Graph::from_edges(nodes.size(), edges);
  }
};

/// UGW(theta) truncated at `depth` generations: the root draws its offspring
/// from theta, every later vertex from the size-biased law.
inline RootedTree sample_ugw(const DegreeDistribution& theta, int depth, Engine& rng) {
  if (depth < 0) throw GraphError("sample_ugw: negative depth");
  RootedTree tree;
  tree.depth_cutoff = depth;
  tree.nodes.push_back({});
  std::optional<DegreeDistribution> offspring;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].depth >= depth) continue;
    int k;
    if (i == 0) {
      k = theta.sample(rng);
    } else {
      if (!offspring) offspring = size_biased(theta);
      k = offspring->sample(rng);
    }
    for (int c = 1; c <= k; ++c) {
      RootedTree::Node child;
      child.label = tree.nodes[i].label;
      child.label.push_back(c);
      child.parent = static_cast<int>(i);
      child.depth = tree.nodes[i].depth + 1;
      tree.nodes[i].children.push_back(static_cast<int>(tree.nodes.size()));
      tree.nodes.push_back(std::move(child));
    }
  }
  return tree;
}

// Edge-list text format: "n m" followed by m lines "u v" with u < v.

inline void write_edge_list(std::ostream& out, const Graph& g) {
  out << g.size() << ' ' << g.edge_count() << '\n';
  for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

inline Graph read_edge_list(std::istream& in) {
  long long n = -1, m = -1;
  if (!(in >> n >> m) || n < 0 || m < 0) throw GraphError("edge list: bad header, expected 'n m'");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long long i = 0; i < m; ++i) {
    long long u, v;
    if (!(in >> u >> v)) {
      throw GraphError("edge list: expected " + std::to_string(m) + " edges, found " +
                       std::to_string(i));
    }
    if (u >= v) throw GraphError("edge list: line " + std::to_string(i + 2) + " needs u < v");
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }
  return Graph::from_edges(static_cast<std::size_t>(n), edges);
}

}  // namespace locfield
