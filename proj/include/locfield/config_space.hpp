#pragma once

// Root-neighborhood configurations (a_root; a_1, ..., a_dmax) with padded
// slots, their symmetry-reduced (canonical) classes, and probability laws
// over those classes.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locfield/errors.hpp"
#include "locfield/graphs.hpp"
#include "locfield/model.hpp"

namespace locfield {

/// entries[0] is the root state, entries[1..d_max] the neighbor slots; the
/// first k slots hold states and the remainder kStar.
struct NeighborhoodConfig {
  std::vector<int> entries;

  int root() const { return entries.front(); }

  int degree() const {
    int k = 0;
    while (k + 1 < static_cast<int>(entries.size()) && entries[k + 1] != kStar) ++k;
    return k;
  }

  std::span<const int> neighbors() const {
    return std::span<const int>(entries).subspan(1, static_cast<std::size_t>(degree()));
  }

  /// Root in a state, slots 1..k filled, remaining slots padded.
  bool is_well_formed() const {
    if (entries.empty() || entries[0] == kStar) return false;
    const int k = degree();
    for (std::size_t i = static_cast<std::size_t>(k) + 1; i < entries.size(); ++i) {
      if (entries[i] != kStar) return false;
    }
    return true;
  }

  NeighborhoodConfig canonical() const {
    NeighborhoodConfig c = *this;
    const int k = degree();
    std::sort(c.entries.begin() + 1, c.entries.begin() + 1 + k);
    return c;
  }

  bool is_canonical() const {
    auto nb = neighbors();
    return std::is_sorted(nb.begin(), nb.end());
  }

  friend auto operator<=>(const NeighborhoodConfig&, const NeighborhoodConfig&) = default;
};

/// "S|I,S,*": root label, then neighbor slots with '*' for padding.
inline std::string to_string(const NeighborhoodConfig& c, const ModelSpec& m) {
  std::string out = m.label(c.root()) + "|";
  for (std::size_t i = 1; i < c.entries.size(); ++i) {
    if (i > 1) out += ",";
    out += c.entries[i] == kStar ? "*" : m.label(c.entries[i]);
  }
  return out;
}

inline NeighborhoodConfig parse_config_string(std::string_view text, const ModelSpec& m,
                                              int d_max) {
  const auto bar = text.find('|');
  if (bar == std::string_view::npos) throw ConfigError("configuration '" + std::string(text) + "': missing '|'");
  NeighborhoodConfig c;
  c.entries.assign(static_cast<std::size_t>(d_max) + 1, kStar);
  c.entries[0] = m.index_of_label(text.substr(0, bar));
  if (c.entries[0] == kStar) throw ConfigError("configuration '" + std::string(text) + "': unknown root state");
  std::string_view rest = text.substr(bar + 1);
  int slot = 1;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto tok = rest.substr(0, comma);
    if (tok != "*") {
      if (slot > d_max) throw ConfigError("configuration '" + std::string(text) + "': too many neighbors");
      const int x = m.index_of_label(tok);
      if (x == kStar) throw ConfigError("configuration '" + std::string(text) + "': unknown state '" + std::string(tok) + "'");
      c.entries[slot++] = x;
    }
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return c;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

/// Number of canonical classes: m * sum_{k in support} C(k + m - 1, m - 1).
inline std::size_t canonical_class_count(const DegreeDistribution& theta, int num_states) {
  double total = 0.0;
  for (int k : theta.support()) total += binomial(k + num_states - 1, num_states - 1);
  return static_cast<std::size_t>(num_states * total);
}

/// Indexed set of canonical configurations over the support of theta.
class ConfigSpace {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  ConfigSpace(const DegreeDistribution& theta, int num_states)
      : theta_(theta), num_states_(num_states), d_max_(theta.max_degree()) {
    if (num_states < 1) throw ModelError("configuration space needs at least one state");
    std::vector<int> multiset;
    for (int k : theta.support()) {
      for (int root = 0; root < num_states; ++root) {
        multiset.assign(static_cast<std::size_t>(k), 0);
        for (;;) {
          NeighborhoodConfig c;
          c.entries.assign(static_cast<std::size_t>(d_max_) + 1, kStar);
          c.entries[0] = root;
          std::copy(multiset.begin(), multiset.end(), c.entries.begin() + 1);
          add(std::move(c));
          // next non-decreasing sequence over 0..m-1
          int pos = k - 1;
          while (pos >= 0 && multiset[pos] == num_states - 1) --pos;
          if (pos < 0) break;
          const int v = multiset[pos] + 1;
          for (int i = pos; i < k; ++i) multiset[i] = v;
        }
      }
    }
  }

  std::size_t size() const { return configs_.size(); }
  int num_states() const { return num_states_; }
  int d_max() const { return d_max_; }
  const DegreeDistribution& theta() const { return theta_; }

  const NeighborhoodConfig& config(std::size_t i) const { return configs_[i]; }
  int root(std::size_t i) const { return configs_[i].entries[0]; }
  int degree(std::size_t i) const { return degrees_[i]; }

  /// Number of ordered configurations in class i: k! / prod(n_x!).
  double multiplicity(std::size_t i) const { return multiplicity_[i]; }

  /// Neighbor counts per state for class i.
  std::span<const double> neighbor_counts(std::size_t i) const {
    return std::span<const double>(counts_).subspan(i * num_states_, num_states_);
  }

  /// Index of the class containing `c` (any ordering), or npos outside C^theta.
  std::size_t index_of(const NeighborhoodConfig& c) const {
    if (c.entries.size() != static_cast<std::size_t>(d_max_) + 1 || !c.is_well_formed()) return npos;
    for (int x : c.entries) {
      if (x != kStar && (x < 0 || x >= num_states_)) return npos;
    }
    auto it = index_.find(c.canonical().entries);
    return it == index_.end() ? npos : it->second;
  }

 private:
  void add(NeighborhoodConfig c) {
    const std::size_t i = configs_.size();
    const int k = c.degree();
    std::vector<double> counts(num_states_, 0.0);
    for (int x : c.neighbors()) counts[x] += 1.0;
    double mult = 1.0;
    for (int r = 2; r <= k; ++r) mult *= r;
    for (double n : counts) {
      for (int r = 2; r <= static_cast<int>(n); ++r) mult /= r;
    }
    index_.emplace(c.entries, i);
    configs_.push_back(std::move(c));
    degrees_.push_back(k);
    multiplicity_.push_back(std::round(mult));
    counts_.insert(counts_.end(), counts.begin(), counts.end());
  }

  DegreeDistribution theta_;
  int num_states_;
  int d_max_;
  std::vector<NeighborhoodConfig> configs_;
  std::vector<int> degrees_;
  std::vector<double> multiplicity_;
  std::vector<double> counts_;
  std::map<std::vector<int>, std::size_t> index_;
};

inline std::shared_ptr<const ConfigSpace> enumerate_configs(const DegreeDistribution& theta,
                                                            int num_states) {
  return std::make_shared<const ConfigSpace>(theta, num_states);
}

/// Probability law over canonical classes. values()[i] is the total mass of
/// class i, i.e. the sum over every ordering of its neighbor entries.
class LawVector {
 public:
  LawVector() = default;
  LawVector(std::shared_ptr<const ConfigSpace> space, std::vector<double> mass)
      : space_(std::move(space)), mass_(std::move(mass)) {
    if (!space_ || mass_.size() != space_->size()) {
      throw ModelError("law vector size does not match its configuration space");
    }
  }

  const ConfigSpace& space() const { return *space_; }
  const std::shared_ptr<const ConfigSpace>& space_ptr() const { return space_; }
  std::span<const double> values() const { return mass_; }
  std::vector<double>& mutable_values() { return mass_; }
  double operator[](std::size_t i) const { return mass_[i]; }
  std::size_t size() const { return mass_.size(); }

  /// Mass of one ordered configuration (class mass / multiplicity).
  double ordered_probability(const NeighborhoodConfig& c) const {
    const auto i = space_->index_of(c);
    if (i == ConfigSpace::npos) return 0.0;
    return mass_[i] / space_->multiplicity(i);
  }

  double total() const {
    double s = 0.0;
    for (double v : mass_) s += v;
    return s;
  }

 private:
  std::shared_ptr<const ConfigSpace> space_;
  std::vector<double> mass_;
};

/// i.i.d. states with marginal q at the root and every neighbor; degree ~ theta.
inline LawVector build_initial_law(std::shared_ptr<const ConfigSpace> space,
                                   std::span<const double> q) {
  if (static_cast<int>(q.size()) != space->num_states()) {
    throw ModelError("initial marginal has the wrong number of states");
  }
  double qsum = 0.0;
  for (double v : q) {
    if (!(v >= 0.0)) throw ModelError("initial marginal has a negative entry");
    qsum += v;
  }
  if (std::abs(qsum - 1.0) > 1e-9) throw ModelError("initial marginal does not sum to 1");
  std::vector<double> mass(space->size());
  for (std::size_t i = 0; i < space->size(); ++i) {
    double p = space->theta()(space->degree(i)) * q[space->root(i)] * space->multiplicity(i);
    for (int x : space->config(i).neighbors()) p *= q[x];
    mass[i] = p;
  }
  return LawVector(std::move(space), std::move(mass));
}

inline LawVector build_initial_law(const DegreeDistribution& theta, std::span<const double> q) {
  return build_initial_law(enumerate_configs(theta, static_cast<int>(q.size())), q);
}

/// Root marginal of a neighborhood law.
inline std::vector<double> marginalize(const ConfigSpace& space, std::span<const double> mass) {
  std::vector<double> mu(space.num_states(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) mu[space.root(i)] += mass[i];
  return mu;
}

inline std::vector<double> marginalize(const LawVector& p) {
  return marginalize(p.space(), p.values());
}

/// Total variation distance between probability vectors.
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace locfield
