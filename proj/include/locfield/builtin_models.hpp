#pragma once

// Catalog of example dynamics: compartmental epidemics, an idealized
// seizure-propagation model, the entrenched majority voter model and a
// thresholded Hawkes-type counting process.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "locfield/errors.hpp"
#include "locfield/model.hpp"

namespace locfield {

using ParamValue = std::variant<double, std::string>;
using ParamMap = std::map<std::string, ParamValue, std::less<>>;

namespace detail {

class ParamReader {
 public:
  ParamReader(std::string_view model, const ParamMap& params) : model_(model), params_(params) {}

  double number(const std::string& key) {
    used_.insert(key);
    auto it = params_.find(key);
    if (it == params_.end()) throw ConfigError(model_ + ": missing parameter '" + key + "'");
    if (auto* v = std::get_if<double>(&it->second); v && std::isfinite(*v)) return *v;
    throw ConfigError(model_ + ": parameter '" + key + "' must be a finite number");
  }

  double non_negative(const std::string& key) {
    const double v = number(key);
    if (v < 0.0) throw ConfigError(model_ + ": parameter '" + key + "' must be >= 0");
    return v;
  }

  std::string text(const std::string& key) {
    used_.insert(key);
    auto it = params_.find(key);
    if (it == params_.end()) throw ConfigError(model_ + ": missing parameter '" + key + "'");
    if (auto* v = std::get_if<std::string>(&it->second)) return *v;
    throw ConfigError(model_ + ": parameter '" + key + "' must be a string");
  }

  void reject_unknown() const {
    for (const auto& [key, value] : params_) {
      if (!used_.count(key)) throw ConfigError(model_ + ": unknown parameter '" + key + "'");
    }
  }

 private:
  std::string model_;
  const ParamMap& params_;
  std::set<std::string, std::less<>> used_;
};

inline ModelSpec make_sir(ParamReader& p) {
  const double beta = p.non_negative("beta");
  const double gamma = p.non_negative("gamma");
  p.reject_unknown();
  enum { S, I, R };
  auto rate = [=](std::size_t, double, int a, std::span<const double> c, int) {
    if (a == S) return beta * c[I];
    if (a == I) return gamma;
    return 0.0;
  };
  auto bound = [=](int d, double) { return std::max(beta * (d - 1), gamma); };
  return ModelSpec("sir", {{0, "S"}, {1, "I"}, {2, "R"}}, {1}, rate, {{S, I}, {I, R}}, bound);
}

inline ModelSpec make_seir(ParamReader& p) {
  const double beta = p.non_negative("beta");
  const double sigma = p.non_negative("sigma");
  const double gamma = p.non_negative("gamma");
  p.reject_unknown();
  enum { S, E, I, R };
  auto rate = [=](std::size_t, double, int a, std::span<const double> c, int) {
    switch (a) {
      case S: return beta * c[I];
      case E: return sigma;
      case I: return gamma;
      default: return 0.0;
    }
  };
  auto bound = [=](int d, double) { return std::max({beta * (d - 1), sigma, gamma}); };
  return ModelSpec("seir", {{0, "S"}, {1, "E"}, {2, "I"}, {3, "R"}}, {1}, rate,
                   {{S, E}, {E, I}, {I, R}}, bound);
}

// S -> I1 -> R and S -> I2 -> R; codes S=0, I1=1, I2=2, R=3, jumps {+1, +2}.
inline ModelSpec make_two_strain_sir(ParamReader& p) {
  const double beta1 = p.non_negative("beta1");
  const double beta2 = p.non_negative("beta2");
  const double gamma1 = p.non_negative("gamma1");
  const double gamma2 = p.non_negative("gamma2");
  p.reject_unknown();
  enum { S, I1, I2, R };
  auto rate = [=](std::size_t j, double, int a, std::span<const double> c, int) {
    if (j == 0) {  // +1
      if (a == S) return beta1 * c[I1];
      if (a == I2) return gamma2;
    } else {  // +2
      if (a == S) return beta2 * c[I2];
      if (a == I1) return gamma1;
    }
    return 0.0;
  };
  auto bound = [=](int d, double) {
    return std::max({beta1 * (d - 1), beta2 * (d - 1), gamma1, gamma2});
  };
  return ModelSpec("two_strain_sir", {{0, "S"}, {1, "I1"}, {2, "I2"}, {3, "R"}}, {1, 2}, rate,
                   {{S, I1}, {S, I2}, {I1, R}, {I2, R}}, bound);
}

// States (phase, excitability) encoded as 2*phase + type, type 0 for
// inhibitory (-alpha_minus) and 1 for excitatory (+alpha_plus). The only jump
// advances the phase S -> I -> R and leaves the type alone.
//
// Susceptible:  max(0, alpha_v + sum_w beta*[w in I] - alpha_minus*[w inhibitory, in S])
// In seizure:   s / (d - s) with s = 1 + alpha_minus * #(inhibitory susceptible
//               neighbors), capped at recovery_cap; saturates at the cap when d <= s.
inline ModelSpec make_seizure(ParamReader& p) {
  const double alpha_plus = p.non_negative("alpha_plus");
  const double alpha_minus = p.non_negative("alpha_minus");
  const double beta = p.non_negative("beta");
  const double cap = p.number("recovery_cap");
  if (!(cap > 0.0)) throw ConfigError("seizure: parameter 'recovery_cap' must be > 0");
  p.reject_unknown();
  enum { S_inh, S_exc, I_inh, I_exc, R_inh, R_exc };
  auto rate = [=](std::size_t, double, int a, std::span<const double> c, int d) {
    const double inhibitors = alpha_minus * c[S_inh];
    if (a == S_inh || a == S_exc) {
      const double own = a == S_exc ? alpha_plus : -alpha_minus;
      return std::max(0.0, own + beta * (c[I_inh] + c[I_exc]) - inhibitors);
    }
    if (a == I_inh || a == I_exc) {
      const double s = 1.0 + inhibitors;
      const double denom = d - s;
      if (denom <= 0.0) return cap;
      return std::min(cap, s / denom);
    }
    return 0.0;
  };
  auto bound = [=](int d, double) { return std::max(alpha_plus + beta * (d - 1), cap); };
  return ModelSpec("seizure",
                   {{0, "S-"}, {1, "S+"}, {2, "I-"}, {3, "I+"}, {4, "R-"}, {5, "R+"}}, {2}, rate,
                   {{S_inh, I_inh}, {S_exc, I_exc}, {I_inh, R_inh}, {I_exc, R_exc}}, bound);
}

// Undecided (0) voters join the strict majority among their neighbors.
inline ModelSpec make_voter(ParamReader& p) {
  p.reject_unknown();
  enum { Red, Undecided, Blue };
  auto rate = [](std::size_t j, double, int a, std::span<const double> c, int) {
    if (a != Undecided) return 0.0;
    if (j == 0) return c[Blue] > c[Red] ? 1.0 : 0.0;
    return c[Blue] < c[Red] ? 1.0 : 0.0;
  };
  auto bound = [](int, double) { return 1.0; };
  return ModelSpec("voter", {{-1, "-1"}, {0, "0"}, {1, "1"}}, {1, -1}, rate,
                   {{Undecided, Blue}, {Undecided, Red}}, bound);
}

// Counting process capped at M with intensity f(u + alpha * sum of neighbor counts).
inline ModelSpec make_hawkes_threshold(ParamReader& p) {
  const double m_raw = p.number("M");
  if (m_raw < 1.0 || m_raw != std::floor(m_raw) || m_raw > 64.0) {
    throw ConfigError("hawkes_threshold: parameter 'M' must be an integer in [1, 64]");
  }
  const int M = static_cast<int>(m_raw);
  const double alpha = p.non_negative("alpha");
  const double u = p.number("u");
  const std::string f = p.text("f");
  p.reject_unknown();
  if (f != "identity" && f != "relu") {
    throw ConfigError("hawkes_threshold: parameter 'f' must be 'identity' or 'relu'");
  }
  if (f == "identity" && u < 0.0) {
    throw ConfigError("hawkes_threshold: identity link needs u >= 0");
  }
  auto link = [relu = f == "relu"](double x) { return relu ? std::max(0.0, x) : x; };
  auto rate = [=](std::size_t, double, int a, std::span<const double> c, int) {
    if (a >= M) return 0.0;
    double drive = 0.0;
    for (int x = 1; x <= M; ++x) drive += x * c[x];
    return link(u + alpha * drive);
  };
  auto bound = [=](int d, double) { return link(u + alpha * M * std::max(0, d - 1)); };
  std::vector<StateInfo> states;
  std::vector<std::pair<int, int>> edges;
  for (int x = 0; x <= M; ++x) {
    states.push_back({x, std::to_string(x)});
    if (x < M) edges.emplace_back(x, x + 1);
  }
  return ModelSpec("hawkes_threshold", std::move(states), {1}, rate, std::move(edges), bound);
}

}  // namespace detail

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"sir",     "seir",  "two_strain_sir",
                                              "seizure", "voter", "hawkes_threshold"};
  return names;
}

/// Builds a catalog model; every parameter must be present and no others.
inline ModelSpec builtin(std::string_view name, const ParamMap& params = {}) {
  detail::ParamReader reader(name, params);
  if (name == "sir") return detail::make_sir(reader);
  if (name == "seir") return detail::make_seir(reader);
  if (name == "two_strain_sir") return detail::make_two_strain_sir(reader);
  if (name == "seizure") return detail::make_seizure(reader);
  if (name == "voter") return detail::make_voter(reader);
  if (name == "hawkes_threshold") return detail::make_hawkes_threshold(reader);
  throw ConfigError("unknown builtin model '" + std::string(name) + "'");
}

}  // namespace locfield
