#pragma once

// Model documents (JSON). Either a catalog model
//
//   {"schema_version": 1, "name": "sir", "params": {"beta": 1, "gamma": 0.5}}
//
// or a custom model with rates written in the expression language
//
//   {"schema_version": 1, "custom": "flip",
//    "states": [{"code": 0, "label": "S"}, {"code": 1, "label": "I"}],
//    "jumps": [1],
//    "rates": [{"state": 0, "jump": 1, "rate": "2 * count(1)"}],
//    "rate_bound": "2 * d"}
//
// `states` entries may also be bare integer codes. Each (state, jump) rate
// entry declares the transition edge state -> state + jump.

#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "locfield/builtin_models.hpp"
#include "locfield/errors.hpp"
#include "locfield/expression.hpp"
#include "locfield/model.hpp"

namespace locfield {

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline std::string line_column(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

inline nlohmann::json parse_json(std::string_view text, std::string_view what) {
  try {
    return nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigError(std::string(what) + ": parse error at " + line_column(text, byte) + ": " +
                      e.what());
  }
}

inline void check_schema_version(const nlohmann::json& doc, std::string_view what) {
  if (!doc.is_object()) throw ConfigError(std::string(what) + ": document must be an object");
  if (!doc.contains("schema_version")) {
    throw ConfigError(std::string(what) + ": missing 'schema_version'");
  }
  if (doc["schema_version"] != kSchemaVersion) {
    throw ConfigError(std::string(what) + ": unsupported schema_version");
  }
}

inline ParamMap params_from_json(const nlohmann::json& j, std::string_view where) {
  ParamMap out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw ConfigError(std::string(where) + ": 'params' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (value.is_number()) {
      out[key] = value.get<double>();
    } else if (value.is_string()) {
      out[key] = value.get<std::string>();
    } else {
      throw ConfigError(std::string(where) + ": parameter '" + key +
                        "' must be a number or string");
    }
  }
  return out;
}

template <class T>
T get_field(const nlohmann::json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key)) throw ConfigError(std::string(where) + ": missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

inline ModelSpec custom_model_from_json(const nlohmann::json& doc) {
  const auto name = get_field<std::string>(doc, "custom", "model");
  const std::string where = "model '" + name + "'";
  if (!doc.contains("states") || !doc["states"].is_array()) {
    throw ConfigError(where + ": 'states' must be a list");
  }
  std::vector<StateInfo> states;
  for (const auto& s : doc["states"]) {
    if (s.is_number_integer()) {
      states.push_back({s.get<int>(), ""});
    } else if (s.is_object()) {
      states.push_back({get_field<int>(s, "code", where),
                        s.contains("label") ? get_field<std::string>(s, "label", where) : ""});
    } else {
      throw ConfigError(where + ": each state is an integer code or {code, label}");
    }
  }
  const auto jumps = get_field<std::vector<int>>(doc, "jumps", where);

  auto index_of = [states](int code) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (states[i].code == code) return static_cast<int>(i);
    }
    return -1;
  };
  ExpressionSymbols rate_symbols{true, index_of};
  ExpressionSymbols bound_symbols{false, nullptr};

  const std::size_t m = states.size(), nj = jumps.size();
  auto table = std::make_shared<std::vector<std::optional<Expression>>>(m * nj);
  std::vector<std::pair<int, int>> edges;
  if (!doc.contains("rates") || !doc["rates"].is_array()) {
    throw ConfigError(where + ": 'rates' must be a list");
  }
  for (std::size_t r = 0; r < doc["rates"].size(); ++r) {
    const auto& entry = doc["rates"][r];
    const std::string at = where + " rates[" + std::to_string(r) + "]";
    const int code = get_field<int>(entry, "state", at);
    const int jump = get_field<int>(entry, "jump", at);
    const auto text = get_field<std::string>(entry, "rate", at);
    const int a = index_of(code);
    if (a < 0) throw ConfigError(at + ": unknown state code " + std::to_string(code));
    auto jit = std::find(jumps.begin(), jumps.end(), jump);
    if (jit == jumps.end()) throw ConfigError(at + ": jump " + std::to_string(jump) + " not in 'jumps'");
    const int b = index_of(code + jump);
    if (b < 0) throw ConfigError(at + ": jump leaves the state space");
    const auto j = static_cast<std::size_t>(jit - jumps.begin());
    auto& slot = (*table)[a * nj + j];
    if (slot) throw ConfigError(at + ": duplicate rate for this (state, jump)");
    try {
      slot = Expression::parse(text, rate_symbols);
    } catch (const ExpressionError& e) {
      throw ConfigError(at + ": " + e.what());
    }
    edges.emplace_back(a, b);
  }

  Expression bound_expr;
  try {
    bound_expr = Expression::parse(get_field<std::string>(doc, "rate_bound", where), bound_symbols);
  } catch (const ExpressionError& e) {
    throw ConfigError(where + " rate_bound: " + e.what());
  }

  std::vector<double> codes;
  for (const auto& s : states) codes.push_back(s.code);
  auto rate = [table, nj, codes](std::size_t j, double t, int a, std::span<const double> counts,
                                 int degree) {
    const auto& expr = (*table)[static_cast<std::size_t>(a) * nj + j];
    if (!expr) return 0.0;
    return expr->evaluate({t, codes[a], static_cast<double>(degree), counts});
  };
  auto bound = [bound_expr](int d, double t) {
    return bound_expr.evaluate({t, 0.0, static_cast<double>(d), {}});
  };
  return ModelSpec(name, std::move(states), jumps, rate, std::move(edges), bound);
}

}  // namespace detail

inline ModelSpec model_from_json(const nlohmann::json& doc) {
  const bool has_name = doc.contains("name"), has_custom = doc.contains("custom");
  if (has_name == has_custom) {
    throw ConfigError("model: exactly one of 'name' or 'custom' is required");
  }
  if (has_name) {
    const auto name = detail::get_field<std::string>(doc, "name", "model");
    return builtin(name, detail::params_from_json(doc.value("params", nlohmann::json()), name));
  }
  return detail::custom_model_from_json(doc);
}

/// Parses a model document; errors carry line:column positions.
inline ModelSpec parse_model_config(std::string_view text) {
  const auto doc = detail::parse_json(text, "model config");
  detail::check_schema_version(doc, "model config");
  return model_from_json(doc);
}

}  // namespace locfield
