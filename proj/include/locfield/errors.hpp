#pragma once

#include <stdexcept>
#include <string>

namespace locfield {

// Malformed graph input: non-graphical sequences, bad edge lists, rejection caps.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rate function broke its own contract (undeclared edge, bound, cycle).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model or experiment documents that fail to parse or validate.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace locfield
