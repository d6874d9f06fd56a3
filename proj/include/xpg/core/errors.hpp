#pragma once

#include <stdexcept>
#include <string>

namespace xpg {

// Scene generation could not place every object.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite network output or loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or unknown configuration key, missing checkpoint, malformed file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Replayed trace does not match the recorded one.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An upstream invariant was violated (e.g. scores claim an occluder exists
// but name none).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace xpg
