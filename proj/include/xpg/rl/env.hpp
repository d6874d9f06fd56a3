#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "xpg/decision/decide.hpp"

namespace xpg::rl {

// Threshold head emits Thresholds; the flat head emits a primitive index.
using EnvAction = std::variant<decision::Thresholds, std::size_t>;

struct EnvObservation {
  std::vector<double> features;
  std::vector<double> image;  // empty unless the env renders image channels
};

struct EnvStep {
  EnvObservation observation;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual EnvObservation reset(std::uint64_t seed) = 0;
  virtual EnvStep step(const EnvAction& action) = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

}  // namespace xpg::rl
