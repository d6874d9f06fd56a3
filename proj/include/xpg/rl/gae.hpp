#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace xpg::rl {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// values holds T + 1 entries: V(s_0..s_{T-1}) and the bootstrap value of the
// state after the last step (ignored when that step is terminal). dones[t]
// marks that the episode ended with step t.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double gamma, double lambda);

}  // namespace xpg::rl
