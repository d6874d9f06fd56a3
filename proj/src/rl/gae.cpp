#include "xpg/rl/gae.hpp"

#include <stdexcept>

namespace xpg::rl {

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n)
    throw std::invalid_argument("compute_gae: need T rewards, T dones and T + 1 values");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * values[i + 1] * live - values[i];
    next = delta + gamma * lambda * live * next;
    out.advantages[i] = next;
    out.returns[i] = next + values[i];
  }
  return out;
}

}  // namespace xpg::rl
