#include "xpg/rl/normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xpg::rl {

RunningNormalizer::RunningNormalizer(std::size_t dim, double clip, double epsilon)
    : mean_(dim, 0.0), var_(dim, 0.0), clip_(clip), epsilon_(epsilon) {}

void RunningNormalizer::update(std::span<const double> x) { update_batch(x, 1); }

void RunningNormalizer::update_batch(std::span<const double> rows, std::size_t n_rows) {
  const std::size_t d = mean_.size();
  if (rows.size() != d * n_rows) throw std::invalid_argument("normalizer dimension mismatch");
  if (n_rows == 0) return;
  const double nb = static_cast<double>(n_rows);
  for (std::size_t k = 0; k < d; ++k) {
    double bm = 0.0;
    for (std::size_t r = 0; r < n_rows; ++r) bm += rows[r * d + k];
    bm /= nb;
    double bv = 0.0;
    for (std::size_t r = 0; r < n_rows; ++r) {
      const double e = rows[r * d + k] - bm;
      bv += e * e;
    }
    bv /= nb;
    const double total = count_ + nb;
    const double delta = bm - mean_[k];
    const double m2 = var_[k] * count_ + bv * nb + delta * delta * count_ * nb / total;
    mean_[k] += delta * nb / total;
    var_[k] = m2 / total;
  }
  count_ += nb;
}

std::vector<double> RunningNormalizer::normalize(std::span<const double> x) const {
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    out[k] = std::clamp((x[k] - mean_[k]) / std::sqrt(var_[k] + epsilon_), -clip_, clip_);
  return out;
}

void RunningNormalizer::restore(double count, std::vector<double> mean, std::vector<double> var) {
  if (mean.size() != var.size()) throw std::invalid_argument("normalizer restore size mismatch");
  count_ = count;
  mean_ = std::move(mean);
  var_ = std::move(var);
}

RewardScaler::RewardScaler(double gamma, double clip, double epsilon)
    : gamma_(gamma), clip_(clip), epsilon_(epsilon), returns_(1) {}

double RewardScaler::scale(double reward, bool done) {
  running_return_ = running_return_ * gamma_ + reward;
  const double r = running_return_;
  returns_.update(std::span<const double>(&r, 1));
  if (done) running_return_ = 0.0;
  return std::clamp(reward / std::sqrt(returns_.variance()[0] + epsilon_), -clip_, clip_);
}

}  // namespace xpg::rl
