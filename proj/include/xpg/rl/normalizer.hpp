#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xpg::rl {

// Per-dimension running mean/variance (population), merged with Chan's
// parallel update so a stream matches a two-pass batch computation.
class RunningNormalizer {
 public:
  RunningNormalizer() = default;
  explicit RunningNormalizer(std::size_t dim, double clip = 10.0, double epsilon = 1e-8);

  void update(std::span<const double> x);
  void update_batch(std::span<const double> rows, std::size_t n_rows);

  std::vector<double> normalize(std::span<const double> x) const;

  std::size_t dim() const { return mean_.size(); }
  double count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& variance() const { return var_; }
  double clip() const { return clip_; }
  double epsilon() const { return epsilon_; }

  void restore(double count, std::vector<double> mean, std::vector<double> var);

  friend bool operator==(const RunningNormalizer&, const RunningNormalizer&) = default;

 private:
  double count_ = 0.0;
  std::vector<double> mean_, var_;
  double clip_ = 10.0;
  double epsilon_ = 1e-8;
};

// Scales rewards by the running std of the discounted return.
class RewardScaler {
 public:
  explicit RewardScaler(double gamma, double clip = 10.0, double epsilon = 1e-8);

  double scale(double reward, bool done);
  const RunningNormalizer& stats() const { return returns_; }

 private:
  double gamma_;
  double clip_;
  double epsilon_;
  double running_return_ = 0.0;
  RunningNormalizer returns_;
};

}  // namespace xpg::rl
