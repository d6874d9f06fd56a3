#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xpg/core/errors.hpp"
#include "xpg/core/random.hpp"
#include "xpg/rl/adam.hpp"
#include "xpg/rl/env.hpp"
#include "xpg/rl/normalizer.hpp"
#include "xpg/rl/policy.hpp"

namespace xpg::rl {

struct PpoConfig {
  long total_steps = 10000;  // environment steps
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int batch_size = 64;
  int minibatch_size = 32;
  int epochs = 4;
  double clip = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  double adam_epsilon = 1e-5;
  bool normalize_obs = true;
  bool normalize_reward = true;
  bool normalize_advantage = true;

  // Throws std::invalid_argument on inconsistent values.
  void validate() const;
};

struct Transition {
  std::vector<double> features;  // as fed to the network (normalized if enabled)
  std::vector<double> image;
  std::array<double, 2> pre_squash{};
  decision::Thresholds thresholds;
  std::size_t action_index = 0;
  double log_prob = 0.0;
  double reward = 0.0;      // after reward scaling
  double raw_reward = 0.0;  // as emitted by the environment
  double value = 0.0;
  bool done = false;
};

// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double ratio, double advantage, double clip);

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;  // -mean clipped surrogate
  double value = 0.0;   // mean squared error against returns
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Loss over one minibatch. Advantages are used as given. When grad is
// non-empty it is overwritten with dL/dparams.
LossTerms ppo_loss(const ActorCritic& model, const PolicyParams& params,
                   std::span<const Transition> batch, std::span<const double> advantages,
                   std::span<const double> returns, const PpoConfig& config,
                   std::span<double> grad);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

// config.epochs passes of shuffled minibatches over one batch. Throws
// DivergenceError, leaving params at their last finite value, if a loss or
// gradient is non-finite.
UpdateStats ppo_update(const ActorCritic& model, PolicyParams& params, Adam& optimizer,
                       std::span<const Transition> batch, std::span<const double> advantages,
                       std::span<const double> returns, const PpoConfig& config, Rng& rng);

struct IterationLog {
  long iteration = 0;
  double mean_return = 0.0;   // undiscounted, raw rewards, episodes finished this iteration
  double success_rate = 0.0;  // same episodes
  double mean_tau1 = 0.0;     // sampled thresholds (NaN for the flat head)
  double mean_tau2 = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  long episodes = 0;

  friend bool operator==(const IterationLog&, const IterationLog&) = default;
};

struct TrainingLog {
  std::vector<IterationLog> rows;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  friend bool operator==(const TrainingLog&, const TrainingLog&) = default;
};

struct TrainResult {
  PolicyParams params;
  RunningNormalizer normalizer;
  TrainingLog log;
};

class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, TrainResult last_good)
      : DivergenceError(what), last_good_(std::move(last_good)) {}
  const TrainResult& last_good() const { return last_good_; }

 private:
  TrainResult last_good_;
};

// Rollouts of batch_size steps from one environment, one update after each,
// ceil(total_steps / batch_size) iterations. Episode k resets with seed
// mix64(seed, k). Throws TrainingDiverged on a non-finite output or loss.
TrainResult train(const EnvFactory& env_factory, const PolicyArchitecture& architecture,
                  const PpoConfig& config, std::uint64_t seed);

}  // namespace xpg::rl
