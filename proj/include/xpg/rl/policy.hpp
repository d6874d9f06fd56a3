#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xpg/core/random.hpp"
#include "xpg/decision/decide.hpp"
#include "xpg/rl/nn.hpp"

namespace xpg::rl {

class RunningNormalizer;

// Threshold head: 2-D Gaussian over pre-squash values, sigmoid-squashed to
// [0, 1]. Flat head: 3 logits over (grasp, remove, move).
enum class HeadKind { kThreshold, kFlat };
enum class EncoderKind { kFeatures, kConv };

struct PolicyArchitecture {
  HeadKind head = HeadKind::kThreshold;
  EncoderKind encoder = EncoderKind::kFeatures;
  std::size_t feature_dim = 8;
  std::size_t hidden = 64;
  // Conv mode: 2-channel image_size^2 input (target mask, ODM).
  std::size_t image_size = 64;
  std::vector<ConvEncoder::LayerSpec> conv{{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};

  std::size_t action_dim() const { return head == HeadKind::kThreshold ? 2 : 3; }
};

struct PolicyParams {
  std::vector<double> values;
  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct PolicyInput {
  std::span<const double> features;  // already normalized
  std::span<const double> image;     // conv mode only
};

// What the policy emitted for one observation.
struct PolicySample {
  std::array<double, 2> pre_squash{};  // threshold head
  decision::Thresholds thresholds;     // threshold head
  std::size_t action_index = 0;        // flat head
  double log_prob = 0.0;
  double value = 0.0;
};

// Separate actor and critic networks (independent parameters), tanh hidden
// layers, and for the threshold head two state-independent log-std scalars.
class ActorCritic {
 public:
  explicit ActorCritic(PolicyArchitecture arch);

  const PolicyArchitecture& architecture() const { return arch_; }
  std::size_t param_count() const { return param_count_; }

  // Orthogonal weights (gain sqrt 2 hidden, 0.01 policy output, 1 value
  // output), zero biases, zero log-std.
  PolicyParams init(std::uint64_t seed) const;

  struct Cache {
    ConvEncoder::Cache actor_conv, critic_conv;
    Mlp::Cache actor, critic;
  };

  struct Output {
    std::array<double, 3> head{};  // means (2) or logits (3)
    double value = 0.0;
  };

  Output forward(const PolicyParams& params, const PolicyInput& input, Cache& cache) const;
  Output forward(const PolicyParams& params, const PolicyInput& input) const;

  // Accumulates dL/dparams given dL/dhead and dL/dvalue (forward cache).
  void backward(const PolicyParams& params, const Cache& cache, std::span<const double> dhead,
                double dvalue, std::span<double> grad) const;

  std::span<const double> log_std(const PolicyParams& params) const;
  std::size_t log_std_offset() const { return log_std_offset_; }

 private:
  PolicyArchitecture arch_;
  ConvEncoder actor_conv_, critic_conv_;
  Mlp actor_, critic_;
  std::size_t log_std_offset_ = 0;
  std::size_t param_count_ = 0;
};

// Log density of a squashed-Gaussian sample given its pre-squash value,
// including the sigmoid Jacobian.
double squashed_log_prob(std::span<const double> pre_squash, std::span<const double> mean,
                         std::span<const double> log_std);

double sigmoid(double x);

// Stable log-softmax of the flat head logits.
std::array<double, 3> log_softmax(std::span<const double, 3> logits);

// Normalizes features with `normalizer` when given, runs the actor and
// critic, and samples (or takes the mode when deterministic). Throws
// DivergenceError if any network output is non-finite.
PolicySample act(const ActorCritic& model, const PolicyParams& params,
                 std::span<const double> features, std::span<const double> image,
                 const RunningNormalizer* normalizer, bool deterministic, Rng* rng);

}  // namespace xpg::rl
