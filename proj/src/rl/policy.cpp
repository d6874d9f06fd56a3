#include "xpg/rl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xpg/core/errors.hpp"
#include "xpg/rl/normalizer.hpp"

namespace xpg::rl {
namespace {

const double kSqrt2 = std::numbers::sqrt2;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

ActorCritic::ActorCritic(PolicyArchitecture arch) : arch_(std::move(arch)) {
  std::size_t offset = 0;
  const bool conv = arch_.encoder == EncoderKind::kConv;
  std::size_t in = arch_.feature_dim;
  if (conv) {
    actor_conv_ = ConvEncoder(2, arch_.image_size, arch_.image_size, arch_.conv, offset);
    in = actor_conv_.output_dim();
  }
  actor_ = Mlp({in, arch_.hidden, arch_.hidden, arch_.action_dim()}, {kSqrt2, kSqrt2, 0.01},
               Activation::kTanh, offset);
  if (conv) critic_conv_ = ConvEncoder(2, arch_.image_size, arch_.image_size, arch_.conv, offset);
  critic_ = Mlp({in, arch_.hidden, arch_.hidden, 1}, {kSqrt2, kSqrt2, 1.0}, Activation::kTanh, offset);
  log_std_offset_ = offset;
  if (arch_.head == HeadKind::kThreshold) offset += 2;
  param_count_ = offset;
}

PolicyParams ActorCritic::init(std::uint64_t seed) const {
  PolicyParams p;
  p.values.assign(param_count_, 0.0);
  std::uint64_t k = 0;
  auto dense = [&](const Mlp& m) {
    for (const auto& l : m.layers())
      orthogonal_init(std::span<double>(p.values).subspan(l.w_offset, l.in * l.out), l.out, l.in,
                      l.init_gain, mix64(seed, ++k));
  };
  auto convs = [&](const ConvEncoder& e) {
    for (const auto& l : e.layers())
      orthogonal_init(std::span<double>(p.values).subspan(l.w_offset, l.out_c * l.patch()), l.out_c,
                      l.patch(), kSqrt2, mix64(seed, ++k));
  };
  const bool conv = arch_.encoder == EncoderKind::kConv;
  if (conv) convs(actor_conv_);
  dense(actor_);
  if (conv) convs(critic_conv_);
  dense(critic_);
  return p;
}

ActorCritic::Output ActorCritic::forward(const PolicyParams& params, const PolicyInput& input,
                                         Cache& cache) const {
  const std::span<const double> w = params.values;
  Output out;
  if (arch_.encoder == EncoderKind::kConv) {
    actor_conv_.forward(w, input.image, cache.actor_conv);
    critic_conv_.forward(w, input.image, cache.critic_conv);
    actor_.forward(w, cache.actor_conv.outputs.back(), cache.actor);
    critic_.forward(w, cache.critic_conv.outputs.back(), cache.critic);
  } else {
    actor_.forward(w, input.features, cache.actor);
    critic_.forward(w, input.features, cache.critic);
  }
  for (std::size_t i = 0; i < arch_.action_dim(); ++i) out.head[i] = cache.actor.output[i];
  out.value = cache.critic.output[0];
  return out;
}

ActorCritic::Output ActorCritic::forward(const PolicyParams& params, const PolicyInput& input) const {
  Cache cache;
  return forward(params, input, cache);
}

void ActorCritic::backward(const PolicyParams& params, const Cache& cache,
                           std::span<const double> dhead, double dvalue,
                           std::span<double> grad) const {
  const std::span<const double> w = params.values;
  const bool conv = arch_.encoder == EncoderKind::kConv;
  std::vector<double> dx(conv ? actor_.input_dim() : 0, 0.0);
  actor_.backward(w, cache.actor, dhead.first(arch_.action_dim()), grad, dx);
  if (conv) actor_conv_.backward(w, cache.actor_conv, dx, grad);
  std::fill(dx.begin(), dx.end(), 0.0);
  const double dv[1] = {dvalue};
  critic_.backward(w, cache.critic, dv, grad, dx);
  if (conv) critic_conv_.backward(w, cache.critic_conv, dx, grad);
}

std::span<const double> ActorCritic::log_std(const PolicyParams& params) const {
  return std::span<const double>(params.values).subspan(log_std_offset_, 2);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double squashed_log_prob(std::span<const double> u, std::span<const double> mean,
                         std::span<const double> log_std) {
  double lp = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double z = (u[k] - mean[k]) * std::exp(-log_std[k]);
    lp += -0.5 * z * z - log_std[k] - kHalfLog2Pi;
    // -log(sigmoid'(u)) = |u| + 2 log(1 + exp(-|u|))
    const double a = std::abs(u[k]);
    lp += a + 2.0 * std::log1p(std::exp(-a));
  }
  return lp;
}

std::array<double, 3> log_softmax(std::span<const double, 3> logits) {
  const double m = std::max({logits[0], logits[1], logits[2]});
  const double lse =
      m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m) + std::exp(logits[2] - m));
  return {logits[0] - lse, logits[1] - lse, logits[2] - lse};
}

PolicySample act(const ActorCritic& model, const PolicyParams& params,
                 std::span<const double> features, std::span<const double> image,
                 const RunningNormalizer* normalizer, bool deterministic, Rng* rng) {
  std::vector<double> normed;
  if (normalizer != nullptr) {
    normed = normalizer->normalize(features);
    features = normed;
  }
  const auto out = model.forward(params, {features, image});
  const std::size_t na = model.architecture().action_dim();
  if (!all_finite(std::span<const double>(out.head).first(na)) || !std::isfinite(out.value))
    throw DivergenceError("policy network produced a non-finite output");

  PolicySample s;
  s.value = out.value;
  if (model.architecture().head == HeadKind::kThreshold) {
    const auto ls = model.log_std(params);
    if (!all_finite(ls)) throw DivergenceError("policy log-std is non-finite");
    for (std::size_t k = 0; k < 2; ++k) {
      s.pre_squash[k] = out.head[k];
      if (!deterministic) s.pre_squash[k] += std::exp(ls[k]) * rng->normal();
    }
    s.thresholds = {sigmoid(s.pre_squash[0]), sigmoid(s.pre_squash[1])};
    s.log_prob = squashed_log_prob(s.pre_squash, std::span<const double>(out.head).first(2), ls);
  } else {
    const auto lsm = log_softmax(std::span<const double, 3>(out.head.data(), 3));
    if (deterministic) {
      s.action_index = decision::flat_argmax(std::span<const double, 3>(out.head.data(), 3));
    } else {
      const double u = rng->uniform();
      double acc = 0.0;
      s.action_index = 2;
      for (std::size_t k = 0; k < 3; ++k) {
        acc += std::exp(lsm[k]);
        if (u < acc) {
          s.action_index = k;
          break;
        }
      }
    }
    s.log_prob = lsm[s.action_index];
  }
  return s;
}

}  // namespace xpg::rl
