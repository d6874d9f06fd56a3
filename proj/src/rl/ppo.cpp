#include "xpg/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "xpg/rl/gae.hpp"

namespace xpg::rl {
namespace {

constexpr std::uint64_t kInitStream = 0x1a17;
constexpr std::uint64_t kActStream = 0xac75;
constexpr std::uint64_t kShuffleStream = 0x5eed5;

bool finite_all(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void PpoConfig::validate() const {
  if (total_steps < 0) throw std::invalid_argument("ppo.total_steps must be >= 0");
  if (batch_size <= 0 || minibatch_size <= 0 || batch_size % minibatch_size != 0)
    throw std::invalid_argument("ppo.minibatch_size must divide ppo.batch_size");
  if (epochs <= 0) throw std::invalid_argument("ppo.epochs must be positive");
  if (!(clip > 0.0)) throw std::invalid_argument("ppo.clip must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("ppo.learning_rate must be positive");
  if (gamma < 0.0 || gamma > 1.0 || gae_lambda < 0.0 || gae_lambda > 1.0)
    throw std::invalid_argument("ppo.gamma and ppo.gae_lambda must lie in [0, 1]");
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

LossTerms ppo_loss(const ActorCritic& model, const PolicyParams& params,
                   std::span<const Transition> batch, std::span<const double> advantages,
                   std::span<const double> returns, const PpoConfig& config,
                   std::span<double> grad) {
  const std::size_t m = batch.size();
  if (m == 0 || advantages.size() != m || returns.size() != m)
    throw std::invalid_argument("ppo_loss: batch, advantage and return sizes differ");
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != model.param_count()) throw std::invalid_argument("ppo_loss: grad size");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  const bool threshold = model.architecture().head == HeadKind::kThreshold;
  const double inv_m = 1.0 / static_cast<double>(m);
  LossTerms terms;
  ActorCritic::Cache cache;
  std::array<double, 2> ls{}, sigma{};
  if (threshold) {
    const auto l = model.log_std(params);
    ls = {l[0], l[1]};
    sigma = {std::exp(ls[0]), std::exp(ls[1])};
  }

  for (std::size_t i = 0; i < m; ++i) {
    const Transition& t = batch[i];
    const auto out = model.forward(params, {t.features, t.image}, cache);
    double lp = 0.0;
    std::array<double, 3> dlp_dhead{};
    std::array<double, 2> dlp_dls{};
    std::array<double, 3> dent_dhead{};
    double ent = 0.0;
    if (threshold) {
      lp = squashed_log_prob(t.pre_squash, std::span<const double>(out.head).first(2), ls);
      for (int k = 0; k < 2; ++k) {
        const double z = (t.pre_squash[k] - out.head[k]) / sigma[k];
        dlp_dhead[k] = z / sigma[k];
        dlp_dls[k] = z * z - 1.0;
        ent += ls[k] + 0.5 + 0.91893853320467274178;
      }
    } else {
      const auto lsm = log_softmax(std::span<const double, 3>(out.head.data(), 3));
      lp = lsm[t.action_index];
      for (int k = 0; k < 3; ++k) {
        const double p = std::exp(lsm[k]);
        dlp_dhead[k] = (static_cast<std::size_t>(k) == t.action_index ? 1.0 : 0.0) - p;
        ent -= p * lsm[k];
      }
      for (int k = 0; k < 3; ++k) {
        const double p = std::exp(lsm[k]);
        dent_dhead[k] = -p * (lsm[k] + ent);
      }
    }
    const double ratio = std::exp(lp - t.log_prob);
    const double a = advantages[i];
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * a;
    terms.policy -= std::min(unclipped, clipped) * inv_m;
    if (std::abs(ratio - 1.0) > config.clip) terms.clip_fraction += inv_m;
    const double err = out.value - returns[i];
    terms.value += err * err * inv_m;
    terms.entropy += ent * inv_m;

    if (!want_grad) continue;
    const double dsur = unclipped <= clipped ? a : 0.0;
    const double dl_dlp = -dsur * ratio * inv_m;
    std::array<double, 3> dhead{};
    for (std::size_t k = 0; k < model.architecture().action_dim(); ++k)
      dhead[k] = dl_dlp * dlp_dhead[k] - config.ent_coef * inv_m * dent_dhead[k];
    const double dvalue = config.vf_coef * 2.0 * err * inv_m;
    model.backward(params, cache, dhead, dvalue, grad);
    if (threshold) {
      for (std::size_t k = 0; k < 2; ++k)
        grad[model.log_std_offset() + k] += dl_dlp * dlp_dls[k] - config.ent_coef * inv_m;
    }
  }
  terms.total = terms.policy + config.vf_coef * terms.value - config.ent_coef * terms.entropy;
  return terms;
}

UpdateStats ppo_update(const ActorCritic& model, PolicyParams& params, Adam& optimizer,
                       std::span<const Transition> batch, std::span<const double> advantages,
                       std::span<const double> returns, const PpoConfig& config, Rng& rng) {
  const std::size_t n = batch.size();
  if (n != static_cast<std::size_t>(config.batch_size))
    throw std::invalid_argument("ppo_update: batch size differs from config");
  std::vector<double> adv(advantages.begin(), advantages.end());
  if (config.normalize_advantage && n > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double x : adv) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& x : adv) x = (x - mean) / (sd + 1e-8);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(model.param_count());
  std::vector<Transition> mb;
  std::vector<double> mb_adv, mb_ret;
  UpdateStats stats;
  long count = 0;
  const std::size_t mbs = static_cast<std::size_t>(config.minibatch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < n; start += mbs) {
      mb.clear();
      mb_adv.clear();
      mb_ret.clear();
      for (std::size_t j = start; j < start + mbs; ++j) {
        mb.push_back(batch[order[j]]);
        mb_adv.push_back(adv[order[j]]);
        mb_ret.push_back(returns[order[j]]);
      }
      const LossTerms terms = ppo_loss(model, params, mb, mb_adv, mb_ret, config, grad);
      if (!std::isfinite(terms.total) || !finite_all(grad))
        throw DivergenceError("non-finite PPO loss or gradient at epoch " + std::to_string(epoch));
      if (config.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (double g : grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > config.max_grad_norm) {
          const double s = config.max_grad_norm / (norm + 1e-6);
          for (double& g : grad) g *= s;
        }
      }
      optimizer.step(params.values, grad);
      stats.policy_loss += terms.policy;
      stats.value_loss += terms.value;
      ++count;
    }
  }
  if (count > 0) {
    stats.policy_loss /= static_cast<double>(count);
    stats.value_loss /= static_cast<double>(count);
  }
  return stats;
}

std::string TrainingLog::to_csv() const {
  std::string s = "iteration,mean_return,success_rate,mean_tau1,mean_tau2,policy_loss,value_loss\n";
  for (const auto& r : rows) {
    s += std::to_string(r.iteration) + "," + format_number(r.mean_return) + "," +
         format_number(r.success_rate) + "," + format_number(r.mean_tau1) + "," +
         format_number(r.mean_tau2) + "," + format_number(r.policy_loss) + "," +
         format_number(r.value_loss) + "\n";
  }
  return s;
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << to_csv();
}

TrainResult train(const EnvFactory& env_factory, const PolicyArchitecture& architecture,
                  const PpoConfig& config, std::uint64_t seed) {
  config.validate();
  const ActorCritic model(architecture);
  TrainResult result;
  result.params = model.init(mix64(seed, kInitStream));
  result.normalizer = RunningNormalizer(architecture.feature_dim);
  if (config.total_steps == 0) return result;

  auto env = env_factory();
  Adam optimizer(model.param_count(), config.learning_rate, config.adam_epsilon);
  Rng act_rng(mix64(seed, kActStream));
  Rng shuffle_rng(mix64(seed, kShuffleStream));
  RewardScaler scaler(config.gamma);
  const bool threshold = architecture.head == HeadKind::kThreshold;

  std::uint64_t episode = 0;
  EnvObservation obs = env->reset(mix64(seed, episode));
  double episode_return = 0.0;
  const long iterations = (config.total_steps + config.batch_size - 1) / config.batch_size;

  auto features_for_net = [&](const std::vector<double>& raw) {
    return config.normalize_obs ? result.normalizer.normalize(raw) : raw;
  };

  std::vector<Transition> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  for (long it = 0; it < iterations; ++it) {
    const TrainResult last_good = result;
    batch.clear();
    IterationLog row;
    row.iteration = it;
    double tau1 = 0.0, tau2 = 0.0, returns_sum = 0.0;
    long successes = 0;
    try {
      for (int s = 0; s < config.batch_size; ++s) {
        if (config.normalize_obs) result.normalizer.update(obs.features);
        Transition t;
        t.features = features_for_net(obs.features);
        t.image = obs.image;
        const PolicySample sample =
            act(model, result.params, t.features, t.image, nullptr, false, &act_rng);
        t.pre_squash = sample.pre_squash;
        t.thresholds = sample.thresholds;
        t.action_index = sample.action_index;
        t.log_prob = sample.log_prob;
        t.value = sample.value;
        tau1 += sample.thresholds.tau1;
        tau2 += sample.thresholds.tau2;

        EnvAction action = threshold ? EnvAction{sample.thresholds} : EnvAction{sample.action_index};
        EnvStep step = env->step(action);
        t.raw_reward = step.reward;
        t.done = step.done;
        t.reward = config.normalize_reward ? scaler.scale(step.reward, step.done) : step.reward;
        episode_return += step.reward;
        batch.push_back(std::move(t));
        if (step.done) {
          returns_sum += episode_return;
          successes += step.success ? 1 : 0;
          ++row.episodes;
          episode_return = 0.0;
          obs = env->reset(mix64(seed, ++episode));
        } else {
          obs = std::move(step.observation);
        }
      }

      double bootstrap = 0.0;
      if (!batch.back().done) {
        const auto f = features_for_net(obs.features);
        bootstrap = model.forward(result.params, {f, obs.image}).value;
        if (!std::isfinite(bootstrap)) throw DivergenceError("non-finite value estimate");
      }
      std::vector<double> rewards, values;
      std::vector<std::uint8_t> dones;
      for (const auto& t : batch) {
        rewards.push_back(t.reward);
        values.push_back(t.value);
        dones.push_back(t.done ? 1 : 0);
      }
      values.push_back(bootstrap);
      const GaeResult gae = compute_gae(rewards, values, dones, config.gamma, config.gae_lambda);
      const UpdateStats stats = ppo_update(model, result.params, optimizer, batch, gae.advantages,
                                           gae.returns, config, shuffle_rng);
      row.policy_loss = stats.policy_loss;
      row.value_loss = stats.value_loss;
    } catch (const DivergenceError& e) {
      throw TrainingDiverged(std::string(e.what()) + " (iteration " + std::to_string(it) + ")",
                             last_good);
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double steps = static_cast<double>(config.batch_size);
    row.mean_return = row.episodes > 0 ? returns_sum / static_cast<double>(row.episodes) : nan;
    row.success_rate = row.episodes > 0 ? static_cast<double>(successes) / row.episodes : nan;
    row.mean_tau1 = threshold ? tau1 / steps : nan;
    row.mean_tau2 = threshold ? tau2 / steps : nan;
    result.log.rows.push_back(row);
  }
  return result;
}

}  // namespace xpg::rl
