#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "xpg/core/errors.hpp"
#include "xpg/rl/adam.hpp"
#include "xpg/rl/checkpoint.hpp"
#include "xpg/rl/gae.hpp"
#include "xpg/rl/normalizer.hpp"
#include "xpg/rl/ppo.hpp"
#include "xpg/rl/reward.hpp"

using namespace xpg;
using namespace xpg::rl;

namespace {

std::vector<double> brute_advantages(const std::vector<double>& r, const std::vector<double>& v,
                                     const std::vector<std::uint8_t>& d, double g, double l) {
  const std::size_t n = r.size();
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double coef = 1.0;
    for (std::size_t j = t; j < n; ++j) {
      const double delta = r[j] + g * v[j + 1] * (d[j] ? 0.0 : 1.0) - v[j];
      adv[t] += coef * delta;
      if (d[j]) break;
      coef *= g * l;
    }
  }
  return adv;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<double> random_features(Rng& rng, std::size_t n = 8) {
  std::vector<double> f(n);
  for (auto& x : f) x = rng.normal();
  return f;
}

// Minibatch whose stored log-probs put every ratio either inside the clip
// range or well beyond it, away from the kinks of the surrogate.
std::vector<Transition> random_batch(const ActorCritic& model, const PolicyParams& params, Rng& rng,
                                     std::size_t m, std::size_t image_dim = 0) {
  std::vector<Transition> batch(m);
  for (std::size_t i = 0; i < m; ++i) {
    Transition& t = batch[i];
    t.features = random_features(rng, model.architecture().feature_dim);
    for (std::size_t k = 0; k < image_dim; ++k) t.image.push_back(rng.uniform());
    const PolicySample s = act(model, params, t.features, t.image, nullptr, false, &rng);
    t.pre_squash = s.pre_squash;
    t.action_index = s.action_index;
    const double shift = (i % 3 == 0) ? rng.uniform(0.4, 0.8) * (rng.uniform() < 0.5 ? -1 : 1)
                                      : rng.uniform(-0.1, 0.1);
    t.log_prob = s.log_prob + shift;
  }
  return batch;
}

void check_gradient(const ActorCritic& model, const PolicyParams& params,
                    const std::vector<Transition>& batch, Rng& rng, const PpoConfig& cfg) {
  std::vector<double> adv(batch.size()), ret(batch.size());
  for (auto& a : adv) a = rng.normal();
  for (auto& r : ret) r = rng.normal();
  std::vector<double> grad(model.param_count());
  ppo_loss(model, params, batch, adv, ret, cfg, grad);
  PolicyParams p = params;
  const double h = 1e-6;
  double diff_sq = 0.0, norm_sq = 0.0;
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    const double x = p.values[k];
    p.values[k] = x + h;
    const double up = ppo_loss(model, p, batch, adv, ret, cfg, {}).total;
    p.values[k] = x - h;
    const double dn = ppo_loss(model, p, batch, adv, ret, cfg, {}).total;
    p.values[k] = x;
    const double fd = (up - dn) / (2 * h);
    diff_sq += (fd - grad[k]) * (fd - grad[k]);
    norm_sq += std::max(fd * fd, grad[k] * grad[k]);
    REQUIRE(std::abs(fd - grad[k]) <= 1e-4 * std::max(std::abs(fd), std::abs(grad[k])) + 1e-7);
  }
  CHECK(std::sqrt(diff_sq) <= 1e-4 * std::sqrt(norm_sq));
}

// One-step episodes; reward grows as tau1 falls, so the policy should
// learn to lower its first threshold.
class LowTauEnv : public Environment {
 public:
  EnvObservation reset(std::uint64_t seed) override {
    Rng rng(seed);
    return {random_features(rng), {}};
  }
  EnvStep step(const EnvAction& action) override {
    EnvStep s;
    if (const auto* t = std::get_if<decision::Thresholds>(&action)) {
      s.reward = t->tau1 < 0.5 ? kRewardExtracted : kRewardInfeasible;
    } else {
      s.reward = std::get<std::size_t>(action) == 0 ? kRewardExtracted : kRewardInfeasible;
    }
    s.success = s.reward > 0;
    s.done = true;
    return s;
  }
};

}  // namespace

TEST_CASE("reward values") {
  sim::TransitionOutcome o;
  o.kind = sim::OutcomeKind::kTargetExtracted;
  CHECK(reward(o) == 1000.0);
  o.kind = sim::OutcomeKind::kInfeasible;
  CHECK(reward(o) == -100.0);
  o.kind = sim::OutcomeKind::kOrdinary;
  CHECK(reward(o) == -1.0);
}

TEST_CASE("gae examples") {
  SUBCASE("telescoping") {
    const std::vector<double> r{1, 2, 3}, v{0.5, -1, 2, 4};
    const std::vector<std::uint8_t> d{0, 0, 0};
    const auto g = compute_gae(r, v, d, 1.0, 1.0);
    for (std::size_t t = 0; t < 3; ++t) {
      double sum = 0;
      for (std::size_t j = t; j < 3; ++j) sum += r[j];
      CHECK(g.advantages[t] == doctest::Approx(sum + v[3] - v[t]));
      CHECK(g.returns[t] == doctest::Approx(g.advantages[t] + v[t]));
    }
  }
  SUBCASE("single terminal step") {
    const std::vector<double> r{7}, v{2, 100};
    const std::vector<std::uint8_t> d{1};
    CHECK(compute_gae(r, v, d, 0.99, 0.95).advantages[0] == doctest::Approx(5.0));
  }
  SUBCASE("random trajectory with episode breaks") {
    Rng rng(3);
    std::vector<double> r(20), v(21);
    std::vector<std::uint8_t> d(20);
    for (auto& x : r) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    for (auto& x : d) x = rng.uniform() < 0.2;
    const auto g = compute_gae(r, v, d, 0.97, 0.9);
    const auto b = brute_advantages(r, v, d, 0.97, 0.9);
    for (std::size_t t = 0; t < 20; ++t) CHECK(std::abs(g.advantages[t] - b[t]) < 1e-8);
  }
  SUBCASE("size mismatch") {
    const std::vector<double> r{1, 2}, v{1, 2};
    const std::vector<std::uint8_t> d{0, 0};
    CHECK_THROWS_AS(compute_gae(r, v, d, 1, 1), std::invalid_argument);
  }
}

TEST_CASE("act samples stay in range and the mode is deterministic") {
  const ActorCritic model(PolicyArchitecture{});
  const PolicyParams params = model.init(1);
  Rng rng(5);
  const auto f = random_features(rng);
  const auto a = act(model, params, f, {}, nullptr, true, nullptr);
  const auto b = act(model, params, f, {}, nullptr, true, nullptr);
  CHECK(a.thresholds == b.thresholds);
  for (int i = 0; i < 500; ++i) {
    const auto s = act(model, params, f, {}, nullptr, false, &rng);
    CHECK(s.thresholds.tau1 >= 0.0);
    CHECK(s.thresholds.tau1 <= 1.0);
    CHECK(s.thresholds.tau2 >= 0.0);
    CHECK(s.thresholds.tau2 <= 1.0);
  }
}

TEST_CASE("log_prob matches the finite-difference density of the squashed Gaussian") {
  PolicyArchitecture arch;
  const ActorCritic model(arch);
  PolicyParams params = model.init(2);
  params.values[model.log_std_offset()] = -0.3;
  params.values[model.log_std_offset() + 1] = 0.4;
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_features(rng);
    const auto mode = model.forward(params, {f, {}});
    const auto s = act(model, params, f, {}, nullptr, false, &rng);
    const double sig[2] = {std::exp(-0.3), std::exp(0.4)};
    const double tau[2] = {s.thresholds.tau1, s.thresholds.tau2};
    double log_density = 0.0;
    for (int k = 0; k < 2; ++k) {
      auto cdf = [&](double x) {
        return normal_cdf((std::log(x / (1 - x)) - mode.head[k]) / sig[k]);
      };
      const double h = 1e-6 * std::min(tau[k], 1 - tau[k]);
      log_density += std::log((cdf(tau[k] + h) - cdf(tau[k] - h)) / (2 * h));
    }
    CHECK(s.log_prob == doctest::Approx(log_density).epsilon(1e-4));
  }
}

TEST_CASE("flat head samples follow the softmax") {
  PolicyArchitecture arch;
  arch.head = HeadKind::kFlat;
  const ActorCritic model(arch);
  PolicyParams params = model.init(4);
  for (auto& x : params.values) x *= 30.0;
  Rng rng(1);
  const auto f = random_features(rng);
  const auto out = model.forward(params, {f, {}});
  const auto lsm = log_softmax(std::span<const double, 3>(out.head.data(), 3));
  std::array<int, 3> counts{};
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto s = act(model, params, f, {}, nullptr, false, &rng);
    ++counts[s.action_index];
    REQUIRE(s.log_prob == lsm[s.action_index]);
  }
  for (int k = 0; k < 3; ++k) CHECK(counts[k] / double(n) == doctest::Approx(std::exp(lsm[k])).epsilon(0.05));
}

TEST_CASE("clipped surrogate") {
  CHECK(clipped_surrogate(1.5, 2.0, 0.2) == doctest::Approx(2.4));
  CHECK(clipped_surrogate(1.5, -2.0, 0.2) == doctest::Approx(-3.0));
  CHECK(clipped_surrogate(0.5, 2.0, 0.2) == doctest::Approx(1.0));
  CHECK(clipped_surrogate(0.5, -2.0, 0.2) == doctest::Approx(-1.6));
  CHECK(clipped_surrogate(1.0, 3.0, 0.2) == 3.0);
}

TEST_CASE("running normalizer matches two-pass statistics") {
  Rng rng(11);
  RunningNormalizer streamed(3), batched(3);
  std::vector<double> rows;
  for (int i = 0; i < 257; ++i) {
    std::vector<double> x{rng.normal() * 3 + 1, rng.uniform(), 5.0 + rng.normal() * 0.01};
    streamed.update(x);
    rows.insert(rows.end(), x.begin(), x.end());
  }
  batched.update_batch(rows, 257);
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0, var = 0;
    for (int i = 0; i < 257; ++i) mean += rows[i * 3 + k];
    mean /= 257;
    for (int i = 0; i < 257; ++i) var += (rows[i * 3 + k] - mean) * (rows[i * 3 + k] - mean);
    var /= 257;
    CHECK(streamed.mean()[k] == doctest::Approx(mean).epsilon(1e-10));
    CHECK(streamed.variance()[k] == doctest::Approx(var).epsilon(1e-9));
    CHECK(batched.mean()[k] == doctest::Approx(mean).epsilon(1e-10));
    CHECK(batched.variance()[k] == doctest::Approx(var).epsilon(1e-9));
  }
  const auto z = streamed.normalize(std::vector<double>{1e9, 0.5, 5.0});
  CHECK(z[0] == 10.0);
}

TEST_CASE("zero advantages leave the actor untouched") {
  const ActorCritic model(PolicyArchitecture{});
  PolicyParams params = model.init(3);
  Rng rng(2);
  PpoConfig cfg;
  cfg.batch_size = 16;
  cfg.minibatch_size = 8;
  const auto batch = random_batch(model, params, rng, 16);
  std::vector<double> adv(16, 0.0), ret(16);
  for (auto& r : ret) r = rng.normal();
  cfg.normalize_advantage = false;
  std::vector<double> grad(model.param_count());
  ppo_loss(model, params, batch, adv, ret, cfg, grad);
  // Actor weights come first, then log-std after the critic; all get zero.
  const std::size_t actor_end = model.architecture().feature_dim * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2;
  for (std::size_t k = 0; k < actor_end; ++k) REQUIRE(grad[k] == 0.0);
  for (std::size_t k = 0; k < 2; ++k) REQUIRE(grad[model.log_std_offset() + k] == 0.0);

  const PolicyParams before = params;
  Adam opt(model.param_count(), cfg.learning_rate);
  Rng shuffle(1);
  ppo_update(model, params, opt, batch, adv, ret, cfg, shuffle);
  for (std::size_t k = 0; k < actor_end; ++k) REQUIRE(params.values[k] == before.values[k]);
  for (std::size_t k = 0; k < 2; ++k)
    REQUIRE(params.values[model.log_std_offset() + k] == before.values[model.log_std_offset() + k]);
  CHECK(params != before);
}

TEST_CASE("surrogate at ratio one equals the mean advantage") {
  const ActorCritic model(PolicyArchitecture{});
  const PolicyParams params = model.init(9);
  Rng rng(4);
  std::vector<Transition> batch(10);
  for (auto& t : batch) {
    t.features = random_features(rng);
    const auto s = act(model, params, t.features, {}, nullptr, false, &rng);
    t.pre_squash = s.pre_squash;
    t.log_prob = s.log_prob;
  }
  std::vector<double> adv(10), ret(10, 0.0);
  for (auto& a : adv) a = rng.normal();
  const auto terms = ppo_loss(model, params, batch, adv, ret, PpoConfig{}, {});
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / 10.0;
  CHECK(-terms.policy == doctest::Approx(mean).epsilon(1e-12));
  CHECK(terms.clip_fraction == 0.0);
}

TEST_CASE("loss gradient matches central differences") {
  Rng rng(17);
  PpoConfig cfg;
  cfg.ent_coef = 0.01;
  SUBCASE("threshold head") {
    PolicyArchitecture arch;
    arch.hidden = 4;
    const ActorCritic model(arch);
    PolicyParams params = model.init(1);
    for (auto& x : params.values) x += 0.3 * rng.normal();
    for (int mb = 0; mb < 5; ++mb) check_gradient(model, params, random_batch(model, params, rng, 8), rng, cfg);
  }
  SUBCASE("flat head") {
    PolicyArchitecture arch;
    arch.hidden = 4;
    arch.head = HeadKind::kFlat;
    const ActorCritic model(arch);
    PolicyParams params = model.init(2);
    for (auto& x : params.values) x += 0.3 * rng.normal();
    for (int mb = 0; mb < 5; ++mb) check_gradient(model, params, random_batch(model, params, rng, 8), rng, cfg);
  }
  SUBCASE("conv encoder") {
    PolicyArchitecture arch;
    arch.hidden = 4;
    arch.encoder = EncoderKind::kConv;
    arch.image_size = 10;
    arch.conv = {{2, 4, 2}, {3, 3, 1}};
    const ActorCritic model(arch);
    PolicyParams params = model.init(3);
    for (auto& x : params.values) x += 0.3 * rng.normal();
    check_gradient(model, params, random_batch(model, params, rng, 4, 2 * 10 * 10), rng, cfg);
  }
}

TEST_CASE("adam first step moves by the learning rate") {
  Adam opt(2, 0.1);
  std::vector<double> p{1.0, -1.0}, g{3.0, -0.5};
  opt.step(p, g);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(-0.9).epsilon(1e-5));
  CHECK(opt.steps() == 1);
}

TEST_CASE("train with zero steps returns the initial parameters") {
  PpoConfig cfg;
  cfg.total_steps = 0;
  const PolicyArchitecture arch;
  const auto r = train([] { return std::make_unique<LowTauEnv>(); }, arch, cfg, 7);
  CHECK(r.params == ActorCritic(arch).init(mix64(7, 0x1a17)));
  CHECK(r.log.rows.empty());
}

TEST_CASE("training is deterministic and learns to lower tau1") {
  PpoConfig cfg;
  cfg.total_steps = 3200;
  cfg.learning_rate = 3e-3;
  const PolicyArchitecture arch;
  auto factory = [] { return std::make_unique<LowTauEnv>(); };
  const auto a = train(factory, arch, cfg, 3);
  const auto b = train(factory, arch, cfg, 3);
  CHECK(a.log.to_csv() == b.log.to_csv());
  CHECK(a.params == b.params);
  REQUIRE(a.log.rows.size() == 50);
  double early = 0, late = 0;
  for (int i = 0; i < 5; ++i) {
    early += a.log.rows[i].mean_tau1 / 5;
    late += a.log.rows[45 + i].mean_tau1 / 5;
  }
  CHECK(late < early - 0.1);
  CHECK(a.log.rows.back().success_rate > a.log.rows.front().success_rate);
}

TEST_CASE("flat head learns the rewarded primitive") {
  PpoConfig cfg;
  cfg.total_steps = 3200;
  cfg.learning_rate = 3e-3;
  PolicyArchitecture arch;
  arch.head = HeadKind::kFlat;
  const auto r = train([] { return std::make_unique<LowTauEnv>(); }, arch, cfg, 5);
  CHECK(std::isnan(r.log.rows.front().mean_tau1));
  CHECK(r.log.rows.back().success_rate > 0.8);
}

TEST_CASE("training log csv") {
  TrainingLog log;
  IterationLog row;
  row.iteration = 2;
  row.mean_return = 1.5;
  row.mean_tau1 = std::numeric_limits<double>::quiet_NaN();
  log.rows.push_back(row);
  CHECK(log.to_csv() ==
        "iteration,mean_return,success_rate,mean_tau1,mean_tau2,policy_loss,value_loss\n"
        "2,1.500000,0.000000,nan,0.000000,0.000000,0.000000\n");
}

TEST_CASE("checkpoint round trip") {
  Checkpoint c;
  c.method = "xpg";
  c.config_hash = "abc";
  c.seed = 12;
  const ActorCritic model(c.architecture);
  c.params = model.init(5);
  c.normalizer = RunningNormalizer(8);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) c.normalizer.update(random_features(rng));
  const auto path = std::filesystem::temp_directory_path() / "xpg_test_ckpt.json";
  save_checkpoint(path, c);
  const Checkpoint d = load_checkpoint(path);
  CHECK(d.params == c.params);
  CHECK(d.normalizer == c.normalizer);
  CHECK(d.seed == 12);
  CHECK(d.method == "xpg");
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
}

TEST_CASE("non-finite parameters raise a divergence error") {
  const ActorCritic model(PolicyArchitecture{});
  PolicyParams params = model.init(1);
  params.values[0] = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> f(8, 1.0);
  CHECK_THROWS_AS(act(model, params, f, {}, nullptr, true, nullptr), DivergenceError);
}
