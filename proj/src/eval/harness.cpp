#include "xpg/eval/harness.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "xpg/core/errors.hpp"

namespace xpg::eval {

using nlohmann::json;

std::string method_name(Method m) {
  switch (m) {
    case Method::kXpg:
      return "xpg";
    case Method::kFixedThreshold:
      return "fixed_threshold";
    case Method::kFlatPolicy:
      return "flat_policy";
    case Method::kNoNbv:
      return "no_nbv";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods())
    if (method_name(m) == name) return m;
  throw std::invalid_argument("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> v{Method::kXpg, Method::kFixedThreshold, Method::kFlatPolicy,
                                     Method::kNoNbv};
  return v;
}

std::string family_name(sim::SceneFamily f) {
  return f == sim::SceneFamily::kRandom ? "random" : "occluded";
}

sim::SceneFamily parse_family(const std::string& name) {
  if (name == "random") return sim::SceneFamily::kRandom;
  if (name == "occluded") return sim::SceneFamily::kOccluded;
  throw std::invalid_argument("unknown scene family '" + name + "'");
}

json episode_to_json(const EpisodeRecord& r) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"action", s.action},
                     {"q_target", s.q_target},
                     {"q_occlude", s.q_occlude},
                     {"tau1", s.tau1},
                     {"tau2", s.tau2}});
  return {{"scene_seed", r.scene_seed}, {"method", r.method},       {"n_objects", r.n_objects},
          {"family", r.family},         {"actions", r.actions},     {"motion_count", r.motion_count},
          {"success", r.success},       {"steps", steps}};
}

EpisodeRecord episode_from_json(const json& j) {
  try {
    EpisodeRecord r;
    r.scene_seed = j.at("scene_seed").get<std::uint64_t>();
    r.method = j.at("method").get<std::string>();
    r.n_objects = j.at("n_objects").get<int>();
    r.family = j.at("family").get<std::string>();
    r.actions = j.at("actions").get<std::vector<std::string>>();
    r.motion_count = j.at("motion_count").get<int>();
    r.success = j.at("success").get<bool>();
    for (const auto& s : j.at("steps"))
      r.steps.push_back({s.at("action").get<std::string>(), s.at("q_target").get<double>(),
                         s.at("q_occlude").get<double>(), s.at("tau1").get<double>(),
                         s.at("tau2").get<double>()});
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed episode record: ") + e.what());
  }
}

namespace {

const rl::Checkpoint& require(const std::optional<rl::Checkpoint>& ck, Method m) {
  if (!ck) throw ConfigError("method " + method_name(m) + " needs a trained checkpoint");
  return *ck;
}

void check_policies(Method m, const Policies& p) {
  if (m == Method::kXpg || m == Method::kNoNbv) require(p.threshold, m);
  if (m == Method::kFlatPolicy) require(p.flat, m);
}

}  // namespace

EnvConfig episode_env(Method m, int n_objects, const BatchConfig& config, const Policies& p) {
  EnvConfig env = config.env;
  env.scene.n_objects = n_objects;
  env.mix_families = false;
  env.view_ends_episode = m == Method::kNoNbv;
  const std::optional<rl::Checkpoint>& ck = m == Method::kFlatPolicy ? p.flat : p.threshold;
  env.with_image = ck && m != Method::kFixedThreshold &&
                   ck->architecture.encoder == rl::EncoderKind::kConv;
  return env;
}

rl::EnvAction policy_action(Method method, const Policies& policies, const BatchConfig& config,
                            const rl::EnvObservation& obs) {
  if (method == Method::kFixedThreshold) return config.fixed;
  const rl::Checkpoint& ck =
      require(method == Method::kFlatPolicy ? policies.flat : policies.threshold, method);
  const rl::ActorCritic model(ck.architecture);
  const rl::PolicySample s = rl::act(model, ck.params, obs.features, obs.image,
                                     ck.normalize_obs ? &ck.normalizer : nullptr, true, nullptr);
  if (ck.architecture.head == rl::HeadKind::kThreshold) return s.thresholds;
  return s.action_index;
}

EpisodeRecord run_episode(Method method, int n_objects, std::uint64_t seed,
                          const BatchConfig& config, const Policies& policies,
                          const StepObserver& observer) {
  check_policies(method, policies);
  MechanicalSearchEnv env(episode_env(method, n_objects, config, policies));
  EpisodeRecord rec;
  rec.scene_seed = seed;
  rec.method = method_name(method);
  rec.n_objects = n_objects;
  rl::EnvObservation obs = env.reset(seed);
  rec.family = family_name(env.family());
  while (!env.done()) {
    if (observer) observer(env);
    const rl::EnvAction action = policy_action(method, policies, config, obs);
    rl::EnvStep step = env.step(action);
    const StepInfo& info = env.last_step();
    if (!info.action.empty()) {
      rec.actions.push_back(info.action);
      rec.steps.push_back({info.action, info.q_target, info.q_occlude, info.tau1, info.tau2});
    }
    rec.success = step.success;
    obs = std::move(step.observation);
  }
  if (observer) observer(env);
  rec.motion_count = env.scene().step_count;
  return rec;
}

std::vector<EpisodeRecord> run_batch(Method method, int n_objects, int n_scenes,
                                     std::uint64_t base_seed, const BatchConfig& config,
                                     const Policies& policies) {
  if (n_scenes < 1) throw std::invalid_argument("run_batch needs n_scenes >= 1");
  check_policies(method, policies);
  std::vector<EpisodeRecord> out(static_cast<std::size_t>(n_scenes));
  const int jobs = std::max(1, std::min(config.jobs, n_scenes));
  if (jobs == 1) {
    for (int i = 0; i < n_scenes; ++i)
      out[i] = run_episode(method, n_objects, base_seed + i, config, policies);
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n_scenes; i = next++) {
        try {
          out[i] = run_episode(method, n_objects, base_seed + i, config, policies);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

const MetricsCell* MetricsTable::find(const std::string& method, int n_objects) const {
  for (const auto& c : cells)
    if (c.method == method && c.n_objects == n_objects) return &c;
  return nullptr;
}

double efficiency(double success_rate, double avg_motions) {
  return avg_motions > 0.0 ? success_rate / avg_motions : 0.0;
}

double relative_efficiency(double success_rate, double avg_motions, double ref_success_rate,
                           double ref_avg_motions) {
  return efficiency(success_rate, avg_motions) / efficiency(ref_success_rate, ref_avg_motions);
}

MetricsTable compute_metrics(const std::vector<EpisodeRecord>& records,
                             const std::string& reference_method, bool include_failures) {
  MetricsTable table;
  table.reference_method = reference_method;
  table.include_failures = include_failures;
  struct Acc {
    long episodes = 0, successes = 0, counted = 0;
    double motions = 0.0;
  };
  std::vector<std::pair<std::string, int>> order;
  std::map<std::pair<std::string, int>, Acc> acc;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.method, r.n_objects);
    auto [it, inserted] = acc.try_emplace(key);
    if (inserted) order.push_back(key);
    Acc& a = it->second;
    ++a.episodes;
    if (r.success) ++a.successes;
    if (include_failures || r.success) {
      ++a.counted;
      a.motions += r.motion_count;
    }
  }
  for (const auto& key : order) {
    const Acc& a = acc.at(key);
    MetricsCell c;
    c.method = key.first;
    c.n_objects = key.second;
    c.episodes = a.episodes;
    c.successes = a.successes;
    c.success_rate = 100.0 * static_cast<double>(a.successes) / static_cast<double>(a.episodes);
    c.avg_motions = a.counted > 0 ? a.motions / static_cast<double>(a.counted) : 0.0;
    c.efficiency = efficiency(c.success_rate, c.avg_motions);
    table.cells.push_back(c);
  }
  for (auto& c : table.cells) {
    const MetricsCell* ref = table.find(reference_method, c.n_objects);
    if (ref != nullptr && ref->efficiency > 0.0) c.relative_efficiency = c.efficiency / ref->efficiency;
  }
  return table;
}

SuiteResult run_ablation_suite(const SuiteConfig& suite, const BatchConfig& config,
                               const Policies& policies) {
  for (Method m : suite.methods) check_policies(m, policies);
  SuiteResult result;
  for (Method m : suite.methods) {
    for (int n : suite.object_counts) {
      auto batch = run_batch(m, n, suite.n_scenes, suite.base_seed, config, policies);
      result.records.insert(result.records.end(), batch.begin(), batch.end());
    }
  }
  result.table = compute_metrics(result.records, suite.reference_method, suite.include_failures);
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string metrics_csv(const MetricsTable& table) {
  std::string s =
      "method,n_objects,episodes,successes,success_rate,avg_motions,efficiency,relative_efficiency\n";
  for (const auto& c : table.cells) {
    s += c.method + "," + std::to_string(c.n_objects) + "," + std::to_string(c.episodes) + "," +
         std::to_string(c.successes) + "," + fmt(c.success_rate) + "," + fmt(c.avg_motions) + "," +
         fmt(c.efficiency) + "," + (c.relative_efficiency ? fmt(*c.relative_efficiency) : "") + "\n";
  }
  return s;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsTable& table) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << metrics_csv(table);
}

void write_episodes_jsonl(const std::filesystem::path& path,
                          const std::vector<EpisodeRecord>& records, const std::string& config_hash) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) {
    json j = episode_to_json(r);
    j["config_hash"] = config_hash;
    f << j.dump() << "\n";
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ConfigError("malformed line in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace xpg::eval
