#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xpg/eval/env.hpp"
#include "xpg/rl/checkpoint.hpp"

namespace xpg::eval {

enum class Method { kXpg, kFixedThreshold, kFlatPolicy, kNoNbv };

std::string method_name(Method m);
// Throws std::invalid_argument on an unknown name.
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

std::string family_name(sim::SceneFamily f);
sim::SceneFamily parse_family(const std::string& name);

struct StepRecord {
  std::string action;
  double q_target = 0.0;
  double q_occlude = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EpisodeRecord {
  std::uint64_t scene_seed = 0;
  std::string method;
  int n_objects = 0;
  std::string family;
  std::vector<std::string> actions;
  int motion_count = 0;
  bool success = false;
  std::vector<StepRecord> steps;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

nlohmann::json episode_to_json(const EpisodeRecord& r);
EpisodeRecord episode_from_json(const nlohmann::json& j);

// Learned policies available to a batch. xpg and no_nbv need `threshold`,
// flat_policy needs `flat`.
struct Policies {
  std::optional<rl::Checkpoint> threshold;
  std::optional<rl::Checkpoint> flat;
};

struct BatchConfig {
  EnvConfig env;
  decision::Thresholds fixed{0.5, 0.5};
  int jobs = 1;
};

// The policy step used by every method: deterministic actions.
rl::EnvAction policy_action(Method method, const Policies& policies, const BatchConfig& config,
                            const rl::EnvObservation& obs);

// Environment settings for one episode of `method`.
EnvConfig episode_env(Method method, int n_objects, const BatchConfig& config,
                      const Policies& policies);

// Called with the environment before every action and once at the end.
using StepObserver = std::function<void(const MechanicalSearchEnv&)>;

// One episode on scene seed `seed` with n_objects objects.
EpisodeRecord run_episode(Method method, int n_objects, std::uint64_t seed,
                          const BatchConfig& config, const Policies& policies,
                          const StepObserver& observer = {});

// Scene i uses seed base_seed + i. Episodes may run on config.jobs threads;
// the record order does not depend on it. Throws ConfigError if the method's
// checkpoint is missing.
std::vector<EpisodeRecord> run_batch(Method method, int n_objects, int n_scenes,
                                     std::uint64_t base_seed, const BatchConfig& config,
                                     const Policies& policies);

struct MetricsCell {
  std::string method;
  int n_objects = 0;
  long episodes = 0;
  long successes = 0;
  double success_rate = 0.0;  // percent
  double avg_motions = 0.0;
  double efficiency = 0.0;
  std::optional<double> relative_efficiency;
};

struct MetricsTable {
  std::string reference_method;
  bool include_failures = true;
  std::vector<MetricsCell> cells;  // (method, n_objects) in first-seen order

  // nullptr for an absent cell.
  const MetricsCell* find(const std::string& method, int n_objects) const;
};

double efficiency(double success_rate, double avg_motions);
double relative_efficiency(double success_rate, double avg_motions, double ref_success_rate,
                           double ref_avg_motions);

// Aggregates per (method, n_objects). avg_motions averages all episodes, or
// only the successful ones when include_failures is false.
MetricsTable compute_metrics(const std::vector<EpisodeRecord>& records,
                             const std::string& reference_method, bool include_failures = true);

struct SuiteConfig {
  std::vector<Method> methods;
  std::vector<int> object_counts;
  int n_scenes = 100;
  std::uint64_t base_seed = 0;
  std::string reference_method = "fixed_threshold";
  bool include_failures = true;
};

struct SuiteResult {
  std::vector<EpisodeRecord> records;
  MetricsTable table;
};

// Methods x object counts. Throws ConfigError up front if a method's
// checkpoint is missing.
SuiteResult run_ablation_suite(const SuiteConfig& suite, const BatchConfig& config,
                               const Policies& policies);

std::string metrics_csv(const MetricsTable& table);
void write_metrics_csv(const std::filesystem::path& path, const MetricsTable& table);
void write_episodes_jsonl(const std::filesystem::path& path,
                          const std::vector<EpisodeRecord>& records, const std::string& config_hash);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace xpg::eval
