#include "xpg/cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "xpg/cli/config.hpp"
#include "xpg/core/errors.hpp"
#include "xpg/eval/harness.hpp"
#include "xpg/perception/perception.hpp"
#include "xpg/rl/checkpoint.hpp"
#include "xpg/sim/scene_io.hpp"

namespace xpg::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  int jobs = 1;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config_path, "TOML config file");
  app->add_option("--set", a.overrides, "Override one key, key=value (repeatable)");
  app->add_option("--seed", a.seed, "Global seed");
  app->add_option("--out", a.out, "Output directory");
  app->add_option("--jobs", a.jobs, "Parallel episodes during evaluation")->check(CLI::PositiveNumber);
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig c = a.config_path.empty() ? RunConfig{} : load_config(a.config_path);
  for (const auto& o : a.overrides) apply_override(c, o);
  if (a.seed) c.seed = *a.seed;
  validate(c);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<int> parse_counts(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(item, &used);
      if (used != item.size() || n < 1) throw std::invalid_argument(item);
      out.push_back(n);
    } catch (const std::exception&) {
      throw UsageError("bad object count '" + item + "'");
    }
  }
  return out;
}

// --- gen-scenes ---

int cmd_gen_scenes(const CommonArgs& a, const std::string& objects, std::optional<int> scenes,
                   const std::string& family, std::ostream& out) {
  RunConfig c = resolve(a);
  if (!objects.empty()) c.eval.object_counts = parse_counts(objects);
  if (scenes) c.eval.n_scenes = *scenes;
  if (!family.empty()) set_value(c, "eval.family", family);
  validate(c);
  const eval::BatchConfig batch = batch_config(c, a.jobs);
  const fs::path dir = fs::path(a.out) / "scenes";
  fs::create_directories(dir);
  json manifest = {{"config_hash", config_hash(c)}, {"seed", c.seed}, {"family", c.eval.family}};
  json files = json::array();
  for (int n : c.eval.object_counts) {
    eval::EnvConfig env_cfg = batch.env;
    env_cfg.scene.n_objects = n;
    eval::MechanicalSearchEnv env(env_cfg);
    for (int i = 0; i < c.eval.n_scenes; ++i) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
      env.reset(seed);
      char name[64];
      std::snprintf(name, sizeof name, "scene_n%02d_%04d.json", n, i);
      json j = sim::scene_to_json(env.scene());
      j["scene_seed"] = seed;
      j["config_hash"] = manifest["config_hash"];
      write_text(dir / name, j.dump(1) + "\n");
      files.push_back(name);
    }
  }
  manifest["files"] = files;
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
  out << dir.string() << "\n";
  return kExitOk;
}

// --- train ---

int cmd_train(const CommonArgs& a, const std::string& method, std::ostream& out,
              std::ostream& err) {
  if (method != "xpg" && method != "flat_policy")
    throw UsageError("train --method must be xpg or flat_policy");
  const RunConfig c = resolve(a);
  const std::string hash = config_hash(c);
  const rl::HeadKind head = method == "xpg" ? rl::HeadKind::kThreshold : rl::HeadKind::kFlat;
  const rl::PolicyArchitecture arch = architecture(c, head);
  eval::EnvConfig env_cfg = env_config(c);
  env_cfg.mix_families = c.train.mix_families;
  const rl::EnvFactory factory = [env_cfg] { return std::make_unique<eval::MechanicalSearchEnv>(env_cfg); };

  const fs::path dir(a.out);
  fs::create_directories(dir);
  auto save = [&](const rl::TrainResult& r, const std::string& stem) {
    rl::Checkpoint ck;
    ck.method = method;
    ck.config_hash = hash;
    ck.seed = c.seed;
    ck.architecture = arch;
    ck.params = r.params;
    ck.normalize_obs = c.ppo.normalize_obs;
    ck.normalizer = r.normalizer;
    const fs::path ck_path = dir / (stem + ".ckpt.json");
    rl::save_checkpoint(ck_path, ck);
    r.log.write_csv(dir / (stem + "_training_log.csv"));
    return ck_path;
  };

  write_text(dir / (method + "_config.toml"), canonical_dump(c));
  try {
    const rl::TrainResult result = rl::train(factory, arch, c.ppo, c.seed);
    out << save(result, method).string() << "\n";
    return kExitOk;
  } catch (const rl::TrainingDiverged& e) {
    const fs::path p = save(e.last_good(), method + ".last_good");
    err << "training diverged: " << e.what() << "\nlast good checkpoint: " << p.string() << "\n";
    return kExitRuntime;
  }
}

// --- eval ---

struct EvalArgs {
  std::string checkpoint, flat_checkpoint, methods, objects, family;
  std::optional<int> scenes;
};

int cmd_eval(const CommonArgs& a, const EvalArgs& e, std::ostream& out) {
  RunConfig c = resolve(a);
  if (!e.methods.empty()) c.eval.methods = split_list(e.methods);
  if (!e.objects.empty()) c.eval.object_counts = parse_counts(e.objects);
  if (e.scenes) c.eval.n_scenes = *e.scenes;
  if (!e.family.empty()) set_value(c, "eval.family", e.family);
  eval::SuiteConfig suite;
  for (const auto& m : c.eval.methods) {
    try {
      suite.methods.push_back(eval::parse_method(m));
    } catch (const std::invalid_argument& ex) {
      throw UsageError(ex.what());
    }
  }
  validate(c);
  if (suite.methods.empty()) throw UsageError("no methods to evaluate");
  suite.object_counts = c.eval.object_counts;
  suite.n_scenes = c.eval.n_scenes;
  suite.base_seed = c.seed;
  suite.reference_method = c.eval.reference_method;
  suite.include_failures = c.eval.include_failures;

  eval::Policies policies;
  if (!e.checkpoint.empty()) policies.threshold = rl::load_checkpoint(e.checkpoint);
  if (!e.flat_checkpoint.empty()) policies.flat = rl::load_checkpoint(e.flat_checkpoint);
  if (policies.threshold && policies.threshold->architecture.head != rl::HeadKind::kThreshold)
    throw ConfigError("--checkpoint must hold a threshold policy");
  if (policies.flat && policies.flat->architecture.head != rl::HeadKind::kFlat)
    throw ConfigError("--flat-checkpoint must hold a flat policy");

  const eval::BatchConfig batch = batch_config(c, a.jobs);
  const eval::SuiteResult result = eval::run_ablation_suite(suite, batch, policies);

  const std::string hash = config_hash(c);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  eval::write_metrics_csv(dir / "metrics.csv", result.table);
  eval::write_episodes_jsonl(dir / "episodes.jsonl", result.records, hash);

  json cells = json::array();
  for (const auto& cell : result.table.cells) {
    json jc = {{"method", cell.method},           {"n_objects", cell.n_objects},
               {"episodes", cell.episodes},       {"successes", cell.successes},
               {"success_rate", cell.success_rate}, {"avg_motions", cell.avg_motions},
               {"efficiency", cell.efficiency}};
    jc["relative_efficiency"] = cell.relative_efficiency ? json(*cell.relative_efficiency) : json(nullptr);
    cells.push_back(jc);
  }
  auto ck_info = [](const std::optional<rl::Checkpoint>& ck, const std::string& path) {
    return ck ? json{{"path", path}, {"config_hash", ck->config_hash}, {"seed", ck->seed}} : json(nullptr);
  };
  const json summary = {{"config_hash", hash},
                        {"seed", c.seed},
                        {"family", c.eval.family},
                        {"reference_method", c.eval.reference_method},
                        {"include_failures", c.eval.include_failures},
                        {"n_scenes", c.eval.n_scenes},
                        {"checkpoint", ck_info(policies.threshold, e.checkpoint)},
                        {"flat_checkpoint", ck_info(policies.flat, e.flat_checkpoint)},
                        {"cells", cells}};
  write_text(dir / "summary.json", summary.dump(1) + "\n");
  const json run = {{"config", canonical_dump(c)},
                    {"config_hash", hash},
                    {"checkpoint", e.checkpoint.empty() ? "" : fs::absolute(e.checkpoint).string()},
                    {"flat_checkpoint",
                     e.flat_checkpoint.empty() ? "" : fs::absolute(e.flat_checkpoint).string()}};
  write_text(dir / "run_config.json", run.dump(1) + "\n");
  out << (dir / "metrics.csv").string() << "\n";
  return kExitOk;
}

// --- replay ---

int cmd_replay(const CommonArgs& a, const std::string& episodes, long index, std::ostream& out) {
  const fs::path ep_path(episodes);
  const auto lines = eval::read_jsonl(ep_path);
  if (index < 0 || static_cast<std::size_t>(index) >= lines.size())
    throw UsageError("episode index " + std::to_string(index) + " out of range (" +
                     std::to_string(lines.size()) + " records)");
  const json& line = lines[static_cast<std::size_t>(index)];
  const eval::EpisodeRecord recorded = eval::episode_from_json(line);

  const fs::path run_path = ep_path.parent_path() / "run_config.json";
  std::ifstream rf(run_path, std::ios::binary);
  if (!rf) throw ConfigError("missing " + run_path.string());
  json run;
  try {
    rf >> run;
  } catch (const json::exception& ex) {
    throw ConfigError("cannot parse " + run_path.string() + ": " + ex.what());
  }
  RunConfig c;
  for (const auto& [k, v] : parse_toml(run.at("config").get<std::string>())) set_value(c, k, v);
  const std::string hash = config_hash(c);
  if (hash != run.at("config_hash").get<std::string>() || line.value("config_hash", "") != hash)
    throw IntegrityError("config hash of the record does not match its run");

  eval::Policies policies;
  const std::string ck = run.value("checkpoint", "");
  const std::string fck = run.value("flat_checkpoint", "");
  if (!ck.empty()) policies.threshold = rl::load_checkpoint(ck);
  if (!fck.empty()) policies.flat = rl::load_checkpoint(fck);

  eval::BatchConfig batch = batch_config(c, 1);
  batch.env.scene.family = eval::parse_family(recorded.family);
  const eval::Method method = eval::parse_method(recorded.method);

  const fs::path dir = fs::path(a.out) / ("replay_" + std::to_string(index));
  fs::create_directories(dir);
  int k = 0;
  const eval::StepObserver dump = [&](const eval::MechanicalSearchEnv& env) {
    const auto& obs = env.observation();
    char stem[32];
    std::snprintf(stem, sizeof stem, "step_%02d", k++);
    perception::write_pgm(dir / (std::string(stem) + "_mask.pgm"), obs.target_mask.width,
                          obs.target_mask.height, perception::mask_to_gray(obs.target_mask));
    perception::write_pgm(dir / (std::string(stem) + "_odm.pgm"), obs.odm.width, obs.odm.height,
                          perception::odm_to_gray(obs.odm));
  };
  const eval::EpisodeRecord replayed =
      eval::run_episode(method, recorded.n_objects, recorded.scene_seed, batch, policies, dump);
  if (!(replayed == recorded)) {
    std::string detail = "replayed trace differs from the record:";
    for (std::size_t i = 0; i < std::max(replayed.actions.size(), recorded.actions.size()); ++i) {
      const std::string r = i < recorded.actions.size() ? recorded.actions[i] : "-";
      const std::string p = i < replayed.actions.size() ? replayed.actions[i] : "-";
      if (r != p) {
        detail += " step " + std::to_string(i) + " recorded " + r + ", replayed " + p;
        break;
      }
    }
    throw IntegrityError(detail);
  }
  out << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mechanical search with learned priority thresholds"};
  app.require_subcommand(1);

  CommonArgs gen_common, train_common, eval_common, replay_common;
  std::string gen_objects, gen_family;
  std::optional<int> gen_scenes;
  auto* gen = app.add_subcommand("gen-scenes", "Generate and save evaluation scenes");
  add_common(gen, gen_common);
  gen->add_option("--objects", gen_objects, "Comma-separated object counts");
  gen->add_option("--scenes", gen_scenes, "Scenes per object count");
  gen->add_option("--family", gen_family, "random or occluded");

  std::string train_method = "xpg";
  auto* train = app.add_subcommand("train", "Train a policy with PPO");
  add_common(train, train_common);
  train->add_option("--method", train_method, "xpg or flat_policy");

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Evaluate methods over object counts");
  add_common(ev, eval_common);
  ev->add_option("--checkpoint", eval_args.checkpoint, "Threshold policy (xpg, no_nbv)");
  ev->add_option("--flat-checkpoint", eval_args.flat_checkpoint, "Flat policy (flat_policy)");
  ev->add_option("--methods", eval_args.methods, "Comma-separated method names");
  ev->add_option("--objects", eval_args.objects, "Comma-separated object counts");
  ev->add_option("--scenes", eval_args.scenes, "Scenes per cell");
  ev->add_option("--family", eval_args.family, "random or occluded");

  std::string replay_episodes;
  long replay_index = 0;
  auto* rp = app.add_subcommand("replay", "Re-simulate a recorded episode");
  add_common(rp, replay_common);
  rp->add_option("--episodes", replay_episodes, "episodes.jsonl from an eval run")->required();
  rp->add_option("--index", replay_index, "Record index")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_scenes(gen_common, gen_objects, gen_scenes, gen_family, out);
    if (train->parsed()) return cmd_train(train_common, train_method, out, err);
    if (ev->parsed()) return cmd_eval(eval_common, eval_args, out);
    return cmd_replay(replay_common, replay_episodes, replay_index, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace xpg::cli
