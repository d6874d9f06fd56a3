#include "xpg/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "xpg/core/errors.hpp"

namespace xpg::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  return std::all_of(k.begin(), k.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; });
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

std::vector<std::string> split_array(const std::string& v) {
  const std::string t = trim(v);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') throw ConfigError("expected an array");
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const char c = t[i];
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  for (const auto& it : items)
    if (it.empty()) throw ConfigError("empty array element");
  return items;
}

double to_double(const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

template <class Int>
Int to_int(const std::string& raw) {
  const std::string s = trim(raw);
  Int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

Field f_double(std::string key, double& x) {
  return {std::move(key), [&x](const std::string& v) { x = to_double(v); }, [&x] { return num(x); }};
}
Field f_int(std::string key, int& x) {
  return {std::move(key), [&x](const std::string& v) { x = to_int<int>(v); },
          [&x] { return std::to_string(x); }};
}
Field f_long(std::string key, long& x) {
  return {std::move(key), [&x](const std::string& v) { x = to_int<long>(v); },
          [&x] { return std::to_string(x); }};
}
Field f_u64(std::string key, std::uint64_t& x) {
  return {std::move(key), [&x](const std::string& v) { x = to_int<std::uint64_t>(v); },
          [&x] { return std::to_string(x); }};
}
Field f_bool(std::string key, bool& x) {
  return {std::move(key), [&x](const std::string& v) { x = to_bool(v); },
          [&x] { return std::string(x ? "true" : "false"); }};
}
Field f_string(std::string key, std::string& x) {
  return {std::move(key), [&x](const std::string& v) { x = unquote(trim(v)); },
          [&x] { return "\"" + x + "\""; }};
}
Field f_doubles(std::string key, std::vector<double>& x) {
  return {std::move(key),
          [&x](const std::string& v) {
            std::vector<double> out;
            for (const auto& it : split_array(v)) out.push_back(to_double(it));
            x = out;
          },
          [&x] {
            std::string s = "[";
            for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + num(x[i]);
            return s + "]";
          }};
}
Field f_ints(std::string key, std::vector<int>& x) {
  return {std::move(key),
          [&x](const std::string& v) {
            std::vector<int> out;
            for (const auto& it : split_array(v)) out.push_back(to_int<int>(it));
            x = out;
          },
          [&x] {
            std::string s = "[";
            for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + std::to_string(x[i]);
            return s + "]";
          }};
}
Field f_strings(std::string key, std::vector<std::string>& x) {
  return {std::move(key),
          [&x](const std::string& v) {
            std::vector<std::string> out;
            for (const auto& it : split_array(v)) out.push_back(unquote(it));
            x = out;
          },
          [&x] {
            std::string s = "[";
            for (std::size_t i = 0; i < x.size(); ++i) s += std::string(i ? ", " : "") + "\"" + x[i] + "\"";
            return s + "]";
          }};
}
Field f_vec3(std::string key, sim::Vec3& x) {
  return {std::move(key),
          [&x](const std::string& v) {
            const auto items = split_array(v);
            if (items.size() != 3) throw ConfigError("expected [x, y, z]");
            x = {to_double(items[0]), to_double(items[1]), to_double(items[2])};
          },
          [&x] { return "[" + num(x.x) + ", " + num(x.y) + ", " + num(x.z) + "]"; }};
}
Field f_family(std::string key, sim::SceneFamily& x) {
  return {std::move(key),
          [&x](const std::string& v) {
            try {
              x = eval::parse_family(unquote(trim(v)));
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
          },
          [&x] { return "\"" + eval::family_name(x) + "\""; }};
}
// The spawn image is square; width and height move together.
Field f_image(std::string key, sim::Intrinsics& x) {
  return {std::move(key),
          [&x](const std::string& v) { x.width = x.height = to_int<int>(v); },
          [&x] { return std::to_string(x.width); }};
}

std::vector<Field> fields(RunConfig& c) {
  std::vector<Field> f{
      f_double("scene.workspace", c.scene.workspace),
      f_int("scene.n_objects", c.scene.n_objects),
      f_int("scene.min_objects", c.scene.min_objects),
      f_int("scene.max_objects", c.scene.max_objects),
      f_double("scene.footprint_min", c.scene.footprint_min),
      f_double("scene.footprint_max", c.scene.footprint_max),
      f_double("scene.height_min", c.scene.height_min),
      f_double("scene.height_max", c.scene.height_max),
      f_double("scene.overlap_tolerance", c.scene.overlap_tolerance),
      f_int("scene.max_rejection_tries", c.scene.max_rejection_tries),
      f_family("scene.family", c.scene.family),
      f_double("scene.occluded_prob", c.scene.occluded_prob),
      f_vec3("scene.camera_position", c.scene.spawn_camera.position),
      f_vec3("scene.camera_look_at", c.scene.spawn_camera.look_at),
      f_double("scene.focal", c.scene.spawn_camera.intrinsics.focal),
      f_image("scene.image_size", c.scene.spawn_camera.intrinsics),
      f_int("dynamics.max_motions", c.dynamics.max_motions),
      f_bool("dynamics.perturb_on_failure", c.dynamics.perturb_on_failure),
      f_double("dynamics.perturb_scale", c.dynamics.perturb_scale),
      f_double("oracle.alpha", c.oracle.alpha),
      f_double("oracle.beta", c.oracle.beta),
      f_bool("oracle.strict_occluders", c.oracle.strict_occluders),
      f_double("oracle.clearance_radius", c.oracle.clearance_radius),
      f_double("nbv.ring_radius", c.nbv.ring_radius),
      f_doubles("nbv.elevations_deg", c.nbv.elevations_deg),
      f_int("nbv.azimuth_count", c.nbv.azimuth_count),
      f_double("nbv.voxel_size", c.nbv.voxel_size),
      f_double("nbv.truncation_mult", c.nbv.truncation_mult),
      f_double("nbv.weight_cap", c.nbv.weight_cap),
      f_double("nbv.grid_margin", c.nbv.grid_margin),
      f_double("nbv.grid_height", c.nbv.grid_height),
      f_int("nbv.render_size", c.nbv.render_size),
      f_double("nbv.unknown_height", c.nbv.unknown_height),
      f_double("perception.depth_norm", c.perception.depth_norm),
      f_int("perception.count_norm", c.perception.count_norm),
      f_long("ppo.total_steps", c.ppo.total_steps),
      f_double("ppo.learning_rate", c.ppo.learning_rate),
      f_double("ppo.gamma", c.ppo.gamma),
      f_double("ppo.gae_lambda", c.ppo.gae_lambda),
      f_int("ppo.batch_size", c.ppo.batch_size),
      f_int("ppo.minibatch_size", c.ppo.minibatch_size),
      f_int("ppo.epochs", c.ppo.epochs),
      f_double("ppo.clip", c.ppo.clip),
      f_double("ppo.vf_coef", c.ppo.vf_coef),
      f_double("ppo.ent_coef", c.ppo.ent_coef),
      f_double("ppo.max_grad_norm", c.ppo.max_grad_norm),
      f_double("ppo.adam_epsilon", c.ppo.adam_epsilon),
      f_bool("ppo.normalize_obs", c.ppo.normalize_obs),
      f_bool("ppo.normalize_reward", c.ppo.normalize_reward),
      f_bool("ppo.normalize_advantage", c.ppo.normalize_advantage),
      f_string("policy.encoder", c.policy.encoder),
      f_int("policy.hidden", c.policy.hidden),
      f_bool("train.mix_families", c.train.mix_families),
      f_strings("eval.methods", c.eval.methods),
      f_ints("eval.object_counts", c.eval.object_counts),
      f_int("eval.n_scenes", c.eval.n_scenes),
      f_string("eval.family", c.eval.family),
      f_string("eval.reference_method", c.eval.reference_method),
      f_bool("eval.include_failures", c.eval.include_failures),
      f_double("eval.fixed_tau1", c.eval.fixed_tau1),
      f_double("eval.fixed_tau2", c.eval.fixed_tau2),
      f_u64("seed", c.seed),
  };
  std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
  return f;
}

}  // namespace

std::map<std::string, std::string> parse_toml(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) throw ConfigError(where + "bad section name '" + section + "'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + "bad key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!out.emplace(full, value).second) throw ConfigError(where + "duplicate key '" + full + "'");
  }
  return out;
}

void set_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (auto& f : fields(config)) {
    if (f.key != key) continue;
    try {
      f.set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
    return;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_value(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  RunConfig config;
  try {
    for (const auto& [k, v] : parse_toml(ss.str())) set_value(config, k, v);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config;
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(c.scene.workspace > 0)) fail("scene.workspace must be positive");
  if (c.scene.min_objects < 1 || c.scene.max_objects < c.scene.min_objects)
    fail("scene.min_objects / scene.max_objects out of order");
  if (c.scene.n_objects < 0) fail("scene.n_objects must be >= 0");
  if (c.dynamics.max_motions < 1) fail("dynamics.max_motions must be >= 1");
  if (c.policy.encoder != "features" && c.policy.encoder != "conv")
    fail("policy.encoder must be features or conv");
  if (c.policy.hidden < 1) fail("policy.hidden must be positive");
  if (c.eval.n_scenes < 1) fail("eval.n_scenes must be >= 1");
  if (c.nbv.azimuth_count < 1 || c.nbv.elevations_deg.empty()) fail("nbv candidate ring is empty");
  try {
    c.ppo.validate();
    for (const auto& m : c.eval.methods) eval::parse_method(m);
    eval::parse_method(c.eval.reference_method);
    eval::parse_family(c.eval.family);
    sim::validate_camera(c.scene.spawn_camera, c.scene.workspace);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

std::string canonical_dump(const RunConfig& config) {
  RunConfig copy = config;
  std::string s;
  for (const auto& f : fields(copy)) s += f.key + " = " + f.get() + "\n";
  return s;
}

std::vector<std::string> known_keys() {
  RunConfig c;
  std::vector<std::string> keys;
  for (const auto& f : fields(c)) keys.push_back(f.key);
  return keys;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_dump(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

eval::EnvConfig env_config(const RunConfig& c) {
  eval::EnvConfig e;
  e.scene = c.scene;
  e.dynamics = c.dynamics;
  e.oracle = c.oracle;
  e.nbv = c.nbv;
  e.perception = c.perception;
  e.perception.max_motions = c.dynamics.max_motions;
  e.with_image = c.policy.encoder == "conv";
  return e;
}

eval::BatchConfig batch_config(const RunConfig& c, int jobs) {
  eval::BatchConfig b;
  b.env = env_config(c);
  b.env.scene.family = eval::parse_family(c.eval.family);
  b.fixed = {c.eval.fixed_tau1, c.eval.fixed_tau2};
  b.jobs = jobs;
  return b;
}

rl::PolicyArchitecture architecture(const RunConfig& c, rl::HeadKind head) {
  rl::PolicyArchitecture a;
  a.head = head;
  a.encoder = c.policy.encoder == "conv" ? rl::EncoderKind::kConv : rl::EncoderKind::kFeatures;
  a.feature_dim = perception::kFeatureCount;
  a.hidden = static_cast<std::size_t>(c.policy.hidden);
  a.image_size = static_cast<std::size_t>(c.scene.spawn_camera.intrinsics.width);
  return a;
}

}  // namespace xpg::cli
