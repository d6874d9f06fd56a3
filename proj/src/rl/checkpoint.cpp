#include "xpg/rl/checkpoint.hpp"

#include <fstream>

#include "xpg/core/errors.hpp"

namespace xpg::rl {

using nlohmann::json;

json architecture_to_json(const PolicyArchitecture& arch) {
  json conv = json::array();
  for (const auto& c : arch.conv) conv.push_back({c.out_c, c.kernel, c.stride});
  return {{"head", arch.head == HeadKind::kThreshold ? "threshold" : "flat"},
          {"encoder", arch.encoder == EncoderKind::kFeatures ? "features" : "conv"},
          {"feature_dim", arch.feature_dim},
          {"hidden", arch.hidden},
          {"image_size", arch.image_size},
          {"conv", conv}};
}

PolicyArchitecture architecture_from_json(const json& j) {
  PolicyArchitecture arch;
  const std::string head = j.at("head").get<std::string>();
  const std::string enc = j.at("encoder").get<std::string>();
  if (head != "threshold" && head != "flat") throw ConfigError("unknown policy head '" + head + "'");
  if (enc != "features" && enc != "conv") throw ConfigError("unknown encoder '" + enc + "'");
  arch.head = head == "threshold" ? HeadKind::kThreshold : HeadKind::kFlat;
  arch.encoder = enc == "features" ? EncoderKind::kFeatures : EncoderKind::kConv;
  arch.feature_dim = j.at("feature_dim").get<std::size_t>();
  arch.hidden = j.at("hidden").get<std::size_t>();
  arch.image_size = j.at("image_size").get<std::size_t>();
  arch.conv.clear();
  for (const auto& c : j.at("conv"))
    arch.conv.push_back({c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(),
                         c.at(2).get<std::size_t>()});
  return arch;
}

json checkpoint_to_json(const Checkpoint& ck) {
  return {{"version", kCheckpointVersion},
          {"method", ck.method},
          {"config_hash", ck.config_hash},
          {"seed", ck.seed},
          {"architecture", architecture_to_json(ck.architecture)},
          {"params", ck.params.values},
          {"normalizer",
           {{"enabled", ck.normalize_obs},
            {"count", ck.normalizer.count()},
            {"mean", ck.normalizer.mean()},
            {"variance", ck.normalizer.variance()}}}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ConfigError("unsupported checkpoint version");
    Checkpoint ck;
    ck.method = j.at("method").get<std::string>();
    ck.config_hash = j.at("config_hash").get<std::string>();
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.architecture = architecture_from_json(j.at("architecture"));
    ck.params.values = j.at("params").get<std::vector<double>>();
    const ActorCritic model(ck.architecture);
    if (ck.params.values.size() != model.param_count())
      throw ConfigError("checkpoint parameter count does not match its architecture");
    const json& n = j.at("normalizer");
    ck.normalize_obs = n.at("enabled").get<bool>();
    ck.normalizer = RunningNormalizer(ck.architecture.feature_dim);
    ck.normalizer.restore(n.at("count").get<double>(), n.at("mean").get<std::vector<double>>(),
                          n.at("variance").get<std::vector<double>>());
    return ck;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << checkpoint_to_json(checkpoint).dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("checkpoint not found: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace xpg::rl
