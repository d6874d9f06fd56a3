#include "xpg/perception/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace xpg::perception {

std::int64_t TargetMask::count() const { return std::count(mask.begin(), mask.end(), 1); }

double OdmMap::shade_of(int object_id) const {
  for (const auto& e : object_order)
    if (e.object_id == object_id) return e.shade;
  return 0.0;
}

TargetMask build_target_mask(const sim::DepthRender& render, int target_id) {
  TargetMask m;
  m.width = render.width;
  m.height = render.height;
  m.mask.resize(render.instance.size());
  for (std::size_t i = 0; i < render.instance.size(); ++i)
    m.mask[i] = render.instance[i] == target_id ? 1 : 0;
  return m;
}

OdmMap build_odm(const sim::DepthRender& render) {
  // id -> (depth sum, pixel count); std::map keeps ids ascending.
  std::map<int, std::pair<double, std::int64_t>> acc;
  for (std::size_t i = 0; i < render.instance.size(); ++i) {
    const int id = render.instance[i];
    if (id == sim::kBackground) continue;
    auto& [sum, n] = acc[id];
    sum += render.depth[i];
    ++n;
  }
  OdmMap odm;
  odm.width = render.width;
  odm.height = render.height;
  for (const auto& [id, a] : acc)
    odm.object_order.push_back({id, a.first / static_cast<double>(a.second), 0.0});
  // Farthest first; equal depths keep ascending id.
  std::stable_sort(odm.object_order.begin(), odm.object_order.end(),
                   [](const OdmEntry& a, const OdmEntry& b) { return a.mean_depth > b.mean_depth; });
  const double n = static_cast<double>(odm.object_order.size());
  std::map<int, double> shade;
  for (std::size_t i = 0; i < odm.object_order.size(); ++i) {
    odm.object_order[i].shade = static_cast<double>(i + 1) / n;
    shade[odm.object_order[i].object_id] = odm.object_order[i].shade;
  }
  odm.shades.assign(render.instance.size(), 0.0);
  for (std::size_t i = 0; i < render.instance.size(); ++i)
    if (render.instance[i] != sim::kBackground) odm.shades[i] = shade[render.instance[i]];
  return odm;
}

Observation build_observation(const sim::DepthRender& render, int target_id,
                              const grasp::GraspScores& scores, int step_count,
                              const PerceptionConfig& config) {
  Observation obs;
  obs.target_mask = build_target_mask(render, target_id);
  obs.odm = build_odm(render);

  const double pixels = static_cast<double>(render.width) * render.height;
  const std::int64_t target_pixels = obs.target_mask.count();
  double target_depth = 0.0;
  double occ_sum = 0.0, occ_max = 0.0;
  int occ_n = 0;
  for (const auto& e : obs.odm.object_order) {
    if (e.object_id == target_id) {
      target_depth = e.mean_depth;
    } else {
      occ_sum += e.shade;
      occ_max = std::max(occ_max, e.shade);
      ++occ_n;
    }
  }
  auto unit = [](double v) { return std::clamp(v, 0.0, 1.0); };
  obs.features.assign(kFeatureCount, 0.0);
  obs.features[kTargetVisibleFraction] = unit(static_cast<double>(target_pixels) / pixels);
  obs.features[kTargetMeanDepth] = unit(target_depth / config.depth_norm);
  obs.features[kVisibleObjectCount] =
      unit(static_cast<double>(obs.odm.object_order.size()) / config.count_norm);
  obs.features[kOccluderShadeMean] = occ_n > 0 ? unit(occ_sum / occ_n) : 0.0;
  obs.features[kOccluderShadeMax] = unit(occ_max);
  obs.features[kQTarget] = unit(scores.q_target);
  obs.features[kQOcclude] = unit(scores.q_occlude);
  obs.features[kProgress] = unit(static_cast<double>(step_count) / config.max_motions);
  return obs;
}

std::vector<double> stacked_channels(const Observation& obs) {
  std::vector<double> out;
  out.reserve(obs.target_mask.mask.size() + obs.odm.shades.size());
  for (auto m : obs.target_mask.mask) out.push_back(m);
  out.insert(out.end(), obs.odm.shades.begin(), obs.odm.shades.end());
  return out;
}

nlohmann::json observation_to_json(const Observation& obs) {
  nlohmann::json order = nlohmann::json::array();
  for (const auto& e : obs.odm.object_order)
    order.push_back({{"id", e.object_id}, {"mean_depth", e.mean_depth}, {"shade", e.shade}});
  nlohmann::json rle = nlohmann::json::array();
  const auto& m = obs.target_mask.mask;
  for (std::size_t i = 0; i < m.size();) {
    if (m[i] == 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < m.size() && m[j] == 1) ++j;
    rle.push_back({i, j - i});
    i = j;
  }
  return {{"width", obs.target_mask.width},
          {"height", obs.target_mask.height},
          {"features", obs.features},
          {"odm_order", std::move(order)},
          {"mask_rle", std::move(rle)}};
}

std::vector<std::uint8_t> odm_to_gray(const OdmMap& odm) {
  std::vector<std::uint8_t> g(odm.shades.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = static_cast<std::uint8_t>(std::lround(std::clamp(odm.shades[i], 0.0, 1.0) * 255.0));
  return g;
}

std::vector<std::uint8_t> mask_to_gray(const TargetMask& mask) {
  std::vector<std::uint8_t> g(mask.mask.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = mask.mask[i] ? 255 : 0;
  return g;
}

void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("pgm size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "P5\n" << width << ' ' << height << "\n255\n";
  f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

}  // namespace xpg::perception
