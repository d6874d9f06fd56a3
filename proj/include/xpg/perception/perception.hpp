#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "xpg/grasp/scores.hpp"
#include "xpg/sim/render.hpp"

namespace xpg::perception {

struct TargetMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;  // 1 where the target is the visible surface

  std::int64_t count() const;
  friend bool operator==(const TargetMask&, const TargetMask&) = default;
};

struct OdmEntry {
  int object_id = 0;
  double mean_depth = 0.0;
  double shade = 0.0;
  friend bool operator==(const OdmEntry&, const OdmEntry&) = default;
};

// Object depth map. object_order runs farthest to nearest; the object at
// index i of N gets shade (i + 1) / N, background stays 0.
struct OdmMap {
  int width = 0;
  int height = 0;
  std::vector<double> shades;
  std::vector<OdmEntry> object_order;

  double shade_of(int object_id) const;  // 0 if not visible
  friend bool operator==(const OdmMap&, const OdmMap&) = default;
};

enum Feature : std::size_t {
  kTargetVisibleFraction,
  kTargetMeanDepth,
  kVisibleObjectCount,
  kOccluderShadeMean,
  kOccluderShadeMax,
  kQTarget,
  kQOcclude,
  kProgress,
  kFeatureCount,
};

struct PerceptionConfig {
  double depth_norm = 1.5;  // meters mapped to 1.0
  int count_norm = 20;      // visible objects mapped to 1.0
  int max_motions = 10;
};

struct Observation {
  TargetMask target_mask;
  OdmMap odm;
  std::vector<double> features;  // kFeatureCount entries, each in [0, 1]

  friend bool operator==(const Observation&, const Observation&) = default;
};

TargetMask build_target_mask(const sim::DepthRender& render, int target_id);

OdmMap build_odm(const sim::DepthRender& render);

Observation build_observation(const sim::DepthRender& render, int target_id,
                              const grasp::GraspScores& scores, int step_count,
                              const PerceptionConfig& config);

// Mask and ODM stacked as two H x W channels, for the convolutional encoder.
std::vector<double> stacked_channels(const Observation& obs);

// Features, ODM order and the mask as run-length pairs (start, length).
nlohmann::json observation_to_json(const Observation& obs);

std::vector<std::uint8_t> odm_to_gray(const OdmMap& odm);
std::vector<std::uint8_t> mask_to_gray(const TargetMask& mask);

// Binary PGM (P5).
void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const std::uint8_t> pixels);

}  // namespace xpg::perception
