#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvgl/feature_map.hpp"

namespace cvgl {

/// Synthetic paired-view dataset geometry. The satellite view is a top-down
/// 2×2-quadrant canvas; the street view is a four-strip panorama in which
/// strip n depicts quadrant n, matching the descriptor grids' index
/// correspondence.
struct SceneConfig {
  int street_height = 16;
  int street_width = 64;  // four strips of four landmark slots each
  int sat_height = 32;    // 2×2 quadrants of 2×2 landmark cells each
  int sat_width = 32;

  void validate() const;
};

struct SceneImage {
  Tensor pixels;  // {3, H, W}, values in [0, 1]
  int scene_id = 0;
  View view = View::satellite;
};

struct ScenePair {
  SceneImage street;
  SceneImage satellite;
};

/// The fixed landmark palette; every landmark is drawn with exactly one of
/// these colors in both views.
const std::vector<std::array<double, 3>>& scene_palette();

/// Deterministic in (seed, scene_id): same arguments, bit-identical pixels.
ScenePair generate_pair(std::uint64_t seed, int scene_id, const SceneConfig& cfg = {});

/// Binary portable pixmap, P6 maxval 255.
void write_ppm(const SceneImage& img, const std::string& path);

}  // namespace cvgl
