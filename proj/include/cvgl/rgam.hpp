#pragma once

#include <vector>

#include "cvgl/feature_map.hpp"
#include "cvgl/ops.hpp"

namespace cvgl {

/// Fixed region grid over a feature map; regions enumerate row-major.
struct GridSpec {
  int rows = 2;
  int cols = 2;
  int region_count() const { return rows * cols; }
};

/// Retrieval embedding: row-major concatenation of per-region pooled channel
/// vectors, optionally L2-normalized.
struct Descriptor {
  Tensor values;  // length rows·cols·C
  View view = View::satellite;
  bool normalized = false;
};

/// Non-overlapping exhaustive cover of height×width; errors name the
/// divisors a non-conforming map would need.
std::vector<Region> partition_grid(int height, int width, const GridSpec& g);
std::vector<Region> partition_grid(const FeatureMap& x, const GridSpec& g);

Descriptor build_descriptor(const FeatureMap& x, const GridSpec& g, bool normalize);

}  // namespace cvgl
