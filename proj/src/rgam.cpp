#include "cvgl/rgam.hpp"

#include <stdexcept>
#include <string>

namespace cvgl {

std::vector<Region> partition_grid(int height, int width, const GridSpec& g) {
  if (g.rows < 1 || g.cols < 1) {
    throw std::invalid_argument("partition_grid: grid must be at least 1x1, got " + std::to_string(g.rows) +
                                "x" + std::to_string(g.cols));
  }
  if (height % g.rows != 0 || width % g.cols != 0) {
    throw std::invalid_argument("partition_grid: map " + std::to_string(height) + "x" + std::to_string(width) +
                                " is not divisible into a " + std::to_string(g.rows) + "x" +
                                std::to_string(g.cols) + " grid (need height divisible by " +
                                std::to_string(g.rows) + " and width divisible by " + std::to_string(g.cols) +
                                ")");
  }
  const int rh = height / g.rows, rw = width / g.cols;
  std::vector<Region> regions;
  regions.reserve(static_cast<std::size_t>(g.region_count()));
  for (int i = 0; i < g.rows; ++i) {
    for (int j = 0; j < g.cols; ++j) {
      regions.push_back(Region{i * rh, j * rw, rh, rw});
    }
  }
  return regions;
}

std::vector<Region> partition_grid(const FeatureMap& x, const GridSpec& g) {
  return partition_grid(x.height(), x.width(), g);
}

Descriptor build_descriptor(const FeatureMap& x, const GridSpec& g, bool normalize) {
  const auto regions = partition_grid(x, g);
  std::vector<Tensor> blocks;
  blocks.reserve(regions.size());
  for (const Region& r : regions) blocks.push_back(avg_pool_region(x.values, r));
  Tensor values = concat(blocks);
  if (normalize) values = l2_normalize(values);
  return Descriptor{std::move(values), x.view, normalize};
}

}  // namespace cvgl
