#include "cvgl/feature_map.hpp"

#include <stdexcept>

#include "cvgl/ops.hpp"

namespace cvgl {

const char* view_name(View v) { return v == View::street ? "street" : "satellite"; }

FeatureMap make_feature_map(Tensor values, View view) {
  if (values.rank() != 3) {
    throw std::invalid_argument("feature map must be C x H x W, got " + shape_str(values.shape()));
  }
  return FeatureMap{std::move(values), view};
}

Tensor map_to_rows(const Tensor& chw) {
  if (chw.rank() != 3) {
    throw std::invalid_argument("map_to_rows expects C x H x W, got " + shape_str(chw.shape()));
  }
  const int c = chw.dim(0), n = chw.dim(1) * chw.dim(2);
  return transpose(reshape(chw, {c, n}));
}

Tensor rows_to_map(const Tensor& rows, int height, int width) {
  if (rows.rank() != 2 || rows.dim(0) != height * width) {
    throw std::invalid_argument("rows_to_map: " + shape_str(rows.shape()) + " does not cover " +
                                std::to_string(height) + "x" + std::to_string(width) + " positions");
  }
  return reshape(transpose(rows), {rows.dim(1), height, width});
}

}  // namespace cvgl
