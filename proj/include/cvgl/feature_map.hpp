#pragma once

#include <string_view>

#include "cvgl/tensor.hpp"

namespace cvgl {

enum class View { street, satellite };

const char* view_name(View v);

/// C×H×W activation map tagged with the view it came from.
struct FeatureMap {
  Tensor values;  // shape {C, H, W}
  View view = View::satellite;

  int channels() const { return values.dim(0); }
  int height() const { return values.dim(1); }
  int width() const { return values.dim(2); }
};

FeatureMap make_feature_map(Tensor values, View view);

/// {C,H,W} -> {H·W, C}: one row per spatial position, row-major positions.
Tensor map_to_rows(const Tensor& chw);

/// Inverse of map_to_rows.
Tensor rows_to_map(const Tensor& rows, int height, int width);

}  // namespace cvgl
