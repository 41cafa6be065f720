#include "cvgl/ccm.hpp"

#include <stdexcept>

#include "cvgl/ops.hpp"
#include "cvgl/rng.hpp"

namespace cvgl {

CcmParams CcmParams::init(int channels, int kernel_width, int granularity, std::uint64_t seed,
                          const std::string& path) {
  if (channels < 1) throw std::invalid_argument("ccm: channels must be positive");
  if (kernel_width < 1 || kernel_width % 2 == 0) {
    throw std::invalid_argument("ccm: kernel width must be odd, got " + std::to_string(kernel_width));
  }
  if (kernel_width > channels) {
    throw std::invalid_argument("ccm: kernel width " + std::to_string(kernel_width) +
                                " exceeds channel count " + std::to_string(channels));
  }
  if (granularity < 1) throw std::invalid_argument("ccm: granularity must be positive");
  CcmParams p;
  for (int j = 0; j < granularity; ++j) {
    p.conv_kernels.push_back(Tensor::glorot_uniform(
        {kernel_width}, kernel_width, 1, derive_seed(seed, path + ".conv." + std::to_string(j))));
  }
  p.linear_weight = Tensor::glorot_uniform({channels, channels * granularity}, channels,
                                           channels * granularity, derive_seed(seed, path + ".linear_weight"));
  p.linear_bias = Tensor::zeros({channels * granularity}, true);
  p.proj_weight = Tensor::glorot_uniform({channels, channels}, channels, channels,
                                         derive_seed(seed, path + ".proj_weight"));
  p.proj_bias = Tensor::zeros({channels}, true);
  p.alpha = Tensor::scalar(0.0, true);
  return p;
}

void CcmParams::validate(int channels) const {
  const int d = granularity();
  if (d < 1) throw std::invalid_argument("ccm: no convolution kernels");
  for (const Tensor& k : conv_kernels) {
    if (k.rank() != 1 || k.dim(0) % 2 == 0 || k.dim(0) > channels) {
      throw std::invalid_argument("ccm: kernel must be odd-width and no wider than " +
                                  std::to_string(channels) + ", got " + shape_str(k.shape()));
    }
  }
  if (linear_weight.rank() != 2 || linear_weight.dim(0) != channels || linear_weight.dim(1) != channels * d) {
    throw std::invalid_argument("ccm: linear weight must be " + std::to_string(channels) + "x" +
                                std::to_string(channels * d) + ", got " + shape_str(linear_weight.shape()));
  }
  if (linear_bias.rank() != 1 || linear_bias.dim(0) != channels * d) {
    throw std::invalid_argument("ccm: linear bias must have length " + std::to_string(channels * d));
  }
  if (proj_weight.rank() != 2 || proj_weight.dim(0) != channels || proj_weight.dim(1) != channels) {
    throw std::invalid_argument("ccm: projection must be " + std::to_string(channels) + "x" +
                                std::to_string(channels) + ", got " + shape_str(proj_weight.shape()));
  }
  if (proj_bias.rank() != 1 || proj_bias.dim(0) != channels) {
    throw std::invalid_argument("ccm: projection bias must have length " + std::to_string(channels));
  }
  if (alpha.size() != 1) throw std::invalid_argument("ccm: alpha must be a scalar");
}

Tensor global_channel_pool(const FeatureMap& x) {
  return avg_pool_region(x.values, Region{0, 0, x.height(), x.width()});
}

std::pair<Tensor, Tensor> decouple_channels(const Tensor& pooled, const CcmParams& p) {
  if (pooled.rank() != 1) {
    throw std::invalid_argument("decouple_channels: pooled vector expected, got " + shape_str(pooled.shape()));
  }
  const int c = pooled.dim(0);
  p.validate(c);
  const int d = p.granularity();

  Tensor linear_part =
      add_row_vector(matmul(reshape(pooled, {1, c}), p.linear_weight), p.linear_bias);  // 1×(C·d)
  Tensor conv_part;
  if (d == 1) {
    linear_part = reshape(linear_part, {c});
    conv_part = conv1d_channels(pooled, p.conv_kernels[0]);
  } else {
    linear_part = reshape(linear_part, {c, d});
    std::vector<Tensor> columns;
    columns.reserve(static_cast<std::size_t>(d));
    for (const Tensor& k : p.conv_kernels) columns.push_back(conv1d_channels(pooled, k));
    // Stack the d channel vectors as columns: concat gives {d·C} in column
    // order, i.e. a {d, C} matrix to transpose.
    conv_part = transpose(reshape(concat(columns), {d, c}));
  }
  return {std::move(linear_part), std::move(conv_part)};
}

Tensor cross_calibrate(const Tensor& linear_part, const Tensor& conv_part) {
  if (linear_part.shape() != conv_part.shape()) {
    throw std::invalid_argument("cross_calibrate: component shapes differ, " + shape_str(linear_part.shape()) +
                                " vs " + shape_str(conv_part.shape()));
  }
  const int c = linear_part.dim(0);
  Tensor fl = linear_part.rank() == 1 ? reshape(linear_part, {c, 1}) : linear_part;
  Tensor fh = conv_part.rank() == 1 ? reshape(conv_part, {c, 1}) : conv_part;
  Tensor cross = add(matmul(fh, transpose(fl)), matmul(fl, transpose(fh)));  // C×C
  Tensor ones = Tensor::full({c, 1}, 1.0);
  return reshape(matmul(cross, ones), {c});  // row sums
}

FeatureMap inject_calibration(const FeatureMap& x, const Tensor& correction, const CcmParams& p) {
  const int c = x.channels();
  p.validate(c);
  if (correction.rank() != 1 || correction.dim(0) != c) {
    throw std::invalid_argument("inject_calibration: correction must have length " + std::to_string(c) +
                                ", got " + shape_str(correction.shape()));
  }
  Tensor rows = map_to_rows(x.values);
  Tensor projected = add_row_vector(matmul(rows, p.proj_weight), p.proj_bias);
  Tensor shifted = add_row_vector(projected, mul_scalar(correction, p.alpha));
  return FeatureMap{rows_to_map(shifted, x.height(), x.width()), x.view};
}

FeatureMap ccm_forward(const FeatureMap& x, const CcmParams& p) {
  Tensor pooled = global_channel_pool(x);
  auto [linear_part, conv_part] = decouple_channels(pooled, p);
  Tensor correction = cross_calibrate(linear_part, conv_part);
  return inject_calibration(x, correction, p);
}

FeatureMap ccm_fc_forward(const FeatureMap& x, const CcmParams& p) {
  if (p.granularity() != 1) {
    throw std::invalid_argument("ccm_fc_forward: granularity must be 1 in fc mode");
  }
  const int c = x.channels();
  p.validate(c);
  Tensor pooled = global_channel_pool(x);
  Tensor correction =
      reshape(add_row_vector(matmul(reshape(pooled, {1, c}), p.linear_weight), p.linear_bias), {c});
  return inject_calibration(x, correction, p);
}

}  // namespace cvgl
