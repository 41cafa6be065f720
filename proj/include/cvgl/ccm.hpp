#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cvgl/feature_map.hpp"

namespace cvgl {

/// Channel calibration: pooled channel statistics are decoupled into a
/// linearly-mixed component and a locally-convolved component, cross
/// correlated into a correction vector, and injected at every spatial
/// position with a learned strength.
///
/// granularity > 1 widens both components to C×d matrices (d columns per
/// channel); granularity 1 is the plain vector form.
struct CcmParams {
  std::vector<Tensor> conv_kernels;  // granularity kernels, each width w
  Tensor linear_weight;              // C × (C·granularity)
  Tensor linear_bias;                // C·granularity
  Tensor proj_weight;                // C×C, the per-position input projection
  Tensor proj_bias;                  // C
  Tensor alpha;                      // scalar injection strength, starts at 0

  static CcmParams init(int channels, int kernel_width, int granularity, std::uint64_t seed,
                        const std::string& path);

  int channels() const { return proj_weight.dim(0); }
  int granularity() const { return static_cast<int>(conv_kernels.size()); }
  void validate(int channels) const;
};

/// Per-channel mean over all spatial positions.
Tensor global_channel_pool(const FeatureMap& x);

/// Returns (linear component, convolved component); shape {C} when
/// granularity is 1, {C, d} otherwise.
std::pair<Tensor, Tensor> decouple_channels(const Tensor& pooled, const CcmParams& p);

/// Row sums of the two cross-correlation products. Accepts {C} vectors or
/// {C, d} component matrices.
Tensor cross_calibrate(const Tensor& linear_part, const Tensor& conv_part);

/// Projects the map per position and adds alpha-scaled correction to every
/// position.
FeatureMap inject_calibration(const FeatureMap& x, const Tensor& correction, const CcmParams& p);

FeatureMap ccm_forward(const FeatureMap& x, const CcmParams& p);

/// Ablation baseline: the correction is a single affine map of the pooled
/// vector (granularity must be 1); decoupling and cross correlation are
/// skipped.
FeatureMap ccm_fc_forward(const FeatureMap& x, const CcmParams& p);

}  // namespace cvgl
