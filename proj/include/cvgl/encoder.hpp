#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cvgl/ccm.hpp"
#include "cvgl/rgam.hpp"
#include "cvgl/sarm.hpp"
#include "cvgl/scene.hpp"

namespace cvgl {

enum class CcmMode { on, off, fc, variant };
enum class FusionMode { adaptive, fixed };

/// Shared-weight encoder: patch embedding, `blocks` enhancement blocks (each
/// an attention stage feeding a channel-calibration stage, with an optional
/// outer residual), then the per-view region-grid descriptor. One parameter
/// set serves both views; only the descriptor grid differs.
struct EncoderConfig {
  int channels = 32;
  int patch = 4;
  int blocks = 2;
  int window = 3;           // local attention neighborhood side
  int ccm_kernel = 3;       // channel convolution width
  int ccm_granularity = 1;  // component columns; >1 only in variant mode
  bool residual = true;
  bool use_sarm = true;
  CcmMode ccm_mode = CcmMode::on;
  bool use_rgam = true;
  FusionMode fusion = FusionMode::adaptive;
  double ratio_global = 1.0;  // fixed-fusion weights
  double ratio_local = 1.0;
  GridSpec street_grid{1, 4};
  GridSpec satellite_grid{2, 2};

  void validate() const;

  /// The descriptor grid for a view; whole-map pooling when the region
  /// module is disabled.
  GridSpec grid(View view) const;

  int descriptor_length() const { return (use_rgam ? 4 : 1) * channels; }
};

struct BlockParams {
  SarmParams sarm;
  CcmParams ccm;
};

struct EncoderParams {
  Tensor patch_weight;  // (3·patch²) × C
  Tensor patch_bias;    // C
  std::vector<BlockParams> blocks;

  static EncoderParams init(const EncoderConfig& cfg, std::uint64_t seed);
  void validate(const EncoderConfig& cfg) const;
};

/// Stable dotted-name enumeration; iteration order is the initialization
/// order, which checkpoints and the optimizer both rely on.
std::vector<std::pair<std::string, Tensor>> named_params(const EncoderParams& params);

Descriptor encode(const SceneImage& img, const EncoderConfig& cfg, const EncoderParams& params);

/// One enhancement block as used inside encode; exposed for tests.
FeatureMap apply_block(const FeatureMap& x, const EncoderConfig& cfg, const BlockParams& p);

}  // namespace cvgl
