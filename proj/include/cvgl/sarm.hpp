#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvgl/feature_map.hpp"

namespace cvgl {

/// Spatial adaptive representation: a global-attention branch and a windowed
/// local-attention branch over the same map, fused per position by a learned
/// sigmoid gate that rescales the local contribution.
struct SarmParams {
  Tensor query_global, key_global, value_global;  // C×C
  Tensor query_local, key_local, value_local;     // C×C
  Tensor gate_weight;                             // 2C×C
  Tensor gate_bias;                               // C
  int window = 3;                                 // odd local neighborhood side

  static SarmParams init(int channels, int window, std::uint64_t seed, const std::string& path);

  int channels() const { return query_global.dim(0); }
  void validate(int channels) const;
};

/// Row-major list of in-bounds positions inside the k×k window centered at
/// each position; the window is clipped at the borders, never padded.
std::vector<std::vector<int>> neighborhood_windows(int height, int width, int k);

FeatureMap global_attention(const FeatureMap& x, const SarmParams& p);
FeatureMap local_attention(const FeatureMap& x, const SarmParams& p);

/// Per-position channel gate sigmoid(gate_fc([O_global_i, O_local_i])), one
/// row per position.
Tensor fusion_gate(const FeatureMap& global_out, const FeatureMap& local_out, const SarmParams& p);

/// O = O_global + sigmoid(gate([O_global, O_local])) ⊙ O_local, per position.
FeatureMap gated_fusion(const FeatureMap& global_out, const FeatureMap& local_out, const SarmParams& p);

/// Ablation baseline: O = ratio_global·O_global + ratio_local·O_local.
FeatureMap fixed_ratio_fusion(const FeatureMap& global_out, const FeatureMap& local_out,
                              double ratio_global, double ratio_local);

FeatureMap sarm_forward(const FeatureMap& x, const SarmParams& p);

}  // namespace cvgl
