#include "cvgl/encoder.hpp"

#include <stdexcept>

#include "cvgl/ops.hpp"
#include "cvgl/rng.hpp"

namespace cvgl {

void EncoderConfig::validate() const {
  if (channels < 4 || channels % 4 != 0) {
    throw std::invalid_argument("encoder: channels must be a positive multiple of 4, got " +
                                std::to_string(channels));
  }
  if (patch < 1) throw std::invalid_argument("encoder: patch size must be positive");
  if (blocks < 1) throw std::invalid_argument("encoder: need at least one block");
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("encoder: attention window must be odd, got " + std::to_string(window));
  }
  if (ccm_kernel < 1 || ccm_kernel % 2 == 0 || ccm_kernel > channels) {
    throw std::invalid_argument("encoder: channel kernel must be odd and no wider than " +
                                std::to_string(channels) + ", got " + std::to_string(ccm_kernel));
  }
  const int d = ccm_mode == CcmMode::variant ? ccm_granularity : 1;
  if (d < 1) throw std::invalid_argument("encoder: granularity must be positive");
  if (ratio_global < 0 || ratio_local < 0) {
    throw std::invalid_argument("encoder: fusion ratios must be nonnegative");
  }
  if (street_grid.region_count() != 4 || satellite_grid.region_count() != 4) {
    throw std::invalid_argument("encoder: descriptor grids must cover four regions");
  }
}

GridSpec EncoderConfig::grid(View view) const {
  if (!use_rgam) return GridSpec{1, 1};
  return view == View::street ? street_grid : satellite_grid;
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EncoderParams p;
  const int in_dim = 3 * cfg.patch * cfg.patch;
  p.patch_weight = Tensor::glorot_uniform({in_dim, cfg.channels}, in_dim, cfg.channels,
                                          derive_seed(seed, "patch.weight"));
  p.patch_bias = Tensor::zeros({cfg.channels}, true);
  const int d = cfg.ccm_mode == CcmMode::variant ? cfg.ccm_granularity : 1;
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string path = "block" + std::to_string(b);
    BlockParams block;
    block.sarm = SarmParams::init(cfg.channels, cfg.window, seed, path + ".sarm");
    block.ccm = CcmParams::init(cfg.channels, cfg.ccm_kernel, d, seed, path + ".ccm");
    p.blocks.push_back(std::move(block));
  }
  return p;
}

void EncoderParams::validate(const EncoderConfig& cfg) const {
  const int in_dim = 3 * cfg.patch * cfg.patch;
  if (patch_weight.rank() != 2 || patch_weight.dim(0) != in_dim || patch_weight.dim(1) != cfg.channels) {
    throw std::invalid_argument("encoder: patch weight must be " + std::to_string(in_dim) + "x" +
                                std::to_string(cfg.channels) + ", got " + shape_str(patch_weight.shape()));
  }
  if (patch_bias.rank() != 1 || patch_bias.dim(0) != cfg.channels) {
    throw std::invalid_argument("encoder: patch bias must have length " + std::to_string(cfg.channels));
  }
  if (static_cast<int>(blocks.size()) != cfg.blocks) {
    throw std::invalid_argument("encoder: expected " + std::to_string(cfg.blocks) + " blocks, have " +
                                std::to_string(blocks.size()));
  }
  for (const BlockParams& b : blocks) {
    b.sarm.validate(cfg.channels);
    b.ccm.validate(cfg.channels);
  }
}

std::vector<std::pair<std::string, Tensor>> named_params(const EncoderParams& params) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("patch.weight", params.patch_weight);
  out.emplace_back("patch.bias", params.patch_bias);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b) + ".";
    const SarmParams& s = params.blocks[b].sarm;
    out.emplace_back(prefix + "sarm.query_global", s.query_global);
    out.emplace_back(prefix + "sarm.key_global", s.key_global);
    out.emplace_back(prefix + "sarm.value_global", s.value_global);
    out.emplace_back(prefix + "sarm.query_local", s.query_local);
    out.emplace_back(prefix + "sarm.key_local", s.key_local);
    out.emplace_back(prefix + "sarm.value_local", s.value_local);
    out.emplace_back(prefix + "sarm.gate_weight", s.gate_weight);
    out.emplace_back(prefix + "sarm.gate_bias", s.gate_bias);
    const CcmParams& c = params.blocks[b].ccm;
    for (std::size_t j = 0; j < c.conv_kernels.size(); ++j) {
      out.emplace_back(prefix + "ccm.conv." + std::to_string(j), c.conv_kernels[j]);
    }
    out.emplace_back(prefix + "ccm.linear_weight", c.linear_weight);
    out.emplace_back(prefix + "ccm.linear_bias", c.linear_bias);
    out.emplace_back(prefix + "ccm.proj_weight", c.proj_weight);
    out.emplace_back(prefix + "ccm.proj_bias", c.proj_bias);
    out.emplace_back(prefix + "ccm.alpha", c.alpha);
  }
  return out;
}

namespace {

[[noreturn]] void rethrow_with_stage(const char* stage, View view, const std::exception& e) {
  throw std::invalid_argument("encode[" + std::string(view_name(view)) + "] " + stage + ": " + e.what());
}

}  // namespace

FeatureMap apply_block(const FeatureMap& x, const EncoderConfig& cfg, const BlockParams& p) {
  FeatureMap y = x;
  bool touched = false;
  if (cfg.use_sarm) {
    FeatureMap global_out = global_attention(y, p.sarm);
    FeatureMap local_out = local_attention(y, p.sarm);
    y = cfg.fusion == FusionMode::adaptive
            ? gated_fusion(global_out, local_out, p.sarm)
            : fixed_ratio_fusion(global_out, local_out, cfg.ratio_global, cfg.ratio_local);
    touched = true;
  }
  switch (cfg.ccm_mode) {
    case CcmMode::on:
    case CcmMode::variant:
      y = ccm_forward(y, p.ccm);
      touched = true;
      break;
    case CcmMode::fc:
      y = ccm_fc_forward(y, p.ccm);
      touched = true;
      break;
    case CcmMode::off: break;
  }
  if (!touched) return x;  // identity block, no residual doubling
  if (cfg.residual) y.values = add(x.values, y.values);
  return y;
}

Descriptor encode(const SceneImage& img, const EncoderConfig& cfg, const EncoderParams& params) {
  cfg.validate();
  params.validate(cfg);

  FeatureMap x{Tensor{}, img.view};
  try {
    Tensor patches = extract_patches(img.pixels, cfg.patch);
    Tensor rows = add_row_vector(matmul(patches, params.patch_weight), params.patch_bias);
    x.values = rows_to_map(rows, img.pixels.dim(1) / cfg.patch, img.pixels.dim(2) / cfg.patch);
  } catch (const std::invalid_argument& e) {
    rethrow_with_stage("patch-embed", img.view, e);
  }

  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    try {
      x = apply_block(x, cfg, params.blocks[b]);
    } catch (const std::invalid_argument& e) {
      rethrow_with_stage(("block" + std::to_string(b)).c_str(), img.view, e);
    }
  }

  try {
    return build_descriptor(x, cfg.grid(img.view), true);
  } catch (const std::invalid_argument& e) {
    rethrow_with_stage("descriptor", img.view, e);
  }
}

}  // namespace cvgl
