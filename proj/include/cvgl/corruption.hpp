#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cvgl/scene.hpp"

namespace cvgl {

enum class CorruptionKind {
  gaussian_noise,
  defocus_blur,
  motion_blur,
  zoom_blur,
  fog,
  brightness,
  contrast,
  pixelate,
};

inline constexpr int kSeverityLevels = 5;

const std::vector<CorruptionKind>& all_corruption_kinds();
const char* corruption_name(CorruptionKind kind);
std::optional<CorruptionKind> parse_corruption(std::string_view name);

/// (kind, severity 1–5); severity strictly orders perturbation magnitude.
struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  int severity = 1;
};

/// Severity parameter tables, indexable by severity-1. Defaults are this
/// harness's own calibration; override per entry if a different sweep is
/// needed.
struct CorruptionTable {
  std::array<double, 5> gaussian_sigma{0.04, 0.08, 0.12, 0.18, 0.26};
  std::array<int, 5> defocus_radius{1, 2, 3, 4, 6};
  std::array<int, 5> motion_length{3, 5, 7, 9, 13};
  std::array<int, 5> zoom_copies{2, 3, 4, 5, 7};
  std::array<double, 5> fog_weight{0.15, 0.30, 0.45, 0.60, 0.75};
  std::array<double, 5> brightness_delta{0.1, 0.2, 0.3, 0.4, 0.5};
  std::array<double, 5> contrast_scale{0.75, 0.60, 0.45, 0.30, 0.15};
  std::array<int, 5> pixelate_factor{2, 3, 4, 6, 8};
};

// Raw-parameter operators. All are pure, clamp to [0,1], and leave the input
// untouched. contrast_adjust(^, 1.0), brightness_shift(^, 0.0) and
// pixelate(^, 1) are exact identities.
Tensor gaussian_noise(const Tensor& pixels, double sigma, std::uint64_t noise_seed);
Tensor defocus_blur(const Tensor& pixels, int radius);
Tensor motion_blur(const Tensor& pixels, int length);
Tensor zoom_blur(const Tensor& pixels, int copies);
Tensor fog_blend(const Tensor& pixels, double weight);
Tensor brightness_shift(const Tensor& pixels, double delta);
Tensor contrast_adjust(const Tensor& pixels, double scale);
Tensor pixelate(const Tensor& pixels, int factor);

/// Severity-table dispatch. Noise draws are seeded from
/// (seed, scene_id, kind, severity), so a fixed seed reproduces the full
/// evaluation suite regardless of sweep order.
SceneImage apply_corruption(const SceneImage& img, const CorruptionSpec& spec, std::uint64_t seed,
                            const CorruptionTable& table = {});

/// `<split>_<scene_id>_<view>[_<kind>_<severity>].ppm`
std::string ppm_filename(const std::string& split, int scene_id, View view,
                         const std::optional<CorruptionSpec>& corruption = std::nullopt);

}  // namespace cvgl
