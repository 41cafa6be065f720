#include "cvgl/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cvgl/rng.hpp"

namespace cvgl {

const std::vector<CorruptionKind>& all_corruption_kinds() {
  static const std::vector<CorruptionKind> kinds = {
      CorruptionKind::gaussian_noise, CorruptionKind::defocus_blur, CorruptionKind::motion_blur,
      CorruptionKind::zoom_blur,      CorruptionKind::fog,          CorruptionKind::brightness,
      CorruptionKind::contrast,       CorruptionKind::pixelate,
  };
  return kinds;
}

const char* corruption_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::defocus_blur: return "defocus_blur";
    case CorruptionKind::motion_blur: return "motion_blur";
    case CorruptionKind::zoom_blur: return "zoom_blur";
    case CorruptionKind::fog: return "fog";
    case CorruptionKind::brightness: return "brightness";
    case CorruptionKind::contrast: return "contrast";
    case CorruptionKind::pixelate: return "pixelate";
  }
  throw std::invalid_argument("unknown corruption kind");
}

std::optional<CorruptionKind> parse_corruption(std::string_view name) {
  for (CorruptionKind kind : all_corruption_kinds()) {
    if (name == corruption_name(kind)) return kind;
  }
  return std::nullopt;
}

namespace {

struct Dims {
  int h, w;
};

Dims pixel_dims(const Tensor& pixels) {
  if (pixels.rank() != 3 || pixels.dim(0) != 3) {
    throw std::invalid_argument("corruption: pixels must be 3 x H x W, got " + shape_str(pixels.shape()));
  }
  return {pixels.dim(1), pixels.dim(2)};
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

Tensor from_clamped(Shape shape, std::vector<double> data) {
  for (double& v : data) v = clamp01(v);
  return Tensor::from_data(std::move(shape), std::move(data));
}

int clamp_index(int i, int n) { return std::min(n - 1, std::max(0, i)); }

double sample_replicated(const std::vector<double>& src, int c, int i, int j, const Dims& d) {
  return src[(static_cast<std::size_t>(c) * d.h + clamp_index(i, d.h)) * d.w + clamp_index(j, d.w)];
}

// Bilinear sample at fractional (y, x), clamped to the image.
double sample_bilinear(const std::vector<double>& src, int c, double y, double x, const Dims& d) {
  y = std::min(static_cast<double>(d.h - 1), std::max(0.0, y));
  x = std::min(static_cast<double>(d.w - 1), std::max(0.0, x));
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(d.h - 1, y0 + 1), x1 = std::min(d.w - 1, x0 + 1);
  const double fy = y - y0, fx = x - x0;
  auto v = [&](int i, int j) { return src[(static_cast<std::size_t>(c) * d.h + i) * d.w + j]; };
  return (1 - fy) * ((1 - fx) * v(y0, x0) + fx * v(y0, x1)) + fy * ((1 - fx) * v(y1, x0) + fx * v(y1, x1));
}

}  // namespace

Tensor gaussian_noise(const Tensor& pixels, double sigma, std::uint64_t noise_seed) {
  pixel_dims(pixels);
  if (sigma < 0) throw std::invalid_argument("gaussian_noise: sigma must be nonnegative");
  Rng rng(noise_seed);
  std::vector<double> out = pixels.data();
  for (double& v : out) v += sigma * rng.gaussian();
  return from_clamped(pixels.shape(), std::move(out));
}

Tensor defocus_blur(const Tensor& pixels, int radius) {
  const Dims d = pixel_dims(pixels);
  if (radius < 0) throw std::invalid_argument("defocus_blur: radius must be nonnegative");
  if (radius == 0) return pixels;
  std::vector<std::pair<int, int>> taps;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) taps.emplace_back(dy, dx);
  const double inv = 1.0 / static_cast<double>(taps.size());
  std::vector<double> out(pixels.size());
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < d.h; ++i)
      for (int j = 0; j < d.w; ++j) {
        double acc = 0.0;
        for (const auto& [dy, dx] : taps) acc += sample_replicated(pixels.data(), c, i + dy, j + dx, d);
        out[(static_cast<std::size_t>(c) * d.h + i) * d.w + j] = acc * inv;
      }
  return from_clamped(pixels.shape(), std::move(out));
}

Tensor motion_blur(const Tensor& pixels, int length) {
  const Dims d = pixel_dims(pixels);
  if (length < 1 || length % 2 == 0) throw std::invalid_argument("motion_blur: length must be odd and positive");
  if (length == 1) return pixels;
  const int r = length / 2;
  const double inv = 1.0 / static_cast<double>(length);
  std::vector<double> out(pixels.size());
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < d.h; ++i)
      for (int j = 0; j < d.w; ++j) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) acc += sample_replicated(pixels.data(), c, i, j + t, d);
        out[(static_cast<std::size_t>(c) * d.h + i) * d.w + j] = acc * inv;
      }
  return from_clamped(pixels.shape(), std::move(out));
}

Tensor zoom_blur(const Tensor& pixels, int copies) {
  const Dims d = pixel_dims(pixels);
  if (copies < 1) throw std::invalid_argument("zoom_blur: need at least one copy");
  const double cy = (d.h - 1) / 2.0, cx = (d.w - 1) / 2.0;
  std::vector<double> acc(pixels.size(), 0.0);
  for (int k = 0; k < copies; ++k) {
    const double zoom = 1.0 + 0.04 * k;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < d.h; ++i)
        for (int j = 0; j < d.w; ++j) {
          const double sy = cy + (i - cy) / zoom;
          const double sx = cx + (j - cx) / zoom;
          acc[(static_cast<std::size_t>(c) * d.h + i) * d.w + j] += sample_bilinear(pixels.data(), c, sy, sx, d);
        }
  }
  const double inv = 1.0 / copies;
  for (double& v : acc) v *= inv;
  return from_clamped(pixels.shape(), std::move(acc));
}

Tensor fog_blend(const Tensor& pixels, double weight) {
  const Dims d = pixel_dims(pixels);
  if (weight < 0 || weight > 1) throw std::invalid_argument("fog_blend: weight must be in [0,1]");
  std::vector<double> out(pixels.size());
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < d.h; ++i) {
      const double ramp = d.h > 1 ? 0.9 - 0.35 * static_cast<double>(i) / (d.h - 1) : 0.9;
      for (int j = 0; j < d.w; ++j) {
        const std::size_t idx = (static_cast<std::size_t>(c) * d.h + i) * d.w + j;
        out[idx] = (1.0 - weight) * pixels.data()[idx] + weight * ramp;
      }
    }
  return from_clamped(pixels.shape(), std::move(out));
}

Tensor brightness_shift(const Tensor& pixels, double delta) {
  pixel_dims(pixels);
  if (delta == 0.0) return pixels;
  std::vector<double> out = pixels.data();
  for (double& v : out) v += delta;
  return from_clamped(pixels.shape(), std::move(out));
}

Tensor contrast_adjust(const Tensor& pixels, double scale) {
  const Dims d = pixel_dims(pixels);
  if (scale < 0) throw std::invalid_argument("contrast_adjust: scale must be nonnegative");
  if (scale == 1.0) return pixels;
  std::vector<double> out(pixels.size());
  const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += pixels.data()[static_cast<std::size_t>(c) * plane + i];
    mean /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      out[static_cast<std::size_t>(c) * plane + i] =
          mean + scale * (pixels.data()[static_cast<std::size_t>(c) * plane + i] - mean);
    }
  }
  return from_clamped(pixels.shape(), std::move(out));
}

Tensor pixelate(const Tensor& pixels, int factor) {
  const Dims d = pixel_dims(pixels);
  if (factor < 1) throw std::invalid_argument("pixelate: factor must be positive");
  if (factor == 1) return pixels;
  std::vector<double> out(pixels.size());
  for (int c = 0; c < 3; ++c) {
    for (int bi = 0; bi < d.h; bi += factor) {
      for (int bj = 0; bj < d.w; bj += factor) {
        const int ri = std::min(d.h, bi + factor), rj = std::min(d.w, bj + factor);
        double mean = 0.0;
        for (int i = bi; i < ri; ++i)
          for (int j = bj; j < rj; ++j) mean += pixels.data()[(static_cast<std::size_t>(c) * d.h + i) * d.w + j];
        mean /= static_cast<double>((ri - bi) * (rj - bj));
        for (int i = bi; i < ri; ++i)
          for (int j = bj; j < rj; ++j) out[(static_cast<std::size_t>(c) * d.h + i) * d.w + j] = mean;
      }
    }
  }
  return from_clamped(pixels.shape(), std::move(out));
}

SceneImage apply_corruption(const SceneImage& img, const CorruptionSpec& spec, std::uint64_t seed,
                            const CorruptionTable& table) {
  if (spec.severity < 1 || spec.severity > kSeverityLevels) {
    throw std::invalid_argument("corruption severity must be in [1,5], got " + std::to_string(spec.severity));
  }
  const std::size_t s = static_cast<std::size_t>(spec.severity - 1);
  Tensor out;
  switch (spec.kind) {
    case CorruptionKind::gaussian_noise: {
      const std::uint64_t noise_seed = derive_seed(seed, corruption_name(spec.kind),
                                                   static_cast<std::uint64_t>(img.scene_id),
                                                   static_cast<std::uint64_t>(spec.severity));
      out = gaussian_noise(img.pixels, table.gaussian_sigma[s], noise_seed);
      break;
    }
    case CorruptionKind::defocus_blur: out = defocus_blur(img.pixels, table.defocus_radius[s]); break;
    case CorruptionKind::motion_blur: out = motion_blur(img.pixels, table.motion_length[s]); break;
    case CorruptionKind::zoom_blur: out = zoom_blur(img.pixels, table.zoom_copies[s]); break;
    case CorruptionKind::fog: out = fog_blend(img.pixels, table.fog_weight[s]); break;
    case CorruptionKind::brightness: out = brightness_shift(img.pixels, table.brightness_delta[s]); break;
    case CorruptionKind::contrast: out = contrast_adjust(img.pixels, table.contrast_scale[s]); break;
    case CorruptionKind::pixelate: out = pixelate(img.pixels, table.pixelate_factor[s]); break;
  }
  if (!out.defined()) throw std::invalid_argument("unknown corruption kind");
  return SceneImage{std::move(out), img.scene_id, img.view};
}

std::string ppm_filename(const std::string& split, int scene_id, View view,
                         const std::optional<CorruptionSpec>& corruption) {
  std::string name = split + "_" + std::to_string(scene_id) + "_" + view_name(view);
  if (corruption) {
    name += std::string("_") + corruption_name(corruption->kind) + "_" + std::to_string(corruption->severity);
  }
  return name + ".ppm";
}

}  // namespace cvgl
