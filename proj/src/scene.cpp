#include "cvgl/scene.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cvgl/rng.hpp"

namespace cvgl {

void SceneConfig::validate() const {
  if (sat_height % 4 != 0 || sat_width % 4 != 0 || sat_height < 8 || sat_width < 8) {
    throw std::invalid_argument("scene: satellite dims must be multiples of 4 and at least 8, got " +
                                std::to_string(sat_height) + "x" + std::to_string(sat_width));
  }
  if (street_width % 16 != 0 || street_width < 16 || street_height < 8) {
    throw std::invalid_argument("scene: street width must be a multiple of 16 and height at least 8, got " +
                                std::to_string(street_height) + "x" + std::to_string(street_width));
  }
}

const std::vector<std::array<double, 3>>& scene_palette() {
  static const std::vector<std::array<double, 3>> palette = {
      {0.90, 0.15, 0.15},  // red
      {0.15, 0.85, 0.20},  // green
      {0.20, 0.30, 0.90},  // blue
      {0.95, 0.85, 0.10},  // yellow
      {0.85, 0.20, 0.80},  // magenta
      {0.10, 0.80, 0.85},  // cyan
      {0.95, 0.55, 0.10},  // orange
      {0.95, 0.95, 0.95},  // white
  };
  return palette;
}

namespace {

struct Landmark {
  int quadrant;   // 0..3 row-major on the satellite canvas
  int subcell;    // 0..3 row-major inside the quadrant
  int color;      // palette index, unique within a quadrant
  double jitter_x;
  double jitter_y;
  double radius_frac;  // of the subcell size
  double height_frac;  // street bar height
  int bar_shift;       // 0 or 1 pixel
};

struct SceneLayout {
  std::array<double, 3> background;
  std::vector<Landmark> landmarks;
};

SceneLayout layout_scene(std::uint64_t seed, int scene_id) {
  Rng rng(derive_seed(seed, "scene", static_cast<std::uint64_t>(scene_id)));
  SceneLayout scene;
  for (double& ch : scene.background) ch = rng.uniform(0.08, 0.22);
  const int palette_size = static_cast<int>(scene_palette().size());
  for (int q = 0; q < 4; ++q) {
    const int count = 1 + static_cast<int>(rng.below(4));
    // Distinct subcells and distinct colors via partial shuffles.
    std::array<int, 4> cells = {0, 1, 2, 3};
    for (int i = 0; i < count; ++i) {
      const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(4 - i)));
      std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(j)]);
    }
    std::vector<int> colors(static_cast<std::size_t>(palette_size));
    for (int i = 0; i < palette_size; ++i) colors[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < count; ++i) {
      const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(palette_size - i)));
      std::swap(colors[static_cast<std::size_t>(i)], colors[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < count; ++i) {
      Landmark lm;
      lm.quadrant = q;
      lm.subcell = cells[static_cast<std::size_t>(i)];
      lm.color = colors[static_cast<std::size_t>(i)];
      lm.jitter_x = rng.uniform(-1, 1);
      lm.jitter_y = rng.uniform(-1, 1);
      lm.radius_frac = rng.uniform(0.25, 0.4);
      lm.height_frac = rng.uniform(0.4, 0.85);
      lm.bar_shift = static_cast<int>(rng.below(2));
      scene.landmarks.push_back(lm);
    }
  }
  return scene;
}

class Canvas {
 public:
  Canvas(int height, int width) : h_(height), w_(width), rgb_(3 * static_cast<std::size_t>(height) * width) {}

  void fill(int row0, int row1, int col0, int col1, const std::array<double, 3>& color) {
    for (int c = 0; c < 3; ++c)
      for (int i = row0; i < row1; ++i)
        for (int j = col0; j < col1; ++j) at(c, i, j) = color[static_cast<std::size_t>(c)];
  }

  void disk(double cy, double cx, double radius, const std::array<double, 3>& color) {
    const int r0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int r1 = std::min(h_ - 1, static_cast<int>(std::ceil(cy + radius)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int c1 = std::min(w_ - 1, static_cast<int>(std::ceil(cx + radius)));
    for (int i = r0; i <= r1; ++i)
      for (int j = c0; j <= c1; ++j) {
        const double dy = i - cy, dx = j - cx;
        if (dy * dy + dx * dx <= radius * radius) {
          for (int c = 0; c < 3; ++c) at(c, i, j) = color[static_cast<std::size_t>(c)];
        }
      }
  }

  double& at(int c, int i, int j) { return rgb_[(static_cast<std::size_t>(c) * h_ + i) * w_ + j]; }

  Tensor tensor() && { return Tensor::from_data({3, h_, w_}, std::move(rgb_)); }

 private:
  int h_, w_;
  std::vector<double> rgb_;
};

// Hash-indexed background texture; order-free and deterministic per scene.
double texture_offset(std::uint64_t scene_seed, std::size_t index, double amplitude) {
  const std::uint64_t h = mix_u64(scene_seed ^ (0x9e3779b97f4a7c15ull * (index + 1)));
  return amplitude * (static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0);
}

void texture_background(Canvas& canvas, int height, int width, std::uint64_t scene_seed) {
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) {
        double& v = canvas.at(c, i, j);
        v = std::min(0.5, std::max(0.0, v + texture_offset(scene_seed, (static_cast<std::size_t>(c) * height + i) * width + j, 0.04)));
      }
}

Tensor render_satellite(const SceneLayout& scene, const SceneConfig& cfg, std::uint64_t scene_seed) {
  Canvas canvas(cfg.sat_height, cfg.sat_width);
  canvas.fill(0, cfg.sat_height, 0, cfg.sat_width, scene.background);
  texture_background(canvas, cfg.sat_height, cfg.sat_width, scene_seed);
  const int qh = cfg.sat_height / 2, qw = cfg.sat_width / 2;
  const int sh = qh / 2, sw = qw / 2;  // subcell
  for (const Landmark& lm : scene.landmarks) {
    const int q_row = lm.quadrant / 2, q_col = lm.quadrant % 2;
    const int s_row = lm.subcell / 2, s_col = lm.subcell % 2;
    const double cy = q_row * qh + s_row * sh + sh / 2.0 + lm.jitter_y;
    const double cx = q_col * qw + s_col * sw + sw / 2.0 + lm.jitter_x;
    const double radius = lm.radius_frac * std::min(sh, sw);
    canvas.disk(cy, cx, std::max(1.2, radius), scene_palette()[static_cast<std::size_t>(lm.color)]);
  }
  return std::move(canvas).tensor();
}

Tensor render_street(const SceneLayout& scene, const SceneConfig& cfg, std::uint64_t scene_seed) {
  Canvas canvas(cfg.street_height, cfg.street_width);
  // Lighter sky over darker ground; both stay well below the palette colors.
  std::array<double, 3> sky, ground;
  for (int c = 0; c < 3; ++c) {
    sky[static_cast<std::size_t>(c)] = scene.background[static_cast<std::size_t>(c)] * 0.7 + 0.25;
    ground[static_cast<std::size_t>(c)] = scene.background[static_cast<std::size_t>(c)] * 0.9;
  }
  canvas.fill(0, cfg.street_height / 2, 0, cfg.street_width, sky);
  canvas.fill(cfg.street_height / 2, cfg.street_height, 0, cfg.street_width, ground);
  texture_background(canvas, cfg.street_height, cfg.street_width, scene_seed);

  const int strip_w = cfg.street_width / 4;
  // Slot boundaries are deliberately uneven (multiples of strip_w/16) so the
  // rendered structure carries no single spatial period.
  const int u = strip_w / 16;
  const std::array<int, 5> slot_edge = {0, 5 * u, 9 * u, 13 * u, 16 * u};
  for (const Landmark& lm : scene.landmarks) {
    // Strip index = quadrant index; slot = subcell index inside the strip.
    const int slot0 = slot_edge[static_cast<std::size_t>(lm.subcell)];
    const int slot1 = slot_edge[static_cast<std::size_t>(lm.subcell) + 1];
    const int bar_w = std::max(1, 3 * u);
    const int x0 = lm.quadrant * strip_w + slot0 + std::min(lm.bar_shift, slot1 - slot0 - bar_w);
    const int bar_h = std::max(2, static_cast<int>(std::lround(lm.height_frac * cfg.street_height)));
    const int row0 = cfg.street_height - bar_h;
    canvas.fill(row0, cfg.street_height, x0, std::min(x0 + bar_w, cfg.street_width),
                scene_palette()[static_cast<std::size_t>(lm.color)]);
  }
  return std::move(canvas).tensor();
}

}  // namespace

ScenePair generate_pair(std::uint64_t seed, int scene_id, const SceneConfig& cfg) {
  cfg.validate();
  const std::uint64_t scene_seed = derive_seed(seed, "scene", static_cast<std::uint64_t>(scene_id));
  const SceneLayout scene = layout_scene(seed, scene_id);
  ScenePair pair;
  pair.street = SceneImage{render_street(scene, cfg, scene_seed), scene_id, View::street};
  pair.satellite = SceneImage{render_satellite(scene, cfg, scene_seed), scene_id, View::satellite};
  return pair;
}

void write_ppm(const SceneImage& img, const std::string& path) {
  const int h = img.pixels.dim(1), w = img.pixels.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P6\n" << w << " " << h << "\n255\n";
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int c = 0; c < 3; ++c) {
        const double v = img.pixels.at(c, i, j);
        const int byte = static_cast<int>(std::lround(std::min(1.0, std::max(0.0, v)) * 255.0));
        out.put(static_cast<char>(byte));
      }
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace cvgl
