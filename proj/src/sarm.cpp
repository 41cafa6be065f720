#include "cvgl/sarm.hpp"

#include <cmath>
#include <stdexcept>

#include "cvgl/ops.hpp"
#include "cvgl/rng.hpp"

namespace cvgl {

SarmParams SarmParams::init(int channels, int window, std::uint64_t seed, const std::string& path) {
  if (channels < 1) throw std::invalid_argument("sarm: channels must be positive");
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("sarm: neighborhood side must be odd and positive, got " + std::to_string(window));
  }
  auto proj = [&](const char* name) {
    return Tensor::glorot_uniform({channels, channels}, channels, channels, derive_seed(seed, path + "." + name));
  };
  SarmParams p;
  p.query_global = proj("query_global");
  p.key_global = proj("key_global");
  p.value_global = proj("value_global");
  p.query_local = proj("query_local");
  p.key_local = proj("key_local");
  p.value_local = proj("value_local");
  p.gate_weight = Tensor::glorot_uniform({2 * channels, channels}, 2 * channels, channels,
                                         derive_seed(seed, path + ".gate_weight"));
  p.gate_bias = Tensor::zeros({channels}, true);
  p.window = window;
  return p;
}

void SarmParams::validate(int channels) const {
  for (const Tensor* t : {&query_global, &key_global, &value_global, &query_local, &key_local, &value_local}) {
    if (t->rank() != 2 || t->dim(0) != channels || t->dim(1) != channels) {
      throw std::invalid_argument("sarm: projection must be " + std::to_string(channels) + "x" +
                                  std::to_string(channels) + ", got " + shape_str(t->shape()));
    }
  }
  if (gate_weight.rank() != 2 || gate_weight.dim(0) != 2 * channels || gate_weight.dim(1) != channels) {
    throw std::invalid_argument("sarm: gate weight must be " + std::to_string(2 * channels) + "x" +
                                std::to_string(channels) + ", got " + shape_str(gate_weight.shape()));
  }
  if (gate_bias.rank() != 1 || gate_bias.dim(0) != channels) {
    throw std::invalid_argument("sarm: gate bias must have length " + std::to_string(channels));
  }
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("sarm: neighborhood side must be odd, got " + std::to_string(window));
  }
}

std::vector<std::vector<int>> neighborhood_windows(int height, int width, int k) {
  if (k < 1 || k % 2 == 0) {
    throw std::invalid_argument("neighborhood_windows: side must be odd and positive, got " + std::to_string(k));
  }
  const int r = k / 2;
  std::vector<std::vector<int>> windows;
  windows.reserve(static_cast<std::size_t>(height) * width);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      std::vector<int> win;
      const int r0 = std::max(0, i - r), r1 = std::min(height - 1, i + r);
      const int c0 = std::max(0, j - r), c1 = std::min(width - 1, j + r);
      win.reserve(static_cast<std::size_t>(r1 - r0 + 1) * (c1 - c0 + 1));
      for (int wi = r0; wi <= r1; ++wi)
        for (int wj = c0; wj <= c1; ++wj) win.push_back(wi * width + wj);
      windows.push_back(std::move(win));
    }
  }
  return windows;
}

FeatureMap global_attention(const FeatureMap& x, const SarmParams& p) {
  const int c = x.channels();
  p.validate(c);
  Tensor rows = map_to_rows(x.values);  // N×C
  Tensor q = matmul(rows, p.query_global);
  Tensor k = matmul(rows, p.key_global);
  Tensor v = matmul(rows, p.value_global);
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(c)));
  Tensor out = matmul(softmax_rows(scores), v);
  return FeatureMap{rows_to_map(out, x.height(), x.width()), x.view};
}

FeatureMap local_attention(const FeatureMap& x, const SarmParams& p) {
  const int c = x.channels();
  p.validate(c);
  const int limit = 2 * std::max(x.height(), x.width()) - 1;
  if (p.window > limit) {
    throw std::invalid_argument("local_attention: window " + std::to_string(p.window) + " exceeds " +
                                std::to_string(limit) + " for a " + std::to_string(x.height()) + "x" +
                                std::to_string(x.width()) + " map");
  }
  Tensor rows = map_to_rows(x.values);
  Tensor q = matmul(rows, p.query_local);
  Tensor k = matmul(rows, p.key_local);
  Tensor v = matmul(rows, p.value_local);
  Tensor out = windowed_attention(q, k, v, neighborhood_windows(x.height(), x.width(), p.window),
                                  1.0 / std::sqrt(static_cast<double>(c)));
  return FeatureMap{rows_to_map(out, x.height(), x.width()), x.view};
}

Tensor fusion_gate(const FeatureMap& global_out, const FeatureMap& local_out, const SarmParams& p) {
  if (global_out.values.shape() != local_out.values.shape()) {
    throw std::invalid_argument("fusion_gate: branch shapes differ, " + shape_str(global_out.values.shape()) +
                                " vs " + shape_str(local_out.values.shape()));
  }
  p.validate(global_out.channels());
  Tensor g_rows = map_to_rows(global_out.values);
  Tensor l_rows = map_to_rows(local_out.values);
  return sigmoid(add_row_vector(matmul(concat_cols(g_rows, l_rows), p.gate_weight), p.gate_bias));
}

FeatureMap gated_fusion(const FeatureMap& global_out, const FeatureMap& local_out, const SarmParams& p) {
  Tensor gate = fusion_gate(global_out, local_out, p);
  Tensor fused = add(map_to_rows(global_out.values), mul(gate, map_to_rows(local_out.values)));
  return FeatureMap{rows_to_map(fused, global_out.height(), global_out.width()), global_out.view};
}

FeatureMap fixed_ratio_fusion(const FeatureMap& global_out, const FeatureMap& local_out,
                              double ratio_global, double ratio_local) {
  if (global_out.values.shape() != local_out.values.shape()) {
    throw std::invalid_argument("fixed_ratio_fusion: branch shapes differ, " +
                                shape_str(global_out.values.shape()) + " vs " +
                                shape_str(local_out.values.shape()));
  }
  if (ratio_global < 0 || ratio_local < 0) {
    throw std::invalid_argument("fixed_ratio_fusion: ratios must be nonnegative");
  }
  return FeatureMap{add(scale(global_out.values, ratio_global), scale(local_out.values, ratio_local)),
                    global_out.view};
}

FeatureMap sarm_forward(const FeatureMap& x, const SarmParams& p) {
  return gated_fusion(global_attention(x, p), local_attention(x, p), p);
}

}  // namespace cvgl
