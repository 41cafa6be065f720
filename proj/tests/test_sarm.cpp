#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cvgl/ops.hpp"
#include "cvgl/rng.hpp"
#include "cvgl/sarm.hpp"
#include "doctest.h"

using namespace cvgl;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-1, 1);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

SarmParams random_params(int channels, int window, Rng& rng) {
  SarmParams p;
  p.query_global = random_tensor({channels, channels}, rng, true);
  p.key_global = random_tensor({channels, channels}, rng, true);
  p.value_global = random_tensor({channels, channels}, rng, true);
  p.query_local = random_tensor({channels, channels}, rng, true);
  p.key_local = random_tensor({channels, channels}, rng, true);
  p.value_local = random_tensor({channels, channels}, rng, true);
  p.gate_weight = random_tensor({2 * channels, channels}, rng, true);
  p.gate_bias = random_tensor({channels}, rng, true);
  p.window = window;
  return p;
}

// Raw-double attention oracle: per query position, dot products against the
// listed key positions, stable softmax, weighted value sum. Independent of
// the tensor library.
std::vector<double> attention_oracle(const FeatureMap& x, const Tensor& wq, const Tensor& wk,
                                     const Tensor& wv, const std::vector<std::vector<int>>& windows) {
  const int c = x.channels(), h = x.height(), w = x.width(), n = h * w;
  auto pos_vec = [&](int pos) {
    std::vector<double> v(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) v[static_cast<std::size_t>(ch)] = x.values.at(ch, pos / w, pos % w);
    return v;
  };
  auto project = [&](const std::vector<double>& v, const Tensor& m) {
    std::vector<double> out(static_cast<std::size_t>(c), 0.0);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < c; ++i) out[static_cast<std::size_t>(j)] += v[static_cast<std::size_t>(i)] * m.at(i, j);
    return out;
  };
  const double scale = 1.0 / std::sqrt(static_cast<double>(c));
  std::vector<double> out(static_cast<std::size_t>(n) * c, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto q = project(pos_vec(i), wq);
    const auto& win = windows[static_cast<std::size_t>(i)];
    std::vector<double> scores;
    for (int j : win) {
      const auto k = project(pos_vec(j), wk);
      double s = 0.0;
      for (int ch = 0; ch < c; ++ch) s += q[static_cast<std::size_t>(ch)] * k[static_cast<std::size_t>(ch)];
      scores.push_back(s * scale);
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) {
      s = std::exp(s - m);
      z += s;
    }
    for (std::size_t j = 0; j < win.size(); ++j) {
      const auto v = project(pos_vec(win[j]), wv);
      for (int ch = 0; ch < c; ++ch) {
        out[static_cast<std::size_t>(i) * c + ch] += scores[j] / z * v[static_cast<std::size_t>(ch)];
      }
    }
  }
  return out;
}

std::vector<std::vector<int>> full_windows(int n) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  return std::vector<std::vector<int>>(static_cast<std::size_t>(n), all);
}

double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    worst = std::max(worst, std::abs(a.values.data()[i] - b.values.data()[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("global attention on a singleton map is the value projection") {
  Rng rng(31);
  const int c = 3;
  SarmParams p = random_params(c, 1, rng);
  FeatureMap x{random_tensor({c, 1, 1}, rng), View::satellite};
  FeatureMap out = global_attention(x, p);
  // Single position: the attention weight is exactly 1.
  Tensor expected = matmul(map_to_rows(x.values), p.value_global);
  for (int ch = 0; ch < c; ++ch) CHECK(std::abs(out.values.at(ch, 0, 0) - expected.at(0, ch)) <= 1e-12);
}

TEST_CASE("global attention of a spatially constant map is constant") {
  Rng rng(37);
  const int c = 4, h = 2, w = 3;
  SarmParams p = random_params(c, 1, rng);
  std::vector<double> data(static_cast<std::size_t>(c) * h * w);
  for (int ch = 0; ch < c; ++ch) {
    const double v = rng.uniform(-1, 1);
    for (int i = 0; i < h * w; ++i) data[static_cast<std::size_t>(ch) * h * w + i] = v;
  }
  FeatureMap x{Tensor::from_data({c, h, w}, std::move(data)), View::street};
  FeatureMap out = global_attention(x, p);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) CHECK(std::abs(out.values.at(ch, i, j) - out.values.at(ch, 0, 0)) <= 1e-12);
}

TEST_CASE("global attention matches the per-position loop oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(rng.below(3));
    const int h = 1 + static_cast<int>(rng.below(3));
    const int w = 1 + static_cast<int>(rng.below(3));
    SarmParams p = random_params(c, 1, rng);
    FeatureMap x{random_tensor({c, h, w}, rng), View::satellite};
    FeatureMap out = global_attention(x, p);
    const auto expected = attention_oracle(x, p.query_global, p.key_global, p.value_global, full_windows(h * w));
    for (int i = 0; i < h * w; ++i)
      for (int ch = 0; ch < c; ++ch)
        CHECK(std::abs(out.values.at(ch, i / w, i % w) - expected[static_cast<std::size_t>(i) * c + ch]) <= 1e-10);
  }
}

TEST_CASE("local attention with k=1 is the per-position value projection") {
  Rng rng(43);
  const int c = 3, h = 2, w = 2;
  SarmParams p = random_params(c, 1, rng);
  FeatureMap x{random_tensor({c, h, w}, rng), View::street};
  FeatureMap out = local_attention(x, p);
  Tensor expected = matmul(map_to_rows(x.values), p.value_local);
  for (int i = 0; i < h * w; ++i)
    for (int ch = 0; ch < c; ++ch)
      CHECK(std::abs(out.values.at(ch, i / w, i % w) - expected.at(i, ch)) <= 1e-12);
}

TEST_CASE("local attention equals global attention when the window covers the map") {
  Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(rng.below(3));
    const int h = 1 + static_cast<int>(rng.below(3));
    const int w = 1 + static_cast<int>(rng.below(3));
    SarmParams p = random_params(c, 2 * std::max(h, w) - 1, rng);
    p.query_local = p.query_global;
    p.key_local = p.key_global;
    p.value_local = p.value_global;
    FeatureMap x{random_tensor({c, h, w}, rng), View::satellite};
    CHECK(max_abs_diff(local_attention(x, p), global_attention(x, p)) <= 1e-10);
  }
}

TEST_CASE("local attention clips the window at map corners") {
  Rng rng(53);
  const int c = 2, h = 3, w = 3;
  const auto windows = neighborhood_windows(h, w, 3);
  CHECK(windows[0] == std::vector<int>{0, 1, 3, 4});        // top-left corner: 2x2 block
  CHECK(windows[8] == std::vector<int>{4, 5, 7, 8});        // bottom-right corner
  CHECK(windows[4] == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8});  // center sees all

  SarmParams p = random_params(c, 3, rng);
  FeatureMap x{random_tensor({c, h, w}, rng), View::street};
  FeatureMap out = local_attention(x, p);
  const auto expected = attention_oracle(x, p.query_local, p.key_local, p.value_local, windows);
  for (int i = 0; i < h * w; ++i)
    for (int ch = 0; ch < c; ++ch)
      CHECK(std::abs(out.values.at(ch, i / w, i % w) - expected[static_cast<std::size_t>(i) * c + ch]) <= 1e-10);
}

TEST_CASE("local attention validates the window size") {
  Rng rng(59);
  FeatureMap x{random_tensor({2, 2, 2}, rng), View::street};
  SarmParams p = random_params(2, 2, rng);
  CHECK_THROWS_AS(local_attention(x, p), std::invalid_argument);  // even k
  p.window = 5;                                                   // exceeds 2*max(H,W)-1 = 3
  CHECK_THROWS_AS(local_attention(x, p), std::invalid_argument);
}

TEST_CASE("gate saturation reproduces the pure branches") {
  Rng rng(61);
  const int c = 3, h = 2, w = 2;
  SarmParams p = random_params(c, 1, rng);
  FeatureMap og{random_tensor({c, h, w}, rng), View::satellite};
  FeatureMap oh{random_tensor({c, h, w}, rng), View::satellite};

  p.gate_weight = Tensor::zeros({2 * c, c});
  p.gate_bias = Tensor::full({c}, -1e3);
  FeatureMap closed = gated_fusion(og, oh, p);
  for (std::size_t i = 0; i < closed.values.size(); ++i)
    CHECK(std::abs(closed.values.data()[i] - og.values.data()[i]) <= 1e-9);

  p.gate_bias = Tensor::full({c}, 1e3);
  FeatureMap open = gated_fusion(og, oh, p);
  for (std::size_t i = 0; i < open.values.size(); ++i)
    CHECK(std::abs(open.values.data()[i] - (og.values.data()[i] + oh.values.data()[i])) <= 1e-9);
}

TEST_CASE("zero gate parameters give a half-open gate") {
  Rng rng(67);
  const int c = 2, h = 1, w = 2;
  SarmParams p = random_params(c, 1, rng);
  p.gate_weight = Tensor::zeros({2 * c, c});
  p.gate_bias = Tensor::zeros({c});
  FeatureMap og{random_tensor({c, h, w}, rng), View::street};
  FeatureMap oh{random_tensor({c, h, w}, rng), View::street};
  FeatureMap fused = gated_fusion(og, oh, p);
  for (std::size_t i = 0; i < fused.values.size(); ++i) {
    CHECK(std::abs(fused.values.data()[i] - (og.values.data()[i] + 0.5 * oh.values.data()[i])) <= 1e-12);
  }
}

TEST_CASE("gate stays strictly inside (0,1) and fusion stays between the branches") {
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 2 + static_cast<int>(rng.below(3));
    const int h = 1 + static_cast<int>(rng.below(3));
    const int w = 1 + static_cast<int>(rng.below(3));
    SarmParams p = random_params(c, 1, rng);
    FeatureMap og{random_tensor({c, h, w}, rng), View::satellite};
    Tensor oh_abs;
    {
      Tensor raw = random_tensor({c, h, w}, rng);
      std::vector<double> a = raw.data();
      for (double& v : a) v = std::abs(v);
      oh_abs = Tensor::from_data({c, h, w}, std::move(a));
    }
    FeatureMap oh{oh_abs, View::satellite};
    Tensor gate = fusion_gate(og, oh, p);
    for (double g : gate.data()) {
      CHECK(g > 0.0);
      CHECK(g < 1.0);
    }
    FeatureMap fused = gated_fusion(og, oh, p);
    for (std::size_t i = 0; i < fused.values.size(); ++i) {
      CHECK(fused.values.data()[i] >= og.values.data()[i] - 1e-12);
      CHECK(fused.values.data()[i] <= og.values.data()[i] + oh.values.data()[i] + 1e-12);
    }
  }
}

TEST_CASE("fixed ratio fusion") {
  Rng rng(73);
  const int c = 2, h = 2, w = 2;
  FeatureMap og{random_tensor({c, h, w}, rng), View::street};
  FeatureMap oh{random_tensor({c, h, w}, rng), View::street};

  CHECK(max_abs_diff(fixed_ratio_fusion(og, oh, 1, 0), og) == 0.0);
  CHECK(max_abs_diff(fixed_ratio_fusion(og, oh, 0, 1), oh) == 0.0);

  FeatureMap ones_g{Tensor::full({c, h, w}, 1.0), View::street};
  FeatureMap ones_h{Tensor::full({c, h, w}, 1.0), View::street};
  FeatureMap mix = fixed_ratio_fusion(ones_g, ones_h, 2, 1);
  for (double v : mix.values.data()) CHECK(v == 3.0);

  CHECK_THROWS_AS(fixed_ratio_fusion(og, oh, -1, 1), std::invalid_argument);
}

TEST_CASE("sarm_forward with a slammed-shut gate equals global attention") {
  Rng rng(79);
  const int c = 3, h = 2, w = 2;
  SarmParams p = random_params(c, 3, rng);
  p.gate_weight = Tensor::zeros({2 * c, c});
  p.gate_bias = Tensor::full({c}, -1e3);
  FeatureMap x{random_tensor({c, h, w}, rng), View::satellite};
  CHECK(max_abs_diff(sarm_forward(x, p), global_attention(x, p)) <= 1e-9);
}

TEST_CASE("sarm_forward closed form on a 1x1 map with identity projections") {
  Rng rng(83);
  const int c = 3;
  SarmParams p = random_params(c, 1, rng);
  Tensor eye = Tensor::from_data({c, c}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  p.query_global = p.key_global = p.value_global = eye;
  p.query_local = p.key_local = p.value_local = eye;

  FeatureMap x{random_tensor({c, 1, 1}, rng), View::street};
  FeatureMap out = sarm_forward(x, p);

  // Both branches reduce to x; expected = x + sigmoid(W^T [x;x] + b) ⊙ x.
  for (int ch = 0; ch < c; ++ch) {
    double pre = p.gate_bias.at(ch);
    for (int i = 0; i < c; ++i) {
      pre += x.values.at(i, 0, 0) * p.gate_weight.at(i, ch);
      pre += x.values.at(i, 0, 0) * p.gate_weight.at(c + i, ch);
    }
    const double expected = x.values.at(ch, 0, 0) * (1.0 + 1.0 / (1.0 + std::exp(-pre)));
    CHECK(std::abs(out.values.at(ch, 0, 0) - expected) <= 1e-12);
  }
}

TEST_CASE("global attention is permutation equivariant on a 1x2x2 map") {
  Rng rng(89);
  SarmParams p = random_params(1, 1, rng);
  const std::vector<double> base = {0.3, -1.2, 0.7, 2.1};
  FeatureMap x{Tensor::from_data({1, 2, 2}, base), View::satellite};
  FeatureMap out = global_attention(x, p);

  std::vector<int> perm = {0, 1, 2, 3};
  do {
    std::vector<double> permuted(4);
    for (int i = 0; i < 4; ++i) permuted[static_cast<std::size_t>(perm[i])] = base[static_cast<std::size_t>(i)];
    FeatureMap xp{Tensor::from_data({1, 2, 2}, permuted), View::satellite};
    FeatureMap outp = global_attention(xp, p);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(outp.values.data()[static_cast<std::size_t>(perm[i])] - out.values.data()[static_cast<std::size_t>(i)]) <= 1e-12);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("sarm parameter gradients pass finite differences on a 2x3x3 map") {
  Rng rng(97);
  const int c = 2, h = 3, w = 3;
  SarmParams p = random_params(c, 3, rng);
  FeatureMap x{random_tensor({c, h, w}, rng), View::street};
  Tensor probe = random_tensor({c, h, w}, rng);

  auto forward = [&] { return sum_all(mul(sarm_forward(x, p).values, probe)); };

  std::vector<std::pair<const char*, Tensor>> params = {
      {"query_global", p.query_global}, {"key_global", p.key_global}, {"value_global", p.value_global},
      {"query_local", p.query_local},   {"key_local", p.key_local},   {"value_local", p.value_local},
      {"gate_weight", p.gate_weight},   {"gate_bias", p.gate_bias},
  };

  Tape tape;
  Tensor loss = forward();
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& [name, t] : params) analytic.push_back(t.grad());

  const double h_fd = 1e-5;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    CAPTURE(params[pi].first);
    Tensor& t = params[pi].second;
    const std::vector<double> base_vals = t.data();
    for (std::size_t e = 0; e < base_vals.size(); ++e) {
      std::vector<double> bump = base_vals;
      bump[e] = base_vals[e] + h_fd;
      t.set_data(bump);
      const double up = forward().value();
      bump[e] = base_vals[e] - h_fd;
      t.set_data(bump);
      const double down = forward().value();
      t.set_data(base_vals);
      const double fd = (up - down) / (2 * h_fd);
      const double a = analytic[pi][e];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
      CHECK(rel <= 1e-4);
    }
  }
}
