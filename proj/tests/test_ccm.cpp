#include <cmath>
#include <numeric>
#include <vector>

#include "cvgl/ccm.hpp"
#include "cvgl/ops.hpp"
#include "cvgl/rng.hpp"
#include "doctest.h"

using namespace cvgl;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-1, 1);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Dyadic values (multiples of 2^-10) keep all downstream arithmetic exact.
Tensor dyadic_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = static_cast<double>(static_cast<int>(rng.below(2049)) - 1024) / 1024.0;
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor identity_matrix(int n) {
  std::vector<double> data(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) data[static_cast<std::size_t>(i) * n + i] = 1.0;
  return Tensor::from_data({n, n}, std::move(data));
}

CcmParams random_params(int channels, int width, int granularity, Rng& rng) {
  CcmParams p;
  for (int j = 0; j < granularity; ++j) p.conv_kernels.push_back(random_tensor({width}, rng, true));
  p.linear_weight = random_tensor({channels, channels * granularity}, rng, true);
  p.linear_bias = random_tensor({channels * granularity}, rng, true);
  p.proj_weight = random_tensor({channels, channels}, rng, true);
  p.proj_bias = random_tensor({channels}, rng, true);
  p.alpha = Tensor::scalar(rng.uniform(-1, 1), true);
  return p;
}

}  // namespace

TEST_CASE("global channel pool: constants, forced mean, loop oracle") {
  Tensor constant = Tensor::full({3, 2, 2}, -0.75);
  FeatureMap cm{constant, View::satellite};
  for (int c = 0; c < 3; ++c) CHECK(global_channel_pool(cm).at(c) == -0.75);

  FeatureMap tiny{Tensor::from_data({1, 2, 2}, {1, 3, 5, 7}), View::street};
  CHECK(global_channel_pool(tiny).at(0) == 4.0);

  Rng rng(103);
  FeatureMap x{random_tensor({4, 3, 5}, rng), View::street};
  Tensor pooled = global_channel_pool(x);
  for (int c = 0; c < 4; ++c) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 5; ++j) acc += x.values.at(c, i, j);
    CHECK(std::abs(pooled.at(c) - acc / 15.0) <= 1e-12);
  }
}

TEST_CASE("decouple_channels identity configuration returns the input twice") {
  Rng rng(107);
  const int c = 5;
  CcmParams p = random_params(c, 3, 1, rng);
  p.linear_weight = identity_matrix(c);
  p.linear_bias = Tensor::zeros({c});
  p.conv_kernels[0] = Tensor::from_data({3}, {0, 1, 0});
  Tensor f = random_tensor({c}, rng);
  auto [fl, fh] = decouple_channels(f, p);
  for (int i = 0; i < c; ++i) {
    CHECK(fl.at(i) == doctest::Approx(f.at(i)).epsilon(1e-14));
    CHECK(fh.at(i) == f.at(i));
  }
}

TEST_CASE("decouple_channels with zero linear weight returns the bias") {
  Rng rng(109);
  const int c = 4;
  CcmParams p = random_params(c, 3, 1, rng);
  p.linear_weight = Tensor::zeros({c, c});
  Tensor f = random_tensor({c}, rng);
  auto [fl, fh] = decouple_channels(f, p);
  for (int i = 0; i < c; ++i) CHECK(fl.at(i) == p.linear_bias.at(i));
}

TEST_CASE("decouple_channels matches a primitive-composition oracle") {
  Rng rng(113);
  const int c = 6, w = 3;
  CcmParams p = random_params(c, w, 1, rng);
  Tensor f = random_tensor({c}, rng);
  auto [fl, fh] = decouple_channels(f, p);
  for (int i = 0; i < c; ++i) {
    double lin = p.linear_bias.at(i);
    for (int j = 0; j < c; ++j) lin += f.at(j) * p.linear_weight.at(j, i);
    CHECK(std::abs(fl.at(i) - lin) <= 1e-12);
    double conv = 0.0;
    for (int t = 0; t < w; ++t) {
      const int src = i + t - w / 2;
      if (src >= 0 && src < c) conv += f.at(src) * p.conv_kernels[0].at(t);
    }
    CHECK(std::abs(fh.at(i) - conv) <= 1e-12);
  }
}

TEST_CASE("cross_calibrate worked example and degenerate cases") {
  Tensor fl = Tensor::from_data({2}, {1, 2});
  Tensor fh = Tensor::from_data({2}, {3, 4});
  Tensor fp = cross_calibrate(fl, fh);
  CHECK(fp.at(0) == 16.0);
  CHECK(fp.at(1) == 26.0);

  Tensor zero = Tensor::zeros({2});
  Tensor annihilated = cross_calibrate(zero, fh);
  CHECK(annihilated.at(0) == 0.0);
  CHECK(annihilated.at(1) == 0.0);

  const int c = 7;
  Tensor ones = Tensor::full({c}, 1.0);
  Tensor doubled = cross_calibrate(ones, ones);
  for (int i = 0; i < c; ++i) CHECK(doubled.at(i) == 2.0 * c);
}

TEST_CASE("cross_calibrate outer-product path agrees with the collapsed form") {
  Rng rng(127);
  for (int c : {2, 3, 8, 17, 33, 64}) {
    Tensor fl = random_tensor({c}, rng);
    Tensor fh = random_tensor({c}, rng);
    Tensor fp = cross_calibrate(fl, fh);
    double sum_l = 0.0, sum_h = 0.0;
    for (int i = 0; i < c; ++i) {
      sum_l += fl.at(i);
      sum_h += fh.at(i);
    }
    for (int i = 0; i < c; ++i) {
      const double collapsed = fh.at(i) * sum_l + fl.at(i) * sum_h;
      CHECK(std::abs(fp.at(i) - collapsed) <= 1e-12);
    }
  }
}

TEST_CASE("inject_calibration limits") {
  Rng rng(131);
  const int c = 3, h = 2, w = 2;
  CcmParams p = random_params(c, 3, 1, rng);
  FeatureMap x{random_tensor({c, h, w}, rng), View::street};
  Tensor correction = random_tensor({c}, rng);

  SUBCASE("alpha = 0 leaves only the projection") {
    p.alpha = Tensor::scalar(0.0);
    FeatureMap out = inject_calibration(x, correction, p);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int ch = 0; ch < c; ++ch) {
          double proj = p.proj_bias.at(ch);
          for (int src = 0; src < c; ++src) proj += x.values.at(src, i, j) * p.proj_weight.at(src, ch);
          CHECK(std::abs(out.values.at(ch, i, j) - proj) <= 1e-12);
        }
  }

  SUBCASE("identity projection and zero correction reproduce the input") {
    p.proj_weight = identity_matrix(c);
    p.proj_bias = Tensor::zeros({c});
    FeatureMap out = inject_calibration(x, Tensor::zeros({c}), p);
    for (std::size_t i = 0; i < out.values.size(); ++i) CHECK(out.values.data()[i] == x.values.data()[i]);
  }

  SUBCASE("alpha = 1 with constant correction shifts every position") {
    p.alpha = Tensor::scalar(1.0);
    Tensor c_shift = Tensor::full({c}, 0.625);
    FeatureMap base = inject_calibration(x, Tensor::zeros({c}), p);
    FeatureMap out = inject_calibration(x, c_shift, p);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      CHECK(std::abs(out.values.data()[i] - base.values.data()[i] - 0.625) <= 1e-12);
    }
  }
}

TEST_CASE("ccm_forward on a zero map with zero projection bias is zero") {
  Rng rng(137);
  const int c = 4;
  CcmParams p = random_params(c, 3, 1, rng);
  p.proj_bias = Tensor::zeros({c});
  FeatureMap x{Tensor::zeros({c, 2, 2}), View::satellite};
  FeatureMap out = ccm_forward(x, p);
  for (double v : out.values.data()) CHECK(v == 0.0);
}

TEST_CASE("ccm correction is invariant under spatial shuffles of the map") {
  Rng rng(139);
  const int c = 3, h = 2, w = 2;
  CcmParams p = random_params(c, 3, 1, rng);
  FeatureMap x{random_tensor({c, h, w}, rng), View::street};
  FeatureMap out = ccm_forward(x, p);

  // Swap positions (0,0) and (1,1) in every channel; output must swap the same way.
  std::vector<double> shuffled = x.values.data();
  for (int ch = 0; ch < c; ++ch) {
    std::swap(shuffled[static_cast<std::size_t>(ch) * 4 + 0], shuffled[static_cast<std::size_t>(ch) * 4 + 3]);
  }
  FeatureMap xs{Tensor::from_data({c, h, w}, std::move(shuffled)), View::street};
  FeatureMap outs = ccm_forward(xs, p);
  for (int ch = 0; ch < c; ++ch) {
    CHECK(std::abs(outs.values.at(ch, 1, 1) - out.values.at(ch, 0, 0)) <= 1e-12);
    CHECK(std::abs(outs.values.at(ch, 0, 0) - out.values.at(ch, 1, 1)) <= 1e-12);
    CHECK(std::abs(outs.values.at(ch, 0, 1) - out.values.at(ch, 0, 1)) <= 1e-12);
  }
}

TEST_CASE("alpha-linearity of the injection is exact on dyadic inputs") {
  Rng rng(149);
  const int c = 4;
  CcmParams p = random_params(c, 3, 1, rng);
  for (Tensor* t : {&p.linear_weight, &p.linear_bias, &p.proj_weight, &p.proj_bias}) {
    *t = dyadic_tensor(t->shape(), rng);
  }
  p.conv_kernels[0] = dyadic_tensor({3}, rng);
  FeatureMap x{dyadic_tensor({c, 2, 2}, rng), View::satellite};

  auto run = [&](double alpha) {
    p.alpha = Tensor::scalar(alpha);
    return ccm_forward(x, p).values;
  };
  const double a = 0.25;
  Tensor at0 = run(0.0), at_a = run(a), at_2a = run(2 * a);
  for (std::size_t i = 0; i < at0.size(); ++i) {
    const double lhs = at_2a.data()[i] - at0.data()[i];
    const double rhs = 2.0 * (at_a.data()[i] - at0.data()[i]);
    CHECK(lhs == rhs);
  }
}

TEST_CASE("granularity > 1 components match a loop oracle") {
  Rng rng(151);
  const int c = 5, w = 3, d = 3;
  CcmParams p = random_params(c, w, d, rng);
  Tensor f = random_tensor({c}, rng);
  auto [fl, fh] = decouple_channels(f, p);
  REQUIRE(fl.shape() == Shape{c, d});
  REQUIRE(fh.shape() == Shape{c, d});
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < d; ++j) {
      double lin = p.linear_bias.at(i * d + j);
      for (int src = 0; src < c; ++src) lin += f.at(src) * p.linear_weight.at(src, i * d + j);
      CHECK(std::abs(fl.at(i, j) - lin) <= 1e-12);
      double conv = 0.0;
      for (int t = 0; t < w; ++t) {
        const int src = i + t - w / 2;
        if (src >= 0 && src < c) conv += f.at(src) * p.conv_kernels[static_cast<std::size_t>(j)].at(t);
      }
      CHECK(std::abs(fh.at(i, j) - conv) <= 1e-12);
    }
  }

  // Cross correlation with matrix components: f' = rowsum(Fh Fl^T + Fl Fh^T).
  Tensor fp = cross_calibrate(fl, fh);
  for (int i = 0; i < c; ++i) {
    double acc = 0.0;
    for (int j = 0; j < c; ++j) {
      double hf = 0.0, lf = 0.0;
      for (int t = 0; t < d; ++t) {
        hf += fh.at(i, t) * fl.at(j, t);
        lf += fl.at(i, t) * fh.at(j, t);
      }
      acc += hf + lf;
    }
    CHECK(std::abs(fp.at(i) - acc) <= 1e-12);
  }
}

TEST_CASE("fc mode computes the correction with a single affine map") {
  Rng rng(157);
  const int c = 4;
  CcmParams p = random_params(c, 3, 1, rng);
  FeatureMap x{random_tensor({c, 2, 2}, rng), View::street};
  FeatureMap out = ccm_fc_forward(x, p);

  Tensor pooled = global_channel_pool(x);
  std::vector<double> corr(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    double lin = p.linear_bias.at(i);
    for (int j = 0; j < c; ++j) lin += pooled.at(j) * p.linear_weight.at(j, i);
    corr[static_cast<std::size_t>(i)] = lin;
  }
  FeatureMap expected = inject_calibration(x, Tensor::from_data({c}, corr), p);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    CHECK(std::abs(out.values.data()[i] - expected.values.data()[i]) <= 1e-12);
  }

  CcmParams wide = random_params(c, 3, 2, rng);
  CHECK_THROWS_AS(ccm_fc_forward(x, wide), std::invalid_argument);
}

TEST_CASE("ccm parameter gradients pass finite differences on a 2x2x2 map") {
  Rng rng(163);
  const int c = 2;
  CcmParams p = random_params(c, 1, 1, rng);  // width 1 kernel (c=2 forbids 3)
  FeatureMap x{random_tensor({c, 2, 2}, rng), View::satellite};
  Tensor probe = random_tensor({c, 2, 2}, rng);

  auto forward = [&] { return sum_all(mul(ccm_forward(x, p).values, probe)); };

  std::vector<std::pair<const char*, Tensor>> params = {
      {"conv", p.conv_kernels[0]},   {"linear_weight", p.linear_weight}, {"linear_bias", p.linear_bias},
      {"proj_weight", p.proj_weight}, {"proj_bias", p.proj_bias},        {"alpha", p.alpha},
  };

  Tape tape;
  tape.backward(forward());
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
      CHECK(std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3}) <= 1e-4);
    }
  }
}
