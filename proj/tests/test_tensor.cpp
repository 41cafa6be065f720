#include <cmath>
#include <stdexcept>
#include <vector>

#include "cvgl/ops.hpp"
#include "cvgl/rng.hpp"
#include "cvgl/tensor.hpp"
#include "doctest.h"

using namespace cvgl;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false, double lo = -1.0, double hi = 1.0) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Independent scalar triple loop, no Eigen.
std::vector<double> matmul_oracle(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += a.at(i, t) * b.at(t, j);
      out[static_cast<std::size_t>(i) * n + j] = acc;
    }
  return out;
}

// Central-difference gradient of loss() w.r.t. every element of x.
std::vector<double> fd_gradient(Tensor& x, const std::function<double()>& loss, double h = 1e-5) {
  std::vector<double> g(x.size());
  std::vector<double> base = x.data();
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> bumped = base;
    bumped[i] = base[i] + h;
    x.set_data(bumped);
    const double up = loss();
    bumped[i] = base[i] - h;
    x.set_data(bumped);
    const double down = loss();
    g[i] = (up - down) / (2.0 * h);
  }
  x.set_data(base);
  return g;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-3) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("matmul identity and column selection") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor r = matmul(eye, m);
  CHECK(r.data() == std::vector<double>{1, 2, 3, 4});

  Tensor col = Tensor::from_data({2, 1}, {0, 1});
  Tensor picked = matmul(m, col);
  CHECK(picked.shape() == Shape{2, 1});
  CHECK(picked.at(0, 0) == 2);
  CHECK(picked.at(1, 0) == 4);
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(101);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor r = matmul(a, b);
  const auto expected = matmul_oracle(a, b);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(std::abs(r.data()[i] - expected[i]) <= 1e-12);
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("softmax_rows closed forms") {
  Tensor x = Tensor::from_data({3, 2}, {0, 0, 0, std::log(3.0), 1000, 0});
  Tensor y = softmax_rows(x);
  CHECK(y.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.at(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(y.at(1, 1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(std::abs(y.at(2, 0) - 1.0) <= 1e-9);
  CHECK(std::abs(y.at(2, 1) - 0.0) <= 1e-9);
}

TEST_CASE("softmax_rows rows sum to one and shift invariance") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({4, 5}, rng, false, -10, 10);
    Tensor y = softmax_rows(x);
    for (int i = 0; i < 4; ++i) {
      double s = 0.0;
      for (int j = 0; j < 5; ++j) s += y.at(i, j);
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    // Adding a per-row constant must not change the distribution.
    std::vector<double> shifted = x.data();
    const double c = rng.uniform(-5, 5);
    for (double& v : shifted) v += c;
    Tensor y2 = softmax_rows(Tensor::from_data(x.shape(), shifted));
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y.data()[i] - y2.data()[i]) <= 1e-9);
  }
}

TEST_CASE("sigmoid values and saturation") {
  Tensor x = Tensor::from_data({2}, {0.0, 1e9});
  Tensor y = sigmoid(x);
  CHECK(y.at(0) == 0.5);
  CHECK(std::abs(y.at(1) - 1.0) <= 1e-12);
}

TEST_CASE("sigmoid gradient at zero is 0.25 by central differences") {
  Tensor x = Tensor::scalar(0.0, true);
  double fd;
  {
    const double h = 1e-6;
    auto f = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    fd = (f(h) - f(-h)) / (2.0 * h);
  }
  Tape tape;
  Tensor loss = sum_all(sigmoid(x));
  tape.backward(loss);
  CHECK(std::abs(x.grad()[0] - 0.25) <= 1e-9);
  CHECK(std::abs(fd - 0.25) <= 1e-9);
}

TEST_CASE("conv1d_channels identity and hand-unrolled window") {
  Tensor f = Tensor::from_data({3}, {1, 2, 3});
  Tensor ident = Tensor::from_data({3}, {0, 1, 0});
  Tensor same = conv1d_channels(f, ident);
  CHECK(same.data() == std::vector<double>{1, 2, 3});

  Tensor box = Tensor::from_data({3}, {1, 1, 1});
  Tensor out = conv1d_channels(f, box);
  CHECK(out.at(0) == 3);
  CHECK(out.at(1) == 6);
  CHECK(out.at(2) == 5);
}

TEST_CASE("conv1d_channels rejects even kernels") {
  Tensor f = Tensor::zeros({4});
  CHECK_THROWS_AS(conv1d_channels(f, Tensor::zeros({2})), std::invalid_argument);
}

TEST_CASE("conv1d_channels kernel gradient matches finite differences") {
  Rng rng(11);
  Tensor f = random_tensor({6}, rng);
  Tensor kernel = random_tensor({3}, rng, true);
  Tensor probe = random_tensor({6}, rng);
  auto loss_value = [&] { return sum_all(mul(conv1d_channels(f, kernel), probe)).value(); };
  const auto fd = fd_gradient(kernel, loss_value, 1e-6);
  Tape tape;
  Tensor loss = sum_all(mul(conv1d_channels(f, kernel), probe));
  tape.backward(loss);
  CHECK(max_rel_err(kernel.grad(), fd) <= 1e-6);
}

TEST_CASE("avg_pool_region constants and forced mean") {
  Tensor constant = Tensor::full({3, 4, 4}, 2.5);
  Tensor pooled = avg_pool_region(constant, Region{0, 0, 4, 4});
  for (int c = 0; c < 3; ++c) CHECK(pooled.at(c) == 2.5);

  Tensor tiny = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  CHECK(avg_pool_region(tiny, Region{0, 0, 2, 2}).at(0) == 2.5);
}

TEST_CASE("avg_pool_region matches loop oracle on random maps") {
  Rng rng(13);
  Tensor x = random_tensor({3, 5, 7}, rng);
  Region region{1, 2, 3, 4};
  Tensor pooled = avg_pool_region(x, region);
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    int count = 0;
    for (int i = region.row; i < region.row + region.height; ++i)
      for (int j = region.col; j < region.col + region.width; ++j) {
        acc += x.at(c, i, j);
        ++count;
      }
    CHECK(std::abs(pooled.at(c) - acc / count) <= 1e-12);
  }
}

TEST_CASE("avg_pool_region rejects empty and out-of-bounds regions") {
  Tensor x = Tensor::zeros({1, 3, 3});
  CHECK_THROWS_AS(avg_pool_region(x, Region{0, 0, 0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(avg_pool_region(x, Region{2, 2, 2, 2}), std::invalid_argument);
}

TEST_CASE("backward of sum gives all-ones; of x*x gives 2x") {
  Rng rng(17);
  Tensor x = random_tensor({2, 3}, rng, true);
  {
    Tape tape;
    tape.backward(sum_all(x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  x.clear_grad();
  {
    Tape tape;
    tape.backward(sum_all(mul(x, x)));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward rejects non-scalar loss and foreign tensors") {
  Tensor x = Tensor::zeros({2, 2}, true);
  Tape tape;
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  Tensor stray = Tensor::scalar(1.0);
  CHECK_THROWS_AS(tape.backward(stray), std::invalid_argument);
}

TEST_CASE("fan-out DAG gradients equal duplicate-node tree gradients") {
  Rng rng(19);
  Tensor x = random_tensor({5}, rng, true);
  Tensor x2 = Tensor::from_data(x.shape(), x.data(), true);

  {
    Tape tape;
    Tensor shared = sigmoid(x);  // used twice below
    tape.backward(sum_all(mul(shared, shared)));
  }
  {
    Tape tape;
    tape.backward(sum_all(mul(sigmoid(x2), sigmoid(x2))));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(x2.grad()[i]).epsilon(1e-14));
  }
}

TEST_CASE("gradient accumulation is additive across separate uses") {
  Tensor x = Tensor::from_data({2}, {3, 4}, true);
  Tape tape;
  Tensor loss = add(sum_all(x), sum_all(mul(x, x)));
  tape.backward(loss);
  CHECK(x.grad()[0] == 1 + 6);
  CHECK(x.grad()[1] == 1 + 8);
}

TEST_CASE("every primitive passes a finite-difference gradient check") {
  Rng rng(23);

  struct Case {
    const char* name;
    std::function<Tensor(std::vector<Tensor>&)> forward;
    std::vector<Shape> shapes;
  };

  const std::vector<std::vector<int>> windows_3 = {{0, 1}, {0, 1, 2}, {1, 2}};

  std::vector<Case> cases = {
      {"add", [](auto& in) { return add(in[0], in[1]); }, {{3, 4}, {3, 4}}},
      {"sub", [](auto& in) { return sub(in[0], in[1]); }, {{3, 4}, {3, 4}}},
      {"mul", [](auto& in) { return mul(in[0], in[1]); }, {{3, 4}, {3, 4}}},
      {"scale", [](auto& in) { return scale(in[0], -1.7); }, {{5}}},
      {"mul_scalar", [](auto& in) { return mul_scalar(in[0], in[1]); }, {{4}, {1}}},
      {"add_row_vector", [](auto& in) { return add_row_vector(in[0], in[1]); }, {{3, 4}, {4}}},
      {"matmul", [](auto& in) { return matmul(in[0], in[1]); }, {{3, 4}, {4, 2}}},
      {"transpose", [](auto& in) { return transpose(in[0]); }, {{3, 4}}},
      {"reshape", [](auto& in) { return reshape(in[0], {6, 2}); }, {{3, 4}}},
      {"softmax_rows", [](auto& in) { return softmax_rows(in[0]); }, {{3, 4}}},
      {"sigmoid", [](auto& in) { return sigmoid(in[0]); }, {{3, 4}}},
      {"conv1d_channels", [](auto& in) { return conv1d_channels(in[0], in[1]); }, {{7}, {3}}},
      {"avg_pool_region", [](auto& in) { return avg_pool_region(in[0], Region{0, 1, 2, 2}); }, {{2, 3, 3}}},
      {"sum_all", [](auto& in) { return sum_all(in[0]); }, {{3, 4}}},
      {"dot", [](auto& in) { return dot(in[0], in[1]); }, {{5}, {5}}},
      {"concat", [](auto& in) { return concat({in[0], in[1]}); }, {{3}, {4}}},
      {"concat_cols", [](auto& in) { return concat_cols(in[0], in[1]); }, {{3, 2}, {3, 4}}},
      {"logsumexp", [](auto& in) { return logsumexp(in[0]); }, {{6}}},
      {"select", [](auto& in) { return select(in[0], 2); }, {{5}}},
      {"l2_normalize", [](auto& in) { return l2_normalize(in[0]); }, {{5}}},
      {"windowed_attention",
       [&windows_3](auto& in) { return windowed_attention(in[0], in[1], in[2], windows_3, 0.5); },
       {{3, 2}, {3, 2}, {3, 2}}},
      {"extract_patches", [](auto& in) { return extract_patches(in[0], 2); }, {{2, 4, 4}}},
  };

  for (auto& c : cases) {
    CAPTURE(c.name);
    std::vector<Tensor> inputs;
    for (const Shape& s : c.shapes) inputs.push_back(random_tensor(s, rng, true));
    Tensor out_probe;
    {
      Tensor sample = c.forward(inputs);
      out_probe = random_tensor(sample.shape(), rng);
    }
    auto loss_value = [&] { return sum_all(mul(c.forward(inputs), out_probe)).value(); };

    for (auto& input : inputs) input.clear_grad();
    Tape tape;
    Tensor loss = sum_all(mul(c.forward(inputs), out_probe));
    tape.backward(loss);

    for (std::size_t i = 0; i < inputs.size(); ++i) {
      CAPTURE(i);
      const auto fd = fd_gradient(inputs[i], loss_value);
      REQUIRE(inputs[i].has_grad());
      CHECK(max_rel_err(inputs[i].grad(), fd) <= 1e-4);
    }
  }
}

TEST_CASE("operations never mutate their inputs") {
  Rng rng(29);
  Tensor a = random_tensor({3, 3}, rng, true);
  Tensor b = random_tensor({3, 3}, rng, true);
  const auto a0 = a.data();
  const auto b0 = b.data();
  Tape tape;
  Tensor r = matmul(softmax_rows(add(a, b)), transpose(mul(a, b)));
  tape.backward(sum_all(r));
  CHECK(a.data() == a0);
  CHECK(b.data() == b0);
}

TEST_CASE("non-finite values are rejected, not propagated") {
  CHECK_THROWS_AS(Tensor::from_data({2}, {1.0, std::nan("")}), std::domain_error);
  CHECK_THROWS_AS(Tensor::scalar(std::numeric_limits<double>::infinity()), std::domain_error);
  Tensor x = Tensor::from_data({1}, {1e308});
  CHECK_THROWS_AS(add(x, x), std::domain_error);  // overflow surfaces as an error
}

TEST_CASE("ops outside a tape do not record") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor y = mul(x, x);  // no active tape
  CHECK(y.node()->tape == nullptr);
  Tape tape;
  Tensor z = mul(x, x);
  CHECK(z.node()->tape == &tape);
  Tensor w = mul(y, y);  // inputs not tracked on this tape but leaf flag pulls it in?
  CHECK(w.node()->tape == nullptr);  // y is not a leaf and was produced off-tape
}

TEST_CASE("tape refuses a second backward") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tape tape;
  Tensor loss = sum_all(x);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("glorot init is deterministic per seed and bounded") {
  Tensor a = Tensor::glorot_uniform({4, 4}, 4, 4, derive_seed(7, "w"));
  Tensor b = Tensor::glorot_uniform({4, 4}, 4, 4, derive_seed(7, "w"));
  Tensor c = Tensor::glorot_uniform({4, 4}, 4, 4, derive_seed(8, "w"));
  CHECK(a.data() == b.data());
  CHECK(a.data() != c.data());
  const double bound = std::sqrt(6.0 / 8.0);
  for (double v : a.data()) CHECK(std::abs(v) <= bound);
}
