#include "cvgl/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "cvgl/encoder.hpp"
#include "cvgl/loss.hpp"
#include "cvgl/ops.hpp"
#include "cvgl/rng.hpp"

namespace cvgl {

GradCheck check_gradients(const std::string& name,
                          const std::vector<std::pair<std::string, Tensor>>& params,
                          const std::function<Tensor()>& make_loss, double h, double tolerance) {
  GradCheck result;
  result.name = name;
  result.tolerance = tolerance;

  for (const auto& [pname, t] : params) {
    Tensor copy = t;
    copy.clear_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = make_loss();
    tape.backward(loss);
  }
  for (const auto& [pname, t] : params) {
    if (!t.has_grad()) {
      throw std::logic_error("gradcheck " + name + ": parameter '" + pname + "' received no gradient");
    }
    analytic.push_back(t.grad());
  }

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = params[pi].second;
    const std::vector<double> base = t.data();
    for (std::size_t e = 0; e < base.size(); ++e) {
      std::vector<double> bump = base;
      bump[e] = base[e] + h;
      t.set_data(bump);
      const double up = make_loss().value();
      bump[e] = base[e] - h;
      t.set_data(bump);
      const double down = make_loss().value();
      t.set_data(base);
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[pi][e];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = params[pi].first + "[" + std::to_string(e) + "]";
      }
    }
  }
  return result;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-1, 1);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor unit_vector(int dim, Rng& rng) {
  Tensor raw = random_tensor({dim}, rng);
  return l2_normalize(raw);
}

std::vector<GradCheck> tensor_suite() {
  Rng rng(20240601);
  std::vector<GradCheck> checks;

  struct Primitive {
    const char* name;
    std::function<Tensor(std::vector<Tensor>&)> forward;
    std::vector<Shape> shapes;
  };
  const std::vector<std::vector<int>> windows = {{0, 1}, {0, 1, 2}, {1, 2, 3}, {2, 3}};
  const std::vector<Primitive> primitives = {
      {"tensor.add", [](auto& in) { return add(in[0], in[1]); }, {{4, 4}, {4, 4}}},
      {"tensor.sub", [](auto& in) { return sub(in[0], in[1]); }, {{4, 4}, {4, 4}}},
      {"tensor.mul", [](auto& in) { return mul(in[0], in[1]); }, {{4, 4}, {4, 4}}},
      {"tensor.scale", [](auto& in) { return scale(in[0], 2.5); }, {{8}}},
      {"tensor.mul_scalar", [](auto& in) { return mul_scalar(in[0], in[1]); }, {{6}, {1}}},
      {"tensor.add_row_vector", [](auto& in) { return add_row_vector(in[0], in[1]); }, {{4, 3}, {3}}},
      {"tensor.matmul", [](auto& in) { return matmul(in[0], in[1]); }, {{4, 3}, {3, 5}}},
      {"tensor.transpose", [](auto& in) { return transpose(in[0]); }, {{3, 5}}},
      {"tensor.reshape", [](auto& in) { return reshape(in[0], {2, 6}); }, {{3, 4}}},
      {"tensor.softmax_rows", [](auto& in) { return softmax_rows(in[0]); }, {{4, 5}}},
      {"tensor.sigmoid", [](auto& in) { return sigmoid(in[0]); }, {{4, 4}}},
      {"tensor.conv1d_channels", [](auto& in) { return conv1d_channels(in[0], in[1]); }, {{8}, {3}}},
      {"tensor.avg_pool_region",
       [](auto& in) { return avg_pool_region(in[0], Region{1, 0, 2, 3}); },
       {{3, 4, 4}}},
      {"tensor.sum_all", [](auto& in) { return sum_all(in[0]); }, {{4, 4}}},
      {"tensor.dot", [](auto& in) { return dot(in[0], in[1]); }, {{7}, {7}}},
      {"tensor.concat", [](auto& in) { return concat({in[0], in[1]}); }, {{4}, {5}}},
      {"tensor.concat_cols", [](auto& in) { return concat_cols(in[0], in[1]); }, {{3, 2}, {3, 3}}},
      {"tensor.logsumexp", [](auto& in) { return logsumexp(in[0]); }, {{9}}},
      {"tensor.select", [](auto& in) { return select(in[0], 3); }, {{6}}},
      {"tensor.l2_normalize", [](auto& in) { return l2_normalize(in[0]); }, {{6}}},
      {"tensor.windowed_attention",
       [&windows](auto& in) { return windowed_attention(in[0], in[1], in[2], windows, 0.7); },
       {{4, 3}, {4, 3}, {4, 3}}},
      {"tensor.extract_patches", [](auto& in) { return extract_patches(in[0], 2); }, {{3, 4, 4}}},
  };

  for (const Primitive& prim : primitives) {
    std::vector<Tensor> inputs;
    std::vector<std::pair<std::string, Tensor>> params;
    for (std::size_t i = 0; i < prim.shapes.size(); ++i) {
      inputs.push_back(random_tensor(prim.shapes[i], rng, true));
      params.emplace_back("input" + std::to_string(i), inputs.back());
    }
    Tensor probe;
    {
      Tensor sample = prim.forward(inputs);
      probe = random_tensor(sample.shape(), rng);
    }
    auto make_loss = [&prim, inputs, probe]() mutable { return sum_all(mul(prim.forward(inputs), probe)); };
    checks.push_back(check_gradients(prim.name, params, make_loss));
  }
  return checks;
}

std::vector<std::pair<std::string, Tensor>> sarm_param_list(const SarmParams& p) {
  return {
      {"query_global", p.query_global}, {"key_global", p.key_global}, {"value_global", p.value_global},
      {"query_local", p.query_local},   {"key_local", p.key_local},   {"value_local", p.value_local},
      {"gate_weight", p.gate_weight},   {"gate_bias", p.gate_bias},
  };
}

std::vector<std::pair<std::string, Tensor>> ccm_param_list(const CcmParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t j = 0; j < p.conv_kernels.size(); ++j) {
    out.emplace_back("conv." + std::to_string(j), p.conv_kernels[j]);
  }
  out.emplace_back("linear_weight", p.linear_weight);
  out.emplace_back("linear_bias", p.linear_bias);
  out.emplace_back("proj_weight", p.proj_weight);
  out.emplace_back("proj_bias", p.proj_bias);
  out.emplace_back("alpha", p.alpha);
  return out;
}

std::vector<GradCheck> sarm_suite() {
  Rng rng(20240602);
  std::vector<GradCheck> checks;
  struct Case {
    const char* name;
    int channels, h, w, window;
  };
  for (const Case& c : {Case{"sarm.2x3x3", 2, 3, 3, 3}, Case{"sarm.4x4x4", 4, 4, 4, 3}}) {
    SarmParams p = SarmParams::init(c.channels, c.window, rng.next_u64(), "gc.sarm");
    // Check at a generic point rather than at the zero-initialized one.
    p.gate_bias = random_tensor({c.channels}, rng, true);
    FeatureMap x{random_tensor({c.channels, c.h, c.w}, rng), View::street};
    Tensor probe = random_tensor({c.channels, c.h, c.w}, rng);
    auto make_loss = [p, x, probe]() { return sum_all(mul(sarm_forward(x, p).values, probe)); };
    checks.push_back(check_gradients(c.name, sarm_param_list(p), make_loss));
  }
  return checks;
}

std::vector<GradCheck> ccm_suite() {
  Rng rng(20240603);
  std::vector<GradCheck> checks;
  {
    CcmParams p = CcmParams::init(4, 3, 1, rng.next_u64(), "gc.ccm");
    p.linear_bias = random_tensor({4}, rng, true);
    p.proj_bias = random_tensor({4}, rng, true);
    p.alpha = Tensor::scalar(0.3, true);
    FeatureMap x{random_tensor({4, 2, 2}, rng), View::satellite};
    Tensor probe = random_tensor({4, 2, 2}, rng);
    auto make_loss = [p, x, probe]() { return sum_all(mul(ccm_forward(x, p).values, probe)); };
    checks.push_back(check_gradients("ccm.4x2x2", ccm_param_list(p), make_loss));
  }
  {
    CcmParams p = CcmParams::init(4, 3, 2, rng.next_u64(), "gc.ccm_variant");
    p.linear_bias = random_tensor({8}, rng, true);
    p.proj_bias = random_tensor({4}, rng, true);
    p.alpha = Tensor::scalar(-0.4, true);
    FeatureMap x{random_tensor({4, 4, 4}, rng), View::satellite};
    Tensor probe = random_tensor({4, 4, 4}, rng);
    auto make_loss = [p, x, probe]() { return sum_all(mul(ccm_forward(x, p).values, probe)); };
    checks.push_back(check_gradients("ccm.variant.4x4x4", ccm_param_list(p), make_loss));
  }
  return checks;
}

std::vector<GradCheck> rgam_suite() {
  Rng rng(20240604);
  std::vector<GradCheck> checks;
  Tensor map = random_tensor({4, 4, 4}, rng, true);
  Tensor probe = random_tensor({16}, rng);
  auto make_loss = [map, probe]() {
    Descriptor d = build_descriptor(FeatureMap{map, View::satellite}, GridSpec{2, 2}, true);
    return sum_all(mul(d.values, probe));
  };
  checks.push_back(check_gradients("rgam.descriptor.4x4x4", {{"map", map}}, make_loss));
  return checks;
}

std::vector<GradCheck> loss_suite() {
  Rng rng(20240605);
  std::vector<GradCheck> checks;
  {
    const int dim = 8;
    Tensor query_raw = random_tensor({dim}, rng, true);
    std::vector<Tensor> ref_raws;
    for (int i = 0; i < 4; ++i) ref_raws.push_back(random_tensor({dim}, rng, true));
    LossConfig cfg{0.2, false};
    auto make_loss = [query_raw, ref_raws, cfg]() {
      std::vector<Tensor> refs;
      for (const Tensor& r : ref_raws) refs.push_back(l2_normalize(r));
      return info_nce(l2_normalize(query_raw), refs, 1, cfg);
    };
    std::vector<std::pair<std::string, Tensor>> params = {{"query", query_raw}};
    for (std::size_t i = 0; i < ref_raws.size(); ++i) {
      params.emplace_back("ref" + std::to_string(i), ref_raws[i]);
    }
    checks.push_back(check_gradients("loss.info_nce", params, make_loss));
  }
  {
    // End to end: every encoder parameter through the contrastive objective,
    // on 4x4x4 feature maps.
    EncoderConfig cfg;
    cfg.channels = 4;
    cfg.patch = 2;
    cfg.blocks = 1;
    cfg.window = 3;
    cfg.ccm_kernel = 3;
    EncoderParams params = EncoderParams::init(cfg, 20240606);
    // Generic point: alpha = 0 would zero out the calibration branch and its
    // upstream gradients.
    Rng prng(20240607);
    params.patch_bias = random_tensor({4}, prng, true);
    for (BlockParams& b : params.blocks) {
      b.sarm.gate_bias = random_tensor({4}, prng, true);
      b.ccm.linear_bias = random_tensor({4}, prng, true);
      b.ccm.proj_bias = random_tensor({4}, prng, true);
      b.ccm.alpha = Tensor::scalar(0.2, true);
    }
    const SceneConfig scene{8, 16, 8, 8};
    ScenePair a = generate_pair(11, 0, scene);
    ScenePair b = generate_pair(11, 1, scene);
    LossConfig loss_cfg{0.1, true};
    auto make_loss = [cfg, params, a, b, loss_cfg]() {
      std::vector<Descriptor> street = {encode(a.street, cfg, params), encode(b.street, cfg, params)};
      std::vector<Descriptor> satellite = {encode(a.satellite, cfg, params), encode(b.satellite, cfg, params)};
      return batch_info_nce(street, satellite, loss_cfg);
    };
    checks.push_back(check_gradients("loss.encoder_end_to_end", named_params(params), make_loss));
  }
  return checks;
}

}  // namespace

std::vector<GradCheck> gradcheck_suite(const std::string& module) {
  if (module == "tensor") return tensor_suite();
  if (module == "sarm") return sarm_suite();
  if (module == "ccm") return ccm_suite();
  if (module == "rgam") return rgam_suite();
  if (module == "loss") return loss_suite();
  if (module == "all") {
    std::vector<GradCheck> all;
    for (const char* m : {"tensor", "sarm", "ccm", "rgam", "loss"}) {
      auto part = gradcheck_suite(m);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  throw std::invalid_argument("unknown gradcheck module '" + module +
                              "' (expected all|tensor|sarm|ccm|rgam|loss)");
}

}  // namespace cvgl
