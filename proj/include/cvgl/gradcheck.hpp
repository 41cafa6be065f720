#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cvgl/tensor.hpp"

namespace cvgl {

struct GradCheck {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 1e-4;
  std::string worst;  // "param[index]" of the largest deviation
  bool passed() const { return max_rel_error <= tolerance; }
};

/// Central-difference verification of d(loss)/d(param) for every element of
/// every listed parameter. make_loss must rebuild the same scalar from the
/// parameters' current values; the finite-difference side re-evaluates it
/// eagerly and never touches the tape being checked. Relative error uses a
/// 1e-3 floor in the denominator so near-zero gradients compare against the
/// scheme's own noise scale rather than against zero.
GradCheck check_gradients(const std::string& name,
                          const std::vector<std::pair<std::string, Tensor>>& params,
                          const std::function<Tensor()>& make_loss, double h = 1e-5,
                          double tolerance = 1e-4);

/// Named suites behind the `gradcheck` subcommand: "tensor", "sarm", "ccm",
/// "rgam", "loss", or "all".
std::vector<GradCheck> gradcheck_suite(const std::string& module);

}  // namespace cvgl
