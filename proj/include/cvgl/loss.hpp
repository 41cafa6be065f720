#pragma once

#include <vector>

#include "cvgl/rgam.hpp"

namespace cvgl {

struct LossConfig {
  double tau = 0.05;       // temperature
  bool symmetric = false;  // also average the satellite->street direction
};

/// -log( exp(q·r+/τ) / Σᵢ exp(q·rᵢ/τ) ) over the positive plus the remaining
/// references. All inputs must be unit vectors (deviation above 1e-6 is
/// rejected). Nonnegative; exactly zero when the positive is the only
/// reference.
Tensor info_nce(const Tensor& query, const std::vector<Tensor>& refs, int positive_index,
                const LossConfig& cfg);

/// In-batch objective: street query i scores against every satellite in the
/// batch with i as the positive; mean over queries, optionally averaged with
/// the reverse direction.
Tensor batch_info_nce(const std::vector<Descriptor>& street, const std::vector<Descriptor>& satellite,
                      const LossConfig& cfg);

}  // namespace cvgl
