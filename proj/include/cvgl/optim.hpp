#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cvgl/tensor.hpp"

namespace cvgl {

struct OptimConfig {
  double lr = 1e-3;  // peak step size fed through the schedule
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Linear warm-up to the peak rate, then cosine decay to floor_lr.
struct CosineSchedule {
  double peak_lr = 1e-3;
  double floor_lr = 0.0;
  int warmup_steps = 0;
  int total_steps = 1;

  double lr_at(int step) const;
};

/// Adaptive-moment optimizer with decoupled weight decay. Parameters whose
/// gradient buffer is empty (never touched by the last backward) are left
/// alone entirely.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, OptimConfig cfg);

  void zero_grad();
  void step(double lr);

  int steps_taken() const { return t_; }

 private:
  struct Slot {
    std::string name;
    Tensor param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  OptimConfig cfg_;
  int t_ = 0;
};

}  // namespace cvgl
