#include "cvgl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cvgl {

double CosineSchedule::lr_at(int step) const {
  if (step < 0) throw std::invalid_argument("schedule: negative step");
  if (warmup_steps > 0 && step < warmup_steps) {
    return peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return peak_lr;
  const double t = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  const double pi = 3.14159265358979323846;
  return floor_lr + (peak_lr - floor_lr) * 0.5 * (1.0 + std::cos(pi * std::min(1.0, t)));
}

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, OptimConfig cfg) : cfg_(cfg) {
  if (cfg.lr < 0 || cfg.weight_decay < 0) throw std::invalid_argument("adamw: negative rate");
  slots_.reserve(params.size());
  for (auto& [name, t] : params) {
    if (!t.requires_grad()) continue;
    Slot slot;
    slot.name = name;
    slot.param = t;
    slot.m.assign(t.size(), 0.0);
    slot.v.assign(t.size(), 0.0);
    slots_.push_back(std::move(slot));
  }
}

void AdamW::zero_grad() {
  for (Slot& s : slots_) s.param.clear_grad();
}

void AdamW::step(double lr) {
  ++t_;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bias2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (Slot& s : slots_) {
    if (!s.param.has_grad()) continue;
    const auto& g = s.param.grad();
    std::vector<double> next = s.param.data();
    for (std::size_t i = 0; i < next.size(); ++i) {
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = s.m[i] / bias1;
      const double v_hat = s.v[i] / bias2;
      next[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * next[i]);
    }
    s.param.set_data(next);
  }
}

}  // namespace cvgl
