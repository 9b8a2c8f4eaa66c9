#pragma once

#include <vector>

#include "htr/nn/params.hpp"

namespace htr::train {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with bias correction and decoupled weight decay:
///   p <- p * (1 - lr * wd);  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Only trainable registry entries are touched. Gradients are cleared after a step.
template <typename T>
class AdamW {
 public:
  AdamW(nn::ParamRegistry<T>& params, AdamWConfig cfg = {});

  /// Throws NumericError, leaving parameters and moments untouched, if any gradient
  /// is not finite.
  void step(double lr);

  std::size_t steps() const noexcept { return steps_; }
  const AdamWConfig& config() const noexcept { return cfg_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

 private:
  nn::ParamRegistry<T>& params_;
  AdamWConfig cfg_;
  std::vector<std::size_t> slots_;  // registry positions of trainable entries
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::size_t steps_ = 0;
};

/// Piecewise-constant learning rate: base * gamma^(milestones passed). Milestone
/// fraction f triggers at step floor(f * total_steps).
struct Schedule {
  std::size_t total_steps = 2000;
  double base_lr = 5e-4;
  std::vector<double> milestones{0.5, 0.75};
  double gamma = 0.1;

  double lr(std::size_t step) const;
};

/// Rescales gradients so their global L2 norm is at most `max_norm`; returns the norm
/// before clipping. max_norm <= 0 disables clipping.
template <typename T>
double clip_grad_norm(nn::ParamRegistry<T>& params, double max_norm);

}  // namespace htr::train
