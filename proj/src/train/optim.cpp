#include "htr/train/optim.hpp"

#include <cmath>

#include "htr/core/errors.hpp"

namespace htr::train {

template <typename T>
AdamW<T>::AdamW(nn::ParamRegistry<T>& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].trainable) continue;
    slots_.push_back(i);
    m_.push_back(Tensor<T>::zeros_like(params_[i].value));
    v_.push_back(Tensor<T>::zeros_like(params_[i].value));
  }
}

template <typename T>
void AdamW<T>::step(double lr) {
  for (auto i : slots_) {
    for (T g : params_[i].grad.data()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + params_[i].name);
    }
  }
  ++steps_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double decay = 1.0 - lr * cfg_.weight_decay;
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    auto& p = params_[slots_[s]];
    T* w = p.value.ptr();
    T* g = p.grad.ptr();
    T* m = m_[s].ptr();
    T* v = v_[s].ptr();
    const std::size_t n = p.value.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double gk = g[k];
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = (mk / c1) / (std::sqrt(vk / c2) + cfg_.eps);
      w[k] = static_cast<T>(static_cast<double>(w[k]) * decay - lr * update);
      g[k] = T{0};
    }
  }
}

double Schedule::lr(std::size_t step) const {
  double rate = base_lr;
  for (double f : milestones) {
    const auto at = static_cast<std::size_t>(std::floor(f * static_cast<double>(total_steps)));
    if (step >= at) rate *= gamma;
  }
  return rate;
}

template <typename T>
double clip_grad_norm(nn::ParamRegistry<T>& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    for (T g : params[i].grad.data()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto scale = static_cast<T>(max_norm / norm);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].trainable) continue;
      for (T& g : params[i].grad.data()) g *= scale;
    }
  }
  return norm;
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm(nn::ParamRegistry<float>&, double);
template double clip_grad_norm(nn::ParamRegistry<double>&, double);

}  // namespace htr::train
