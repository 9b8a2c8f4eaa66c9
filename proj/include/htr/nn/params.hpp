#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "htr/core/tensor.hpp"

namespace htr::nn {

enum class Mode { train, eval };

/// One named tensor of a model. Trainable parameters carry a gradient of the same
/// shape; buffers (batch-norm running statistics) do not.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
};

/// Ordered, name-unique registry. Entries are heap-allocated so references handed
/// to layers stay valid when the registry grows or is moved.
template <typename T>
class ParamRegistry {
 public:
  ParamRegistry() = default;
  ParamRegistry(const ParamRegistry&) = delete;
  ParamRegistry& operator=(const ParamRegistry&) = delete;
  ParamRegistry(ParamRegistry&&) noexcept = default;
  ParamRegistry& operator=(ParamRegistry&&) noexcept = default;

  Parameter<T>& add(const std::string& name, Shape shape, bool trainable = true) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->value = Tensor<T>(shape);
    if (trainable) p->grad = Tensor<T>(shape);
    p->trainable = trainable;
    index_[name] = items_.size();
    items_.push_back(std::move(p));
    return *items_.back();
  }

  Parameter<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return *items_[it->second];
  }
  const Parameter<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return *items_[it->second];
  }
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const noexcept { return items_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *items_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *items_[i]; }

  /// Number of trainable scalars.
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : items_) {
      if (p->trainable) n += p->value.size();
    }
    return n;
  }

  void zero_grad() {
    for (auto& p : items_) {
      if (p->trainable) p->grad.fill(T{0});
    }
  }

  /// Copies of every value (parameters and buffers), in registry order.
  std::vector<Tensor<T>> snapshot() const {
    std::vector<Tensor<T>> out;
    out.reserve(items_.size());
    for (const auto& p : items_) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Tensor<T>>& values) {
    if (values.size() != items_.size()) throw std::invalid_argument("snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].shape() != items_[i]->value.shape()) {
        throw ShapeError("snapshot shape mismatch for " + items_[i]->name);
      }
      items_[i]->value = values[i];
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> items_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace htr::nn
