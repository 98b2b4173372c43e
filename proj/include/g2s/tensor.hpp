#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "g2s/common.hpp"

namespace g2s::ad {

// Dense rank-1 or rank-2 shapes are all the model needs.
using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Shared-buffer handle. Copying a Tensor aliases the same values and
// gradient, which is what the tape relies on.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->values.assign(shape_numel(t.impl_->shape), T(0));
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.impl_->values.begin(), t.impl_->values.end(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("Tensor::from: shape " + shape_str(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
    }
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->values = std::move(values);
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool valid() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->values.size(); }

  std::size_t rows() const { return impl_->shape.size() == 2 ? impl_->shape[0] : 1; }
  std::size_t cols() const {
    return impl_->shape.empty() ? 1 : impl_->shape[impl_->shape.size() - 1];
  }

  std::span<T> values() { return impl_->values; }
  std::span<const T> values() const { return impl_->values; }

  T& at(std::size_t i) { return impl_->values[i]; }
  T at(std::size_t i) const { return impl_->values[i]; }
  T& at(std::size_t r, std::size_t c) { return impl_->values[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const { return impl_->values[r * cols() + c]; }

  T item() const {
    if (size() != 1) {
      throw ContractError("Tensor::item: tensor has " + std::to_string(size()) + " elements");
    }
    return impl_->values[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  bool has_grad() const { return !impl_->grad.empty(); }

  std::span<T> grad() {
    ensure_grad();
    return impl_->grad;
  }
  std::span<const T> grad() const {
    if (!has_grad()) throw ContractError("Tensor::grad: gradient not populated");
    return impl_->grad;
  }

  void ensure_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), T(0));
  }

  void zero_grad() { impl_->grad.assign(impl_->values.size(), T(0)); }
  void drop_grad() { impl_->grad.clear(); }

  // Identity of the underlying buffer, used by the tape.
  std::uintptr_t id() const { return reinterpret_cast<std::uintptr_t>(impl_.get()); }
  bool same_buffer(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty means absent
    bool requires_grad = false;
  };

  std::shared_ptr<Impl> impl_;
};

}  // namespace g2s::ad
