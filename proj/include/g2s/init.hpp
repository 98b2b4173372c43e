#pragma once

#include <cmath>

#include "g2s/common.hpp"
#include "g2s/tensor.hpp"

namespace g2s::ad {

// Glorot-uniform for affine maps, stored [in x out].
template <typename T>
Tensor<T> glorot_uniform(std::size_t in, std::size_t out, Rng& rng) {
  Tensor<T> w = Tensor<T>::zeros({in, out}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  return w;
}

// Embedding tables start from a narrow normal distribution.
template <typename T>
Tensor<T> normal_init(Shape shape, Rng& rng, double stddev = 0.02) {
  Tensor<T> w = Tensor<T>::zeros(std::move(shape), true);
  for (auto& v : w.values()) v = static_cast<T>(rng.normal(0.0, stddev));
  return w;
}

template <typename T>
Tensor<T> zeros_param(Shape shape) {
  return Tensor<T>::zeros(std::move(shape), true);
}

template <typename T>
Tensor<T> ones_param(Shape shape) {
  return Tensor<T>::full(std::move(shape), T(1), true);
}

template <typename T>
using ParamMap = std::vector<std::pair<std::string, Tensor<T>>>;

// Moves every parameter a little off its initial value. Finite-difference
// checks need this: zero-initialized biases park ReLU inputs exactly on the
// kink, where a central difference halves the true one-sided gradient.
template <typename T>
void jitter_params(ParamMap<T>& params, Rng& rng, double scale = 0.05) {
  for (auto& [name, tensor] : params) {
    for (auto& v : tensor.values()) v += static_cast<T>(rng.uniform(-scale, scale));
  }
}

}  // namespace g2s::ad
