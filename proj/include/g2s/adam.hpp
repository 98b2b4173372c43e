#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "g2s/tensor.hpp"

namespace g2s::ad {

// Adam with bias correction. First/second moment buffers are kept per
// parameter in registration order.
template <typename T>
struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  void init(std::span<const Tensor<T>> params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.size(), T(0));
      v.emplace_back(p.size(), T(0));
    }
    t = 0;
  }
};

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: state does not match parameter list");
  }
  state.t += 1;
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T bc1 = T(1) - static_cast<T>(std::pow(state.beta1, static_cast<double>(state.t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(state.beta2, static_cast<double>(state.t)));
  const T lr = static_cast<T>(state.lr);
  const T eps = static_cast<T>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i];
    if (!p.has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.m[i].size() != p.size()) {
      throw ContractError("adam_step: moment shape mismatch at parameter " +
                          std::to_string(i));
    }
    auto pv = p.values();
    auto gv = p.grad();
    T* mi = state.m[i].data();
    T* vi = state.v[i].data();
    for (std::size_t j = 0; j < pv.size(); ++j) {
      const T g = gv[j];
      mi[j] = b1 * mi[j] + (T(1) - b1) * g;
      vi[j] = b2 * vi[j] + (T(1) - b2) * g * g;
      const T mhat = mi[j] / bc1;
      const T vhat = vi[j] / bc2;
      pv[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace g2s::ad
