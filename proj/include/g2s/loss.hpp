#pragma once

#include <vector>

#include "g2s/autodiff.hpp"

namespace g2s {

template <typename T>
struct SequenceLoss {
  ad::Tensor<T> value;       // scalar
  std::size_t clamped = 0;   // probabilities lifted to the floor
};

// Mean over batch and positions of -log p(target word). Every position
// contributes, including the EOS padding; zero probabilities are clamped at
// `floor` and counted.
template <typename T>
SequenceLoss<T> sequence_loss(ad::Tape<T>* tape, const std::vector<ad::Tensor<T>>& probs,
                              const std::vector<ad::IdList>& target_cols,
                              T floor = T(1e-12)) {
  if (probs.empty()) throw ContractError("sequence_loss: no probability matrices");
  if (probs.size() != target_cols.size()) {
    throw ContractError("sequence_loss: positions and target columns disagree");
  }
  const std::size_t batch = probs[0].rows();
  SequenceLoss<T> out;
  ad::Tensor<T> total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].rows() != batch) {
      throw ContractError("sequence_loss: inconsistent batch size across positions");
    }
    auto picked = ad::pick(tape, probs[i], target_cols[i]);
    for (const T v : picked.values()) {
      if (v < floor) ++out.clamped;
    }
    auto log_p = ad::log_op(tape, ad::clamp_min(tape, picked, floor));
    auto step_sum = ad::sum_all(tape, log_p);
    total = i == 0 ? step_sum : ad::add(tape, total, step_sum);
  }
  const T scale = T(-1) / static_cast<T>(batch * probs.size());
  out.value = ad::mul(tape, total, ad::Tensor<T>::scalar(scale));
  return out;
}

}  // namespace g2s
