#pragma once

#include <string>
#include <vector>

#include "g2s/dataset.hpp"
#include "g2s/metrics.hpp"
#include "g2s/model.hpp"

namespace g2s {

struct ExampleScore {
  std::size_t index = 0;
  std::vector<std::string> decoded;  // raw decoded words, <UNK> retained
  double f1 = 0.0;
};

struct SplitEvaluation {
  double mean_f1 = 0.0;
  std::vector<ExampleScore> examples;
};

// Greedy-decodes every graph in the split and averages the per-graph F1.
template <typename T>
SplitEvaluation evaluate_split(const Model<T>& model, const Dataset& dataset,
                               const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("evaluate_split: empty split");
  SplitEvaluation out;
  out.examples.reserve(indices.size());
  double total = 0.0;
  for (const std::size_t idx : indices) {
    if (idx >= dataset.graphs.size()) {
      throw ContractError("evaluate_split: example index out of range");
    }
    const ProgramGraph& g = dataset.graphs[idx];
    const auto decoded = model.decode_graph(g);
    ExampleScore score;
    score.index = idx;
    for (const auto id : decoded.ids) {
      score.decoded.push_back(dataset.target_vocab.decode(id));
    }
    score.f1 = f1_score(score.decoded, g.target).f1;
    total += score.f1;
    out.examples.push_back(std::move(score));
  }
  out.mean_f1 = total / static_cast<double>(indices.size());
  return out;
}

}  // namespace g2s
