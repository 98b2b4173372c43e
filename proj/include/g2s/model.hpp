#pragma once

#include <memory>
#include <string>
#include <vector>

#include "g2s/decoders.hpp"
#include "g2s/encoder.hpp"
#include "g2s/graph.hpp"
#include "g2s/vocab.hpp"

namespace g2s {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderKind decoder = DecoderKind::kLinear;
  std::size_t target_vocab = 0;
  std::size_t max_len = 5;  // decoded sequence length bound (I and T)
  bool teacher_forcing = false;

  void validate() const {
    encoder.validate();
    if (target_vocab < 4) throw ContractError("model: target vocabulary too small");
    if (max_len == 0) throw ContractError("model: max_len must be >= 1");
    if (teacher_forcing && decoder != DecoderKind::kLstm) {
      throw ContractError("model: teacher forcing applies to the lstm decoder only");
    }
  }
};

// Per-position target id columns for a batch: result[i][b] = id of word i in
// graph b, EOS-padded to max_len.
inline std::vector<ad::IdList> encode_target_columns(
    const std::vector<const ProgramGraph*>& graphs, const Vocabulary& vocab,
    std::size_t max_len) {
  std::vector<std::vector<std::int32_t>> cols(max_len,
                                              std::vector<std::int32_t>(graphs.size()));
  for (std::size_t b = 0; b < graphs.size(); ++b) {
    const auto ids = encode_target(graphs[b]->target, vocab, max_len);
    for (std::size_t i = 0; i < max_len; ++i) cols[i][b] = ids[i];
  }
  std::vector<ad::IdList> out;
  out.reserve(max_len);
  for (auto& c : cols) out.push_back(ad::make_ids(std::move(c)));
  return out;
}

template <typename T>
class Model {
 public:
  Model() = default;

  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    encoder_ = Encoder<T>(cfg_.encoder);
    const auto d = static_cast<std::size_t>(cfg_.encoder.hidden_dim);
    if (cfg_.decoder == DecoderKind::kLinear) {
      linear_ = LinearDecoder<T>(cfg_.target_vocab, d, cfg_.max_len);
    } else {
      lstm_ = LstmDecoder<T>(cfg_.target_vocab, d);
    }
  }

  const ModelConfig& config() const { return cfg_; }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    encoder_.init(rng);
    if (cfg_.decoder == DecoderKind::kLinear) {
      linear_.init(rng);
    } else {
      lstm_.init(rng);
    }
  }

  ad::ParamMap<T> params() const {
    ad::ParamMap<T> out;
    encoder_.collect_params(out, "enc.");
    if (cfg_.decoder == DecoderKind::kLinear) {
      linear_.collect_params(out, "dec.");
    } else {
      lstm_.collect_params(out, "dec.");
    }
    return out;
  }

  std::vector<ad::Tensor<T>> param_tensors() const {
    std::vector<ad::Tensor<T>> out;
    for (auto& [name, t] : params()) out.push_back(t);
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params()) n += t.size();
    return n;
  }

  void zero_grads() const {
    for (auto& [name, t] : params()) {
      ad::Tensor<T> copy = t;
      copy.zero_grad();
    }
  }

  LayerReps<T> encode(ad::Tape<T>* tape, const BatchedGraph& batch, Rng* rng,
                      bool training) const {
    return encoder_.encode(tape, batch, rng, training);
  }

  // Per-position probability matrices for a batch.
  std::vector<ad::Tensor<T>> forward(ad::Tape<T>* tape, const BatchedGraph& batch,
                                     const std::vector<ad::IdList>* target_cols, Rng* rng,
                                     bool training) const {
    const auto reps = encode(tape, batch, rng, training);
    if (cfg_.decoder == DecoderKind::kLinear) {
      return linear_.forward(tape, reps.aggregated);
    }
    return lstm_.forward(tape, reps, cfg_.max_len, target_cols,
                         cfg_.teacher_forcing && target_cols != nullptr);
  }

  DecodedSequence<T> decode_graph(const ProgramGraph& graph) const {
    const BatchedGraph batch = batch_graphs({&graph});
    const auto reps = encode(nullptr, batch, nullptr, false);
    if (cfg_.decoder == DecoderKind::kLinear) {
      return linear_.decode(reps.aggregated);
    }
    return lstm_.decode(reps, cfg_.max_len);
  }

  Encoder<T>& encoder() { return encoder_; }
  const Encoder<T>& encoder() const { return encoder_; }
  LinearDecoder<T>& linear_decoder() { return linear_; }
  LstmDecoder<T>& lstm_decoder() { return lstm_; }

 private:
  ModelConfig cfg_;
  Encoder<T> encoder_;
  LinearDecoder<T> linear_;
  LstmDecoder<T> lstm_;
};

}  // namespace g2s
