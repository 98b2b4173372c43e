#pragma once

#include <string>
#include <vector>

#include "g2s/autodiff.hpp"
#include "g2s/encoder.hpp"
#include "g2s/init.hpp"
#include "g2s/vocab.hpp"

namespace g2s {

enum class DecoderKind { kLinear, kLstm };

inline const char* decoder_name(DecoderKind kind) {
  return kind == DecoderKind::kLinear ? "linear" : "lstm";
}

// Greedy decoding output. SOS is never selected and the first EOS truncates
// the sequence, so neither appears in ids.
template <typename T>
struct DecodedSequence {
  std::vector<std::int32_t> ids;
  std::vector<std::vector<T>> step_probs;  // one distribution per executed step
  std::size_t steps = 0;
};

namespace detail {

// Argmax over the vocabulary with SOS excluded; ties go to the lowest id.
template <typename T>
std::int32_t greedy_pick(std::span<const T> row) {
  std::int32_t best = Vocabulary::kUnk;
  for (std::size_t j = static_cast<std::size_t>(Vocabulary::kUnk) + 1; j < row.size(); ++j) {
    if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<std::int32_t>(j);
  }
  return best;
}

}  // namespace detail

// One independent softmax classifier per output position, all reading the
// aggregated graph vector.
template <typename T>
class LinearDecoder {
 public:
  LinearDecoder() = default;
  LinearDecoder(std::size_t vocab, std::size_t hidden, std::size_t positions)
      : vocab_(vocab), hidden_(hidden), positions_(positions) {}

  void init(Rng& rng) {
    emb_.clear();
    bias_.clear();
    for (std::size_t i = 0; i < positions_; ++i) {
      emb_.push_back(ad::normal_init<T>({vocab_, hidden_}, rng));
      bias_.push_back(ad::zeros_param<T>({vocab_}));
    }
  }

  void collect_params(ad::ParamMap<T>& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < positions_; ++i) {
      out.emplace_back(prefix + "pos" + std::to_string(i) + ".emb", emb_[i]);
      out.emplace_back(prefix + "pos" + std::to_string(i) + ".bias", bias_[i]);
    }
  }

  // I probability matrices [B x V].
  std::vector<ad::Tensor<T>> forward(ad::Tape<T>* tape, const ad::Tensor<T>& h_g) const {
    if (h_g.cols() != hidden_) {
      throw ContractError("linear decoder: graph vector width " +
                          std::to_string(h_g.cols()) + " does not match " +
                          std::to_string(hidden_));
    }
    std::vector<ad::Tensor<T>> probs;
    probs.reserve(positions_);
    for (std::size_t i = 0; i < positions_; ++i) {
      auto logits = ad::add(tape, ad::matmul(tape, h_g, emb_[i], false, true), bias_[i]);
      probs.push_back(ad::softmax(tape, logits, 1));
    }
    return probs;
  }

  DecodedSequence<T> decode(const ad::Tensor<T>& h_g_single) const {
    const auto probs = forward(nullptr, h_g_single);
    DecodedSequence<T> out;
    out.steps = positions_;
    for (const auto& p : probs) {
      out.step_probs.emplace_back(p.values().begin(), p.values().end());
    }
    for (const auto& p : probs) {
      const std::int32_t id = detail::greedy_pick<T>(p.values());
      if (id == Vocabulary::kEos) break;  // everything after the first EOS is ignored
      out.ids.push_back(id);
    }
    return out;
  }

  std::size_t positions() const { return positions_; }

 private:
  std::size_t vocab_ = 0;
  std::size_t hidden_ = 0;
  std::size_t positions_ = 0;
  std::vector<ad::Tensor<T>> emb_;
  std::vector<ad::Tensor<T>> bias_;
};

// LSTM decoder with attention over the pooled layer vectors plus the
// aggregate. The recurrent input is the previous step's output vector; the
// first step consumes the SOS embedding. State and memory start at h_G.
template <typename T>
class LstmDecoder {
 public:
  LstmDecoder() = default;
  LstmDecoder(std::size_t vocab, std::size_t hidden) : vocab_(vocab), hidden_(hidden) {}

  void init(Rng& rng) {
    emb_ = ad::normal_init<T>({vocab_, hidden_}, rng);
    w_ih_ = ad::glorot_uniform<T>(hidden_, 4 * hidden_, rng);
    w_hh_ = ad::glorot_uniform<T>(hidden_, 4 * hidden_, rng);
    b_ = ad::zeros_param<T>({4 * hidden_});
    w_dec_ = ad::glorot_uniform<T>(2 * hidden_, hidden_, rng);
    b_dec_ = ad::zeros_param<T>({hidden_});
    ln_gamma_ = ad::ones_param<T>({hidden_});
    ln_beta_ = ad::zeros_param<T>({hidden_});
    out_bias_ = ad::zeros_param<T>({vocab_});
  }

  void collect_params(ad::ParamMap<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + "emb", emb_);
    out.emplace_back(prefix + "w_ih", w_ih_);
    out.emplace_back(prefix + "w_hh", w_hh_);
    out.emplace_back(prefix + "b", b_);
    out.emplace_back(prefix + "w_dec", w_dec_);
    out.emplace_back(prefix + "b_dec", b_dec_);
    out.emplace_back(prefix + "ln.gamma", ln_gamma_);
    out.emplace_back(prefix + "ln.beta", ln_beta_);
    out.emplace_back(prefix + "out_bias", out_bias_);
  }

  struct StepState {
    ad::Tensor<T> s;  // [B x d]
    ad::Tensor<T> c;  // [B x d]
  };

  struct StepResult {
    StepState state;
    ad::Tensor<T> output;     // o_t [B x d]
    ad::Tensor<T> probs;      // [B x V]
    ad::Tensor<T> attention;  // [B x (L+1)] weights over the graph vectors
    ad::Tensor<T> context;    // u_t [B x d]
  };

  // One decoder step: standard LSTM update, attention context over the L+1
  // graph vectors, layer-normalized output projection, vocabulary softmax.
  StepResult step(ad::Tape<T>* tape, const StepState& prev, const ad::Tensor<T>& input,
                  const LayerReps<T>& reps) const {
    const std::size_t d = hidden_;
    if (input.cols() != d || prev.s.cols() != d || prev.c.cols() != d) {
      throw ContractError("lstm decoder: state width mismatch");
    }
    auto gates = ad::add(tape,
                         ad::add(tape, ad::matmul(tape, input, w_ih_),
                                 ad::matmul(tape, prev.s, w_hh_)),
                         b_);
    auto i_gate = ad::sigmoid(tape, ad::slice_cols(tape, gates, 0, d));
    auto f_gate = ad::sigmoid(tape, ad::slice_cols(tape, gates, d, d));
    auto g_gate = ad::tanh_op(tape, ad::slice_cols(tape, gates, 2 * d, d));
    auto o_gate = ad::sigmoid(tape, ad::slice_cols(tape, gates, 3 * d, d));
    StepResult result;
    result.state.c =
        ad::add(tape, ad::mul(tape, f_gate, prev.c), ad::mul(tape, i_gate, g_gate));
    result.state.s = ad::mul(tape, o_gate, ad::tanh_op(tape, result.state.c));

    // attention weights over {h_G^1 .. h_G^L, h_G}
    std::vector<ad::Tensor<T>> vectors = reps.per_layer;
    vectors.push_back(reps.aggregated);
    std::vector<ad::Tensor<T>> scores;
    scores.reserve(vectors.size());
    for (const auto& v : vectors) {
      scores.push_back(ad::sum_axis(tape, ad::mul(tape, v, result.state.s), 1));
    }
    result.attention = ad::softmax(tape, ad::concat(tape, scores, 1), 1);
    ad::Tensor<T> context;
    for (std::size_t l = 0; l < vectors.size(); ++l) {
      auto term = ad::mul(tape, vectors[l], ad::slice_cols(tape, result.attention, l, 1));
      context = l == 0 ? term : ad::add(tape, context, term);
    }
    result.context = context;

    auto joined = ad::concat<T>(tape, {context, result.state.s}, 1);
    auto pre = ad::add(tape, ad::matmul(tape, joined, w_dec_), b_dec_);
    result.output = ad::tanh_op(tape, ad::layer_norm(tape, pre, ln_gamma_, ln_beta_, T(1e-5)));
    auto logits =
        ad::add(tape, ad::matmul(tape, result.output, emb_, false, true), out_bias_);
    result.probs = ad::softmax(tape, logits, 1);
    return result;
  }

  // Training unroll: always runs `steps` steps and returns every probability
  // matrix. With teacher forcing the inputs after SOS are the embedded
  // ground-truth words instead of the previous output vector.
  std::vector<ad::Tensor<T>> forward(ad::Tape<T>* tape, const LayerReps<T>& reps,
                                     std::size_t steps,
                                     const std::vector<ad::IdList>* target_cols = nullptr,
                                     bool teacher_forcing = false) const {
    if (steps == 0) throw ContractError("lstm decoder: steps must be >= 1");
    if (teacher_forcing) {
      if (target_cols == nullptr || target_cols->size() != steps) {
        throw ContractError("lstm decoder: teacher forcing needs one target column per step");
      }
    }
    const std::size_t batch = reps.aggregated.rows();
    StepState state{reps.aggregated, reps.aggregated};
    auto input = sos_input(tape, batch);
    std::vector<ad::Tensor<T>> probs;
    probs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      auto result = step(tape, state, input, reps);
      probs.push_back(result.probs);
      state = result.state;
      if (teacher_forcing) {
        input = ad::embedding_lookup(tape, emb_, (*target_cols)[t]);
      } else {
        input = result.output;
      }
    }
    return probs;
  }

  // Greedy decoding for one graph; stops at EOS or after max_steps.
  DecodedSequence<T> decode(const LayerReps<T>& reps, std::size_t max_steps) const {
    if (reps.aggregated.rows() != 1) {
      throw ContractError("lstm decoder: greedy decoding expects a single graph");
    }
    DecodedSequence<T> out;
    StepState state{reps.aggregated, reps.aggregated};
    auto input = sos_input(nullptr, 1);
    for (std::size_t t = 0; t < max_steps; ++t) {
      auto result = step(nullptr, state, input, reps);
      out.step_probs.emplace_back(result.probs.values().begin(), result.probs.values().end());
      out.steps = t + 1;
      const std::int32_t id = detail::greedy_pick<T>(result.probs.values());
      if (id == Vocabulary::kEos) break;
      out.ids.push_back(id);
      state = result.state;
      input = result.output;
    }
    return out;
  }

 private:
  ad::Tensor<T> sos_input(ad::Tape<T>* tape, std::size_t batch) const {
    auto row = ad::embedding_lookup(tape, emb_, ad::make_ids({Vocabulary::kSos}));
    if (batch == 1) return row;
    auto zeros = ad::Tensor<T>::zeros({batch, hidden_});
    return ad::add(tape, zeros, row);
  }

  std::size_t vocab_ = 0;
  std::size_t hidden_ = 0;
  ad::Tensor<T> emb_;
  ad::Tensor<T> w_ih_, w_hh_, b_;
  ad::Tensor<T> w_dec_, b_dec_;
  ad::Tensor<T> ln_gamma_, ln_beta_;
  ad::Tensor<T> out_bias_;
};

}  // namespace g2s
