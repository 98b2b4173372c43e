#pragma once

#include <string>
#include <vector>

#include "g2s/autodiff.hpp"
#include "g2s/graph.hpp"
#include "g2s/init.hpp"

namespace g2s {

enum class PoolMode {
  kMlap,       // attention pooling after every layer, weighted aggregation
  kLastLayer,  // attention pooling after the final layer only
};

struct EncoderConfig {
  int num_layers = 6;
  int hidden_dim = 300;
  bool residual = true;
  bool graph_norm = false;
  double dropout_p = 0.1;
  PoolMode pool = PoolMode::kMlap;
  std::size_t depth_vocab = 21;  // depth cap + 1
  std::size_t type_vocab = 0;
  std::size_t attr_vocab = 0;

  void validate() const {
    if (num_layers < 1) throw ContractError("encoder: num_layers must be >= 1");
    if (hidden_dim < 1) throw ContractError("encoder: hidden_dim must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
      throw ContractError("encoder: dropout_p must lie in [0, 1)");
    }
    if (depth_vocab == 0 || type_vocab == 0 || attr_vocab == 0) {
      throw ContractError("encoder: embedding table sizes must be set");
    }
  }
};

// Pooled graph vectors: one per pooled layer plus the aggregate.
template <typename T>
struct LayerReps {
  std::vector<ad::Tensor<T>> per_layer;  // each [B x d]
  ad::Tensor<T> aggregated;              // [B x d]
};

template <typename T>
struct GinLayer {
  ad::Tensor<T> eps;  // learnable scalar, starts at 0
  ad::Tensor<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  ad::Tensor<T> gn_alpha, gn_gamma, gn_beta;        // graph-norm, optional
  ad::Tensor<T> gate_w1, gate_b1, gate_w2, gate_b2; // attention gate d->d->1
};

template <typename T>
class Encoder {
 public:
  Encoder() = default;

  explicit Encoder(EncoderConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const EncoderConfig& config() const { return cfg_; }

  void init(Rng& rng) {
    const auto d = static_cast<std::size_t>(cfg_.hidden_dim);
    emb_depth_ = ad::normal_init<T>({cfg_.depth_vocab, d}, rng);
    emb_type_ = ad::normal_init<T>({cfg_.type_vocab, d}, rng);
    emb_attr_ = ad::normal_init<T>({cfg_.attr_vocab, d}, rng);
    emb_edge_ = ad::normal_init<T>({kNumEdgeTypes, d}, rng);
    layers_.clear();
    for (int l = 0; l < cfg_.num_layers; ++l) {
      GinLayer<T> layer;
      layer.eps = ad::zeros_param<T>({1});
      layer.mlp_w1 = ad::glorot_uniform<T>(d, 2 * d, rng);
      layer.mlp_b1 = ad::zeros_param<T>({2 * d});
      layer.mlp_w2 = ad::glorot_uniform<T>(2 * d, d, rng);
      layer.mlp_b2 = ad::zeros_param<T>({d});
      if (cfg_.graph_norm) {
        layer.gn_alpha = ad::ones_param<T>({d});
        layer.gn_gamma = ad::ones_param<T>({d});
        layer.gn_beta = ad::zeros_param<T>({d});
      }
      const bool pooled = cfg_.pool == PoolMode::kMlap || l == cfg_.num_layers - 1;
      if (pooled) {
        layer.gate_w1 = ad::glorot_uniform<T>(d, d, rng);
        layer.gate_b1 = ad::zeros_param<T>({d});
        layer.gate_w2 = ad::glorot_uniform<T>(d, 1, rng);
        layer.gate_b2 = ad::zeros_param<T>({1});
      }
      layers_.push_back(std::move(layer));
    }
    if (cfg_.pool == PoolMode::kMlap) {
      agg_scores_ = ad::zeros_param<T>({static_cast<std::size_t>(cfg_.num_layers)});
    }
  }

  void collect_params(ad::ParamMap<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + "embed.depth", emb_depth_);
    out.emplace_back(prefix + "embed.type", emb_type_);
    out.emplace_back(prefix + "embed.attr", emb_attr_);
    out.emplace_back(prefix + "embed.edge", emb_edge_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::string base = prefix + "layer" + std::to_string(l) + ".";
      const GinLayer<T>& layer = layers_[l];
      out.emplace_back(base + "eps", layer.eps);
      out.emplace_back(base + "mlp.w1", layer.mlp_w1);
      out.emplace_back(base + "mlp.b1", layer.mlp_b1);
      out.emplace_back(base + "mlp.w2", layer.mlp_w2);
      out.emplace_back(base + "mlp.b2", layer.mlp_b2);
      if (layer.gn_alpha.valid()) {
        out.emplace_back(base + "gn.alpha", layer.gn_alpha);
        out.emplace_back(base + "gn.gamma", layer.gn_gamma);
        out.emplace_back(base + "gn.beta", layer.gn_beta);
      }
      if (layer.gate_w1.valid()) {
        out.emplace_back(base + "gate.w1", layer.gate_w1);
        out.emplace_back(base + "gate.b1", layer.gate_b1);
        out.emplace_back(base + "gate.w2", layer.gate_w2);
        out.emplace_back(base + "gate.b2", layer.gate_b2);
      }
    }
    if (agg_scores_.valid()) out.emplace_back(prefix + "agg.scores", agg_scores_);
  }

  // h^0: sum of depth, type and attribute embeddings per node.
  ad::Tensor<T> embed_nodes(ad::Tape<T>* tape, const BatchedGraph& batch) const {
    check_ids(*batch.depth_ids, emb_depth_.rows(), "depth-embedding");
    check_ids(*batch.type_ids, emb_type_.rows(), "type-embedding");
    check_ids(*batch.attr_ids, emb_attr_.rows(), "attribute-embedding");
    auto h = ad::add(tape, ad::embedding_lookup(tape, emb_depth_, batch.depth_ids),
                     ad::embedding_lookup(tape, emb_type_, batch.type_ids));
    return ad::add(tape, h, ad::embedding_lookup(tape, emb_attr_, batch.attr_ids));
  }

  // (1+eps) h_n + sum over incoming edges of (h_src + edge-type embedding),
  // then the layer MLP, GraphNorm, ReLU, dropout, and the residual sum.
  ad::Tensor<T> gin_layer_forward(ad::Tape<T>* tape, std::size_t layer_index,
                                  const ad::Tensor<T>& h, const BatchedGraph& batch,
                                  Rng* rng, bool training) const {
    const GinLayer<T>& layer = layers_[layer_index];
    check_ids(*batch.edge_src, batch.num_nodes, "edge-source");
    check_ids(*batch.edge_dst, batch.num_nodes, "edge-destination");
    check_ids(*batch.edge_types, kNumEdgeTypes, "edge-type-embedding");

    auto messages = ad::add(tape, ad::embedding_lookup(tape, h, batch.edge_src),
                            ad::embedding_lookup(tape, emb_edge_, batch.edge_types));
    auto aggregated = ad::segment_sum(tape, messages, batch.edge_dst, batch.num_nodes);
    auto one = ad::Tensor<T>::scalar(T(1));
    auto self_scaled = ad::mul(tape, h, ad::add(tape, layer.eps, one));
    auto m = ad::add(tape, self_scaled, aggregated);

    auto z = ad::add(tape, ad::matmul(tape, m, layer.mlp_w1), layer.mlp_b1);
    z = ad::relu(tape, z);
    z = ad::add(tape, ad::matmul(tape, z, layer.mlp_w2), layer.mlp_b2);
    if (cfg_.graph_norm) {
      z = graph_norm(tape, z, batch, layer.gn_alpha, layer.gn_gamma, layer.gn_beta);
    }
    z = ad::relu(tape, z);
    if (training && cfg_.dropout_p > 0.0) {
      if (rng == nullptr) throw ContractError("encoder: dropout needs a random source");
      z = ad::dropout(tape, z, cfg_.dropout_p, *rng, true);
    }
    if (cfg_.residual) z = ad::add(tape, z, h);
    return z;
  }

  // Per graph and feature: subtract alpha * mean, scale by the inverse root
  // of the second moment of the shifted values, then apply gamma and beta.
  static ad::Tensor<T> graph_norm(ad::Tape<T>* tape, const ad::Tensor<T>& x,
                                  const BatchedGraph& batch, const ad::Tensor<T>& alpha,
                                  const ad::Tensor<T>& gamma, const ad::Tensor<T>& beta,
                                  T eps = T(1e-5)) {
    auto inv_counts = ad::Tensor<T>::zeros({batch.num_graphs, 1});
    for (std::size_t g = 0; g < batch.num_graphs; ++g) {
      inv_counts.at(g, 0) = T(1) / static_cast<T>(batch.graph_sizes[g]);
    }
    auto mean = ad::mul(tape, ad::segment_sum(tape, x, batch.node_to_graph, batch.num_graphs),
                        inv_counts);
    auto mean_b = ad::embedding_lookup(tape, mean, batch.node_to_graph);
    auto shifted = ad::sub(tape, x, ad::mul(tape, mean_b, alpha));
    auto second = ad::mul(
        tape,
        ad::segment_sum(tape, ad::mul(tape, shifted, shifted), batch.node_to_graph,
                        batch.num_graphs),
        inv_counts);
    auto inv_std = ad::rsqrt(tape, second, eps);
    auto xhat = ad::mul(tape, shifted, ad::embedding_lookup(tape, inv_std, batch.node_to_graph));
    return ad::add(tape, ad::mul(tape, xhat, gamma), beta);
  }

  // Attention-pooled graph vector for one layer (Eq. 1 style readout).
  ad::Tensor<T> pool_layer(ad::Tape<T>* tape, std::size_t layer_index,
                           const ad::Tensor<T>& h, const BatchedGraph& batch) const {
    const GinLayer<T>& layer = layers_[layer_index];
    if (!layer.gate_w1.valid()) {
      throw ContractError("encoder: layer " + std::to_string(layer_index) +
                          " has no pooling gate");
    }
    auto hidden = ad::relu(tape, ad::add(tape, ad::matmul(tape, h, layer.gate_w1),
                                         layer.gate_b1));
    auto scores = ad::add(tape, ad::matmul(tape, hidden, layer.gate_w2), layer.gate_b2);
    auto attention = ad::segment_softmax(tape, scores, batch.node_to_graph, batch.num_graphs);
    return ad::segment_sum(tape, ad::mul(tape, h, attention), batch.node_to_graph,
                           batch.num_graphs);
  }

  // Softmax-weighted combination of the per-layer pooled vectors.
  ad::Tensor<T> aggregate_weighted(ad::Tape<T>* tape,
                                   const std::vector<ad::Tensor<T>>& layer_reps) const {
    if (layer_reps.empty()) throw ContractError("aggregate: no layer representations");
    auto weights = ad::softmax(tape, agg_scores_);
    ad::Tensor<T> out;
    for (std::size_t l = 0; l < layer_reps.size(); ++l) {
      auto term = ad::mul(tape, layer_reps[l], ad::slice_cols(tape, weights, l, 1));
      out = l == 0 ? term : ad::add(tape, out, term);
    }
    return out;
  }

  LayerReps<T> encode(ad::Tape<T>* tape, const BatchedGraph& batch, Rng* rng,
                      bool training) const {
    LayerReps<T> reps;
    auto h = embed_nodes(tape, batch);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      h = gin_layer_forward(tape, l, h, batch, rng, training);
      if (cfg_.pool == PoolMode::kMlap) {
        reps.per_layer.push_back(pool_layer(tape, l, h, batch));
      }
    }
    if (cfg_.pool == PoolMode::kMlap) {
      reps.aggregated = aggregate_weighted(tape, reps.per_layer);
    } else {
      reps.per_layer.push_back(pool_layer(tape, layers_.size() - 1, h, batch));
      reps.aggregated = reps.per_layer.back();
    }
    return reps;
  }

  GinLayer<T>& layer(std::size_t i) { return layers_[i]; }
  ad::Tensor<T>& agg_scores() { return agg_scores_; }
  ad::Tensor<T>& depth_table() { return emb_depth_; }
  ad::Tensor<T>& type_table() { return emb_type_; }
  ad::Tensor<T>& attr_table() { return emb_attr_; }
  ad::Tensor<T>& edge_table() { return emb_edge_; }

 private:
  static void check_ids(const std::vector<std::int32_t>& ids, std::size_t limit,
                        const char* table) {
    for (const auto id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= limit) {
        throw ContractError(std::string("encoder: id ") + std::to_string(id) +
                            " out of range for " + table);
      }
    }
  }

  EncoderConfig cfg_;
  ad::Tensor<T> emb_depth_, emb_type_, emb_attr_, emb_edge_;
  std::vector<GinLayer<T>> layers_;
  ad::Tensor<T> agg_scores_;
};

}  // namespace g2s
