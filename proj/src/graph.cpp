#include "g2s/graph.hpp"

#include <set>

#include "g2s/common.hpp"

namespace g2s {

std::vector<TypedEdge> augment_edges(
    const std::vector<std::pair<std::int32_t, std::int32_t>>& ast_edges,
    const std::vector<std::int32_t>& leaves) {
  std::set<std::pair<std::int32_t, std::int32_t>> seen;
  for (const auto& e : ast_edges) {
    if (!seen.insert(e).second) {
      throw ContractError("augment_edges: duplicate edge " + std::to_string(e.first) +
                          "->" + std::to_string(e.second));
    }
  }
  std::vector<TypedEdge> out;
  out.reserve(2 * ast_edges.size() + 2 * (leaves.empty() ? 0 : leaves.size() - 1));
  for (const auto& [src, dst] : ast_edges) out.push_back({src, dst, EdgeType::kAst});
  for (const auto& [src, dst] : ast_edges) out.push_back({dst, src, EdgeType::kAstReverse});
  for (std::size_t i = 0; i + 1 < leaves.size(); ++i) {
    out.push_back({leaves[i], leaves[i + 1], EdgeType::kNextToken});
  }
  for (std::size_t i = 0; i + 1 < leaves.size(); ++i) {
    out.push_back({leaves[i + 1], leaves[i], EdgeType::kNextTokenReverse});
  }
  return out;
}

std::size_t expected_edge_count(std::size_t ast_edges, std::size_t leaves) {
  return 2 * ast_edges + 2 * (leaves == 0 ? 0 : leaves - 1);
}

BatchedGraph batch_graphs(const std::vector<const ProgramGraph*>& graphs) {
  if (graphs.empty()) throw ContractError("batch_graphs: empty batch");
  BatchedGraph batch;
  batch.num_graphs = graphs.size();
  std::vector<std::int32_t> depth, type, attr, src, dst, etype, node2graph;
  std::int32_t offset = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const ProgramGraph& pg = *graphs[g];
    if (pg.nodes.empty()) throw ContractError("batch_graphs: graph without nodes");
    for (const auto& n : pg.nodes) {
      depth.push_back(n[0]);
      type.push_back(n[1]);
      attr.push_back(n[2]);
      node2graph.push_back(static_cast<std::int32_t>(g));
    }
    const auto n = static_cast<std::int32_t>(pg.nodes.size());
    for (const auto& e : pg.edges) {
      if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
        throw ContractError("batch_graphs: edge index out of range in " + pg.provenance);
      }
      src.push_back(e.src + offset);
      dst.push_back(e.dst + offset);
      etype.push_back(static_cast<std::int32_t>(e.type));
    }
    batch.graph_sizes.push_back(n);
    offset += n;
  }
  batch.num_nodes = static_cast<std::size_t>(offset);
  batch.depth_ids = ad::make_ids(std::move(depth));
  batch.type_ids = ad::make_ids(std::move(type));
  batch.attr_ids = ad::make_ids(std::move(attr));
  batch.edge_src = ad::make_ids(std::move(src));
  batch.edge_dst = ad::make_ids(std::move(dst));
  batch.edge_types = ad::make_ids(std::move(etype));
  batch.node_to_graph = ad::make_ids(std::move(node2graph));
  return batch;
}

}  // namespace g2s
