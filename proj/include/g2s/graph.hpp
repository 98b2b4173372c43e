#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "g2s/ast.hpp"
#include "g2s/autodiff.hpp"

namespace g2s {

enum class EdgeType : std::int32_t {
  kAst = 0,              // parent -> child
  kAstReverse = 1,       // child -> parent
  kNextToken = 2,        // leaf -> next leaf in token order
  kNextTokenReverse = 3,
};

inline constexpr std::size_t kNumEdgeTypes = 4;

struct TypedEdge {
  std::int32_t src = 0;
  std::int32_t dst = 0;
  EdgeType type = EdgeType::kAst;

  friend bool operator==(const TypedEdge&, const TypedEdge&) = default;
};

// Augmented program graph with vocabulary-encoded node features
// (depth id, type id, attribute id) and the ground-truth name subtokens.
struct ProgramGraph {
  std::vector<std::array<std::int32_t, 3>> nodes;
  std::vector<TypedEdge> edges;
  std::vector<std::string> target;
  std::string provenance;

  friend bool operator==(const ProgramGraph&, const ProgramGraph&) = default;
};

// Emits, in order: the AST edges unchanged, one reverse per AST edge, next-
// token edges between consecutive leaves, and one reverse per next-token
// edge. Duplicate input edges are a contract violation.
std::vector<TypedEdge> augment_edges(
    const std::vector<std::pair<std::int32_t, std::int32_t>>& ast_edges,
    const std::vector<std::int32_t>& leaves);

// |edges| == 2|AST| + 2 max(0, #leaves - 1)
std::size_t expected_edge_count(std::size_t ast_edges, std::size_t leaves);

// Disjoint union of a batch of graphs with batch-global node indices.
// node_to_graph is nondecreasing; edges never cross graphs.
struct BatchedGraph {
  std::size_t num_nodes = 0;
  std::size_t num_graphs = 0;
  ad::IdList depth_ids;
  ad::IdList type_ids;
  ad::IdList attr_ids;
  ad::IdList edge_src;
  ad::IdList edge_dst;
  ad::IdList edge_types;
  ad::IdList node_to_graph;
  std::vector<std::int32_t> graph_sizes;
};

BatchedGraph batch_graphs(const std::vector<const ProgramGraph*>& graphs);

}  // namespace g2s
