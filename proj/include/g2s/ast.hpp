#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace g2s {

// Replaces the defined function's name in the node attributes so the target
// cannot leak through the input features.
inline constexpr const char* kMaskToken = "<MASK>";

struct AstNode {
  std::int32_t id = 0;
  std::int32_t depth = 0;       // hops from the root
  std::string node_type;        // grammar production name
  std::string attribute;        // token text, non-empty exactly on leaves
};

// One parsed function definition, flattened in depth-first (= source token)
// order. ast_edges point parent -> child. The original name is kept out of
// the node attributes; the name leaf carries kMaskToken instead.
struct FunctionAst {
  std::vector<AstNode> nodes;
  std::vector<std::pair<std::int32_t, std::int32_t>> ast_edges;
  std::vector<std::int32_t> leaf_ids;  // ordered by source token position
  std::string name;
};

}  // namespace g2s
