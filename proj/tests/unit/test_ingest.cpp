#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "g2s/common.hpp"
#include "g2s/dataset.hpp"
#include "g2s/graph.hpp"
#include "g2s/parser.hpp"
#include "g2s/subtoken.hpp"
#include "g2s/vocab.hpp"
#include "../support/tmpdir.hpp"

using namespace g2s;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Random identifier built from lowercase runs, digits and underscores.
std::string random_identifier(Rng& rng) {
  static const std::string alpha = "abcdefghijklmnopqrstuvwxyz";
  std::string out;
  const std::size_t parts = 1 + rng.below(3);
  for (std::size_t p = 0; p < parts; ++p) {
    if (p > 0 && rng.below(2) == 0) out += '_';
    const std::size_t len = 1 + rng.below(5);
    for (std::size_t i = 0; i < len; ++i) {
      char c = alpha[rng.below(26)];
      if (rng.below(4) == 0) c = static_cast<char>(std::toupper(c));
      out += c;
    }
    if (rng.below(3) == 0) out += std::to_string(rng.below(100));
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize_name splits identifiers") {
  CHECK(tokenize_name("get_mean") == std::vector<std::string>{"get", "mean"});
  CHECK(tokenize_name("f") == std::vector<std::string>{"f"});
  CHECK(tokenize_name("parseHTTPResponse2") ==
        std::vector<std::string>{"parse", "http", "response", "2"});
  CHECK(tokenize_name("camelCase") == std::vector<std::string>{"camel", "case"});
  CHECK(tokenize_name("HTTPServer") == std::vector<std::string>{"http", "server"});
  CHECK(tokenize_name("value2x") == std::vector<std::string>{"value", "2", "x"});
  CHECK(tokenize_name("__init__") == std::vector<std::string>{"init"});
  CHECK(tokenize_name("_") == std::vector<std::string>{"_"});
}

TEST_CASE("tokenize_name is idempotent on its own joined output") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const std::string name = random_identifier(rng);
    const auto tokens = tokenize_name(name);
    REQUIRE(!tokens.empty());
    std::string joined;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) joined += '_';
      joined += tokens[i];
    }
    CHECK(tokenize_name(joined) == tokens);
  }
}

TEST_CASE("parse_function masks the name and computes depths") {
  const auto ast = parse_function("def get_mean(x): return sum(x) / len(x)");
  CHECK(ast.name == "get_mean");
  REQUIRE(!ast.nodes.empty());
  CHECK(ast.nodes[0].node_type == "FunctionDef");
  CHECK(ast.nodes[0].depth == 0);
  CHECK(ast.nodes[0].attribute.empty());

  bool found_mask = false;
  for (const auto& n : ast.nodes) {
    if (n.attribute == kMaskToken) {
      found_mask = true;
      CHECK(n.node_type == "Name");
      CHECK(n.depth == 1);
    }
    CHECK(n.attribute != "get_mean");  // the answer must not leak
  }
  CHECK(found_mask);

  // depth invariant: child depth = parent depth + 1
  for (const auto& [parent, child] : ast.ast_edges) {
    CHECK(ast.nodes[child].depth == ast.nodes[parent].depth + 1);
  }
}

TEST_CASE("every leaf carries an attribute and internal nodes are blank") {
  const char* source =
      "def process(items, limit=10):\n"
      "    total = 0\n"
      "    for item in items:\n"
      "        if item > limit or item < -limit:\n"
      "            continue\n"
      "        total += item * 2\n"
      "    return {'total': total, 'flag': True}\n";
  const auto ast = parse_function(source);
  std::set<std::int32_t> has_child;
  for (const auto& [parent, child] : ast.ast_edges) has_child.insert(parent);
  for (const auto& n : ast.nodes) {
    if (has_child.count(n.id)) {
      CHECK(n.attribute.empty());
    } else {
      CHECK(!n.attribute.empty());
    }
  }
  // leaf list matches childless nodes, in id (= token) order
  std::vector<std::int32_t> expected;
  for (const auto& n : ast.nodes) {
    if (!has_child.count(n.id)) expected.push_back(n.id);
  }
  CHECK(ast.leaf_ids == expected);
}

TEST_CASE("parser rejects bad input with positions") {
  CHECK_THROWS_AS(parse_function(""), ContractError);
  CHECK_THROWS_AS(parse_function("   \n\n"), ContractError);
  CHECK_THROWS_AS(parse_function("def f(: return 1"), ParseError);
  CHECK_THROWS_AS(parse_function("x = 1"), ParseError);
  CHECK_THROWS_AS(parse_function("def f(x):\n  return [x for x in y]\n"), ParseError);
  CHECK_THROWS_AS(parse_function("def f(x):\n\treturn x\n"), ParseError);
  try {
    parse_function("def f(x):\n    return ((x)\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

TEST_CASE("parsed trees match the independent AST-walk oracle") {
  const auto data = testing::test_data_dir();
  std::map<std::string, std::pair<int, int>> expected;  // provenance -> nodes, leaves
  {
    std::ifstream in(data + "/ref_corpus_counts.txt");
    REQUIRE(in.good());
    std::string prov;
    int nodes = 0;
    int leaves = 0;
    while (in >> prov >> nodes >> leaves) expected[prov] = {nodes, leaves};
  }
  REQUIRE(expected.size() == 50);

  std::size_t checked = 0;
  for (const auto& entry :
       std::filesystem::directory_iterator(data + "/ref_corpus")) {
    if (entry.path().extension() != ".py") continue;
    const auto functions = parse_module(read_file(entry.path()));
    for (const auto& fn : functions) {
      const std::string key = entry.path().filename().string() + ":" + fn.name;
      REQUIRE_MESSAGE(expected.count(key) == 1, key);
      CHECK_MESSAGE(static_cast<int>(fn.nodes.size()) == expected[key].first, key);
      CHECK_MESSAGE(static_cast<int>(fn.leaf_ids.size()) == expected[key].second, key);
      CHECK(fn.ast_edges.size() == fn.nodes.size() - 1);
      ++checked;
    }
  }
  CHECK(checked == 50);
}

TEST_CASE("augment_edges emits the four typed groups") {
  // two AST edges, two leaves -> 2 + 2 + 1 + 1 = 6 edges
  const std::vector<std::pair<std::int32_t, std::int32_t>> ast = {{0, 1}, {0, 2}};
  const std::vector<std::int32_t> leaves = {1, 2};
  const auto edges = augment_edges(ast, leaves);
  REQUIRE(edges.size() == 6);
  CHECK(edges[0] == TypedEdge{0, 1, EdgeType::kAst});
  CHECK(edges[1] == TypedEdge{0, 2, EdgeType::kAst});
  CHECK(edges[2] == TypedEdge{1, 0, EdgeType::kAstReverse});
  CHECK(edges[3] == TypedEdge{2, 0, EdgeType::kAstReverse});
  CHECK(edges[4] == TypedEdge{1, 2, EdgeType::kNextToken});
  CHECK(edges[5] == TypedEdge{2, 1, EdgeType::kNextTokenReverse});
}

TEST_CASE("augment_edges with a single leaf adds no next-token edges") {
  const auto edges = augment_edges({}, {0});
  CHECK(edges.empty());
  const auto one = augment_edges({{0, 1}}, {1});
  CHECK(one.size() == 2);
}

TEST_CASE("augment_edges rejects duplicate input edges") {
  CHECK_THROWS_AS(augment_edges({{0, 1}, {0, 1}}, {1}), ContractError);
}

TEST_CASE("edge count identity and reverse pairing hold on random trees") {
  Rng rng(59);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<std::pair<std::int32_t, std::int32_t>> ast;
    std::vector<std::int32_t> leaves;
    std::set<std::int32_t> parents;
    for (std::size_t i = 1; i < n; ++i) {
      const auto parent = static_cast<std::int32_t>(rng.below(i));
      ast.emplace_back(parent, static_cast<std::int32_t>(i));
      parents.insert(parent);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!parents.count(static_cast<std::int32_t>(i))) {
        leaves.push_back(static_cast<std::int32_t>(i));
      }
    }
    const auto edges = augment_edges(ast, leaves);
    CHECK(edges.size() == expected_edge_count(ast.size(), leaves.size()));

    std::multiset<std::pair<std::int32_t, std::int32_t>> fwd, rev, nxt, nxt_rev;
    for (const auto& e : edges) {
      switch (e.type) {
        case EdgeType::kAst: fwd.insert({e.src, e.dst}); break;
        case EdgeType::kAstReverse: rev.insert({e.dst, e.src}); break;
        case EdgeType::kNextToken: nxt.insert({e.src, e.dst}); break;
        case EdgeType::kNextTokenReverse: nxt_rev.insert({e.dst, e.src}); break;
      }
    }
    CHECK(fwd == rev);
    CHECK(nxt == nxt_rev);
  }
}

TEST_CASE("vocabulary reserves specials and orders by frequency") {
  std::unordered_map<std::string, std::size_t> freq = {
      {"get", 10}, {"mean", 4}, {"set", 4}, {"rare", 1}};
  const auto vocab = Vocabulary::build(freq, 3);
  CHECK(vocab.decode(Vocabulary::kSos) == Vocabulary::kSosToken);
  CHECK(vocab.decode(Vocabulary::kUnk) == Vocabulary::kUnkToken);
  CHECK(vocab.decode(Vocabulary::kEos) == Vocabulary::kEosToken);
  CHECK(vocab.encode("get") == 3);   // most frequent right after the specials
  CHECK(vocab.encode("mean") == 4);  // tie with "set" broken lexicographically
  CHECK(vocab.encode("set") == 5);
  CHECK(vocab.encode("rare") == Vocabulary::kUnk);  // beyond the cap
  CHECK(vocab.size() == 6);

  for (const auto& tok : {"get", "mean", "set"}) {
    CHECK(vocab.decode(vocab.encode(tok)) == tok);
  }
}

TEST_CASE("encode_target pads and truncates to the maximum length") {
  std::unordered_map<std::string, std::size_t> freq = {{"get", 2}, {"mean", 1}};
  const auto vocab = Vocabulary::build(freq, 0);
  const auto padded = encode_target({"get", "mean"}, vocab, 5);
  CHECK(padded == std::vector<std::int32_t>{3, 4, Vocabulary::kEos, Vocabulary::kEos,
                                            Vocabulary::kEos});
  const auto truncated = encode_target({"a", "b", "c", "d", "e", "f"}, vocab, 5);
  CHECK(truncated.size() == 5);
  for (auto id : truncated) CHECK(id == Vocabulary::kUnk);
  const auto with_unk = encode_target({"get", "nope"}, vocab, 3);
  CHECK(with_unk == std::vector<std::int32_t>{3, Vocabulary::kUnk, Vocabulary::kEos});
}

TEST_CASE("dataset round trip preserves every field") {
  const auto data = testing::test_data_dir();
  std::vector<RawFunction> functions;
  std::size_t file_index = 0;
  for (const auto& entry :
       std::filesystem::directory_iterator(data + "/ref_corpus")) {
    if (entry.path().extension() != ".py") continue;
    for (auto& fn : parse_module(read_file(entry.path()))) {
      RawFunction raw;
      raw.provenance = entry.path().filename().string() + ":" + fn.name;
      raw.ast = std::move(fn);
      raw.file_index = file_index;
      functions.push_back(std::move(raw));
    }
    ++file_index;
  }
  const auto ds = build_dataset(functions, file_index, 100, 200, 20, 13);
  CHECK(ds.graphs.size() == 50);
  CHECK(!ds.meta.train.empty());
  CHECK(!ds.meta.valid.empty());
  CHECK(!ds.meta.test.empty());
  CHECK(ds.meta.train.size() + ds.meta.valid.size() + ds.meta.test.size() == 50);

  testing::TempDir tmp("dataset_rt");
  save_dataset(ds, tmp.str());
  const auto loaded = load_dataset(tmp.str());
  CHECK(loaded.graphs == ds.graphs);
  CHECK(loaded.target_vocab == ds.target_vocab);
  CHECK(loaded.attr_vocab == ds.attr_vocab);
  CHECK(loaded.type_vocab == ds.type_vocab);
  CHECK(loaded.meta.train == ds.meta.train);
  CHECK(loaded.meta.valid == ds.meta.valid);
  CHECK(loaded.meta.test == ds.meta.test);
  CHECK(loaded.meta.depth_cap == ds.meta.depth_cap);

  // serialization is deterministic: writing again yields identical bytes
  testing::TempDir tmp2("dataset_rt2");
  save_dataset(loaded, tmp2.str());
  for (const char* name : {"graphs.txt", "vocab.target.txt", "vocab.attr.txt",
                           "vocab.type.txt", "meta.txt"}) {
    CHECK(read_file(tmp.path() / name) == read_file(tmp2.path() / name));
  }
}

TEST_CASE("the hand-written golden dataset loads to the expected graph") {
  const auto ds = load_dataset(testing::test_data_dir() + "/golden_dataset");
  REQUIRE(ds.graphs.size() == 3);
  ProgramGraph expected;
  expected.provenance = "a.py:one";
  expected.nodes = {{0, 3, 3}, {1, 4, 4}};
  expected.edges = {{0, 1, EdgeType::kAst}, {1, 0, EdgeType::kAstReverse}};
  expected.target = {"one"};
  CHECK(ds.graphs[0] == expected);
  CHECK(ds.graphs[2].edges.empty());
  CHECK(ds.attr_vocab.encode("") == 3);  // blank attribute is an ordinary token
}

TEST_CASE("dataset loading reports malformed lines and version mismatches") {
  const auto golden = testing::test_data_dir() + "/golden_dataset";

  testing::TempDir bad("dataset_bad");
  for (const char* name : {"graphs.txt", "vocab.target.txt", "vocab.attr.txt",
                           "vocab.type.txt", "meta.txt"}) {
    bad.write_file(name, read_file(std::filesystem::path(golden) / name));
  }
  bad.write_file("graphs.txt", "only one field\n");
  try {
    load_dataset(bad.str());
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("graphs.txt:1") != std::string::npos);
  }

  testing::TempDir wrong_version("dataset_ver");
  for (const char* name : {"graphs.txt", "vocab.target.txt", "vocab.attr.txt",
                           "vocab.type.txt"}) {
    wrong_version.write_file(name, read_file(std::filesystem::path(golden) / name));
  }
  wrong_version.write_file(
      "meta.txt",
      "version=999\ntarget_cap=1\nattr_cap=1\ndepth_cap=20\nsplit_seed=1\n"
      "train=0\nvalid=1\ntest=2\n");
  CHECK_THROWS_WITH_AS(load_dataset(wrong_version.str()), doctest::Contains("version"),
                       FormatError);
}

TEST_CASE("saving requires all three splits") {
  Dataset ds = load_dataset(testing::test_data_dir() + "/golden_dataset");
  ds.meta.test.clear();
  testing::TempDir tmp("dataset_splits");
  CHECK_THROWS_AS(save_dataset(ds, tmp.str()), ContractError);
}
