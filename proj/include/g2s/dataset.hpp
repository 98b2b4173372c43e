#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "g2s/ast.hpp"
#include "g2s/graph.hpp"
#include "g2s/vocab.hpp"

namespace g2s {

struct DatasetMeta {
  int format_version = 0;
  std::size_t target_cap = 5000;
  std::size_t attr_cap = 10000;
  std::int32_t depth_cap = 20;
  std::uint64_t split_seed = 13;
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

struct Dataset {
  std::vector<ProgramGraph> graphs;
  Vocabulary target_vocab;  // name subtokens
  Vocabulary attr_vocab;    // node attribute tokens
  Vocabulary type_vocab;    // closed grammar set
  DatasetMeta meta;

  const std::vector<std::size_t>& split(const std::string& name) const;
};

struct RawFunction {
  FunctionAst ast;
  std::string provenance;   // file:function
  std::size_t file_index = 0;
};

struct CorpusStats {
  std::size_t graphs = 0;
  double nodes_mean = 0.0;
  double edges_mean = 0.0;
  double target_len_mean = 0.0;
};

// Vocabulary-encodes one parsed function: depth clamped at depth_cap, type
// and attribute looked up, edges augmented.
ProgramGraph encode_function(const FunctionAst& ast, const Vocabulary& type_vocab,
                             const Vocabulary& attr_vocab, std::int32_t depth_cap,
                             std::string provenance);

// Splits by source file (80/10/10, seeded), builds the target and attribute
// vocabularies from the training split only, encodes node features with the
// depth cap, and augments edges. Needs at least three files.
Dataset build_dataset(const std::vector<RawFunction>& functions, std::size_t num_files,
                      std::size_t target_cap, std::size_t attr_cap, std::int32_t depth_cap,
                      std::uint64_t split_seed);

struct CorpusScan {
  std::vector<RawFunction> functions;
  std::size_t files_total = 0;
  std::size_t files_parsed = 0;
  std::size_t files_failed = 0;
  std::vector<std::string> failures;  // "file: message"
};

// Reads every .py file under dir (sorted), parsing each into functions.
// Files that fail to parse are recorded and skipped.
CorpusScan scan_corpus(const std::string& dir);

CorpusStats corpus_stats(const Dataset& dataset);

// Directory layout: graphs.txt (one graph per line), vocab.target.txt,
// vocab.attr.txt, vocab.type.txt (one token per line, line == id), meta.txt.
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace g2s
