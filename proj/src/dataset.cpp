#include "g2s/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "g2s/common.hpp"
#include "g2s/parser.hpp"
#include "g2s/subtoken.hpp"
#include "g2s/version.hpp"

namespace fs = std::filesystem;

namespace g2s {

namespace {

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(line.substr(start));
      break;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::int32_t parse_i32(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": malformed integer '" + text + "'");
  }
}

std::uint64_t parse_u64(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": malformed integer '" + text + "'");
  }
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string join_ids(const std::vector<std::size_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::vector<std::size_t> parse_id_list(const std::string& text, const std::string& where) {
  std::vector<std::size_t> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(static_cast<std::size_t>(parse_i32(tok, where)));
  return out;
}

std::string graph_to_line(const ProgramGraph& g) {
  std::string line = g.provenance;
  line += '\t';
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (i > 0) line += ' ';
    line += std::to_string(g.nodes[i][0]);
    line += ':';
    line += std::to_string(g.nodes[i][1]);
    line += ':';
    line += std::to_string(g.nodes[i][2]);
  }
  line += '\t';
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (i > 0) line += ' ';
    line += std::to_string(g.edges[i].src);
    line += ':';
    line += std::to_string(g.edges[i].dst);
    line += ':';
    line += std::to_string(static_cast<std::int32_t>(g.edges[i].type));
  }
  line += '\t';
  for (std::size_t i = 0; i < g.target.size(); ++i) {
    if (i > 0) line += ' ';
    line += g.target[i];
  }
  return line;
}

ProgramGraph graph_from_line(const std::string& line, const std::string& where) {
  const auto fields = split_on(line, '\t');
  if (fields.size() != 4) {
    throw FormatError(where + ": expected 4 tab-separated fields, found " +
                      std::to_string(fields.size()));
  }
  ProgramGraph g;
  g.provenance = fields[0];
  {
    std::istringstream is(fields[1]);
    std::string tok;
    while (is >> tok) {
      const auto parts = split_on(tok, ':');
      if (parts.size() != 3) throw FormatError(where + ": malformed node triple '" + tok + "'");
      g.nodes.push_back({parse_i32(parts[0], where), parse_i32(parts[1], where),
                         parse_i32(parts[2], where)});
    }
  }
  {
    std::istringstream is(fields[2]);
    std::string tok;
    const auto n = static_cast<std::int32_t>(g.nodes.size());
    while (is >> tok) {
      const auto parts = split_on(tok, ':');
      if (parts.size() != 3) throw FormatError(where + ": malformed edge triple '" + tok + "'");
      TypedEdge e;
      e.src = parse_i32(parts[0], where);
      e.dst = parse_i32(parts[1], where);
      const std::int32_t t = parse_i32(parts[2], where);
      if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
        throw FormatError(where + ": edge endpoint out of range in '" + tok + "'");
      }
      if (t < 0 || t >= static_cast<std::int32_t>(kNumEdgeTypes)) {
        throw FormatError(where + ": unknown edge type in '" + tok + "'");
      }
      e.type = static_cast<EdgeType>(t);
      g.edges.push_back(e);
    }
  }
  {
    std::istringstream is(fields[3]);
    std::string tok;
    while (is >> tok) g.target.push_back(tok);
  }
  if (g.nodes.empty()) throw FormatError(where + ": graph has no nodes");
  if (g.target.empty()) throw FormatError(where + ": graph has no target");
  return g;
}

void check_splits(const DatasetMeta& meta, std::size_t num_graphs) {
  if (meta.train.empty() || meta.valid.empty() || meta.test.empty()) {
    throw ContractError("dataset splits: all three splits are required");
  }
  std::vector<bool> seen(num_graphs, false);
  auto mark = [&](const std::vector<std::size_t>& ids, const char* name) {
    for (std::size_t i : ids) {
      if (i >= num_graphs) {
        throw ContractError(std::string("dataset splits: ") + name + " index out of range");
      }
      if (seen[i]) throw ContractError("dataset splits: index assigned twice");
      seen[i] = true;
    }
  };
  mark(meta.train, "train");
  mark(meta.valid, "valid");
  mark(meta.test, "test");
  for (bool b : seen) {
    if (!b) throw ContractError("dataset splits: not a partition of the examples");
  }
}

}  // namespace

const std::vector<std::size_t>& Dataset::split(const std::string& name) const {
  if (name == "train") return meta.train;
  if (name == "valid") return meta.valid;
  if (name == "test") return meta.test;
  throw ContractError("unknown split '" + name + "'");
}

Dataset build_dataset(const std::vector<RawFunction>& functions, std::size_t num_files,
                      std::size_t target_cap, std::size_t attr_cap, std::int32_t depth_cap,
                      std::uint64_t split_seed) {
  if (functions.empty()) throw ContractError("build_dataset: empty corpus");
  if (num_files < 3) throw ContractError("build_dataset: need at least three source files");
  if (depth_cap < 1) throw ContractError("build_dataset: depth cap must be positive");

  // File-level split, 80/10/10 with every split non-empty.
  std::vector<std::size_t> file_order(num_files);
  for (std::size_t i = 0; i < num_files; ++i) file_order[i] = i;
  Rng rng(split_seed);
  rng.shuffle(file_order.begin(), file_order.end());
  std::size_t n_valid = std::max<std::size_t>(1, num_files / 10);
  std::size_t n_test = std::max<std::size_t>(1, num_files / 10);
  if (n_valid + n_test >= num_files) {
    n_valid = 1;
    n_test = 1;
  }
  enum Split { kTrain, kValid, kTest };
  std::vector<Split> file_split(num_files, kTrain);
  for (std::size_t i = 0; i < n_valid; ++i) file_split[file_order[i]] = kValid;
  for (std::size_t i = 0; i < n_test; ++i) file_split[file_order[n_valid + i]] = kTest;

  DatasetMeta meta;
  meta.format_version = kDatasetFormatVersion;
  meta.target_cap = target_cap;
  meta.attr_cap = attr_cap;
  meta.depth_cap = depth_cap;
  meta.split_seed = split_seed;

  std::unordered_map<std::string, std::size_t> target_freq;
  std::unordered_map<std::string, std::size_t> attr_freq;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    const RawFunction& f = functions[i];
    if (f.file_index >= num_files) {
      throw ContractError("build_dataset: file index out of range");
    }
    switch (file_split[f.file_index]) {
      case kTrain: meta.train.push_back(i); break;
      case kValid: meta.valid.push_back(i); break;
      case kTest: meta.test.push_back(i); break;
    }
    if (file_split[f.file_index] != kTrain) continue;
    for (const auto& tok : tokenize_name(f.ast.name)) ++target_freq[tok];
    for (const auto& node : f.ast.nodes) ++attr_freq[node.attribute];
  }
  if (meta.train.empty() || meta.valid.empty() || meta.test.empty()) {
    throw ContractError("build_dataset: a split received no functions");
  }

  Dataset ds;
  ds.meta = std::move(meta);
  ds.target_vocab = Vocabulary::build(target_freq, target_cap);
  ds.attr_vocab = Vocabulary::build(attr_freq, attr_cap);
  ds.type_vocab = Vocabulary::from_tokens(ast_node_types());

  ds.graphs.reserve(functions.size());
  for (const RawFunction& f : functions) {
    ds.graphs.push_back(
        encode_function(f.ast, ds.type_vocab, ds.attr_vocab, depth_cap, f.provenance));
  }
  return ds;
}

ProgramGraph encode_function(const FunctionAst& ast, const Vocabulary& type_vocab,
                             const Vocabulary& attr_vocab, std::int32_t depth_cap,
                             std::string provenance) {
  ProgramGraph g;
  g.provenance = std::move(provenance);
  g.target = tokenize_name(ast.name);
  g.nodes.reserve(ast.nodes.size());
  for (const AstNode& node : ast.nodes) {
    const std::int32_t depth_id = std::min(node.depth, depth_cap);
    g.nodes.push_back(
        {depth_id, type_vocab.encode(node.node_type), attr_vocab.encode(node.attribute)});
  }
  g.edges = augment_edges(ast.ast_edges, ast.leaf_ids);
  return g;
}

CorpusScan scan_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".py") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  CorpusScan scan;
  scan.files_total = files.size();
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      auto functions = parse_module(ss.str());
      for (auto& fn : functions) {
        RawFunction raw;
        raw.provenance = path.filename().string() + ":" + fn.name;
        raw.ast = std::move(fn);
        raw.file_index = scan.files_parsed;
        scan.functions.push_back(std::move(raw));
      }
      ++scan.files_parsed;
    } catch (const Error& e) {
      ++scan.files_failed;
      scan.failures.push_back(path.filename().string() + ": " + e.what());
    }
  }
  return scan;
}

CorpusStats corpus_stats(const Dataset& dataset) {
  CorpusStats stats;
  stats.graphs = dataset.graphs.size();
  if (stats.graphs == 0) return stats;
  double nodes = 0.0;
  double edges = 0.0;
  double target = 0.0;
  for (const auto& g : dataset.graphs) {
    nodes += static_cast<double>(g.nodes.size());
    edges += static_cast<double>(g.edges.size());
    target += static_cast<double>(g.target.size());
  }
  stats.nodes_mean = nodes / static_cast<double>(stats.graphs);
  stats.edges_mean = edges / static_cast<double>(stats.graphs);
  stats.target_len_mean = target / static_cast<double>(stats.graphs);
  return stats;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  check_splits(dataset.meta, dataset.graphs.size());
  fs::create_directories(dir);
  const fs::path root(dir);

  std::vector<std::string> graph_lines;
  graph_lines.reserve(dataset.graphs.size());
  for (const auto& g : dataset.graphs) graph_lines.push_back(graph_to_line(g));
  write_lines(root / "graphs.txt", graph_lines);

  write_lines(root / "vocab.target.txt", dataset.target_vocab.to_lines());
  write_lines(root / "vocab.attr.txt", dataset.attr_vocab.to_lines());
  write_lines(root / "vocab.type.txt", dataset.type_vocab.to_lines());

  std::vector<std::string> meta_lines = {
      "version=" + std::to_string(dataset.meta.format_version),
      "target_cap=" + std::to_string(dataset.meta.target_cap),
      "attr_cap=" + std::to_string(dataset.meta.attr_cap),
      "depth_cap=" + std::to_string(dataset.meta.depth_cap),
      "split_seed=" + std::to_string(dataset.meta.split_seed),
      "train=" + join_ids(dataset.meta.train),
      "valid=" + join_ids(dataset.meta.valid),
      "test=" + join_ids(dataset.meta.test),
  };
  write_lines(root / "meta.txt", meta_lines);
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  Dataset ds;

  const auto meta_lines = read_lines(root / "meta.txt");
  std::unordered_map<std::string, std::string> kv;
  for (std::size_t i = 0; i < meta_lines.size(); ++i) {
    if (meta_lines[i].empty()) continue;
    const auto pos = meta_lines[i].find('=');
    if (pos == std::string::npos) {
      throw FormatError("meta.txt:" + std::to_string(i + 1) + ": expected key=value");
    }
    kv[meta_lines[i].substr(0, pos)] = meta_lines[i].substr(pos + 1);
  }
  for (const char* key : {"version", "target_cap", "attr_cap", "depth_cap", "split_seed",
                          "train", "valid", "test"}) {
    if (kv.find(key) == kv.end()) {
      throw FormatError(std::string("meta.txt: missing key '") + key + "'");
    }
  }
  ds.meta.format_version = parse_i32(kv["version"], "meta.txt");
  if (ds.meta.format_version != kDatasetFormatVersion) {
    throw FormatError("meta.txt: dataset format version " +
                      std::to_string(ds.meta.format_version) + " is not supported (expected " +
                      std::to_string(kDatasetFormatVersion) + ")");
  }
  ds.meta.target_cap = static_cast<std::size_t>(parse_i32(kv["target_cap"], "meta.txt"));
  ds.meta.attr_cap = static_cast<std::size_t>(parse_i32(kv["attr_cap"], "meta.txt"));
  ds.meta.depth_cap = parse_i32(kv["depth_cap"], "meta.txt");
  ds.meta.split_seed = parse_u64(kv["split_seed"], "meta.txt");
  ds.meta.train = parse_id_list(kv["train"], "meta.txt");
  ds.meta.valid = parse_id_list(kv["valid"], "meta.txt");
  ds.meta.test = parse_id_list(kv["test"], "meta.txt");

  ds.target_vocab = Vocabulary::from_lines(read_lines(root / "vocab.target.txt"));
  ds.attr_vocab = Vocabulary::from_lines(read_lines(root / "vocab.attr.txt"));
  ds.type_vocab = Vocabulary::from_lines(read_lines(root / "vocab.type.txt"));

  const auto graph_lines = read_lines(root / "graphs.txt");
  ds.graphs.reserve(graph_lines.size());
  for (std::size_t i = 0; i < graph_lines.size(); ++i) {
    ds.graphs.push_back(
        graph_from_line(graph_lines[i], "graphs.txt:" + std::to_string(i + 1)));
  }
  check_splits(ds.meta, ds.graphs.size());
  return ds;
}

}  // namespace g2s
