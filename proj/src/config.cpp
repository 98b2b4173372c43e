#include "g2s/config.hpp"

#include <fstream>
#include <sstream>

#include "g2s/common.hpp"
#include "g2s/version.hpp"

namespace g2s {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

int to_int(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw FormatError(where + ": expected an integer, got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw FormatError(where + ": expected a number, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw FormatError(where + ": expected an unsigned integer, got '" + v + "'");
  }
}

std::string bool_text(bool v) { return v ? "on" : "off"; }

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

bool parse_bool(const std::string& value, const std::string& where) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw FormatError(where + ": expected on/off, got '" + value + "'");
}

IniDoc::Section& IniDoc::section(const std::string& name) {
  for (auto& s : sections_) {
    if (s.name == name) return s;
  }
  sections_.push_back({name, {}});
  return sections_.back();
}

void IniDoc::set(const std::string& section_name, const std::string& key,
                 const std::string& value) {
  auto& s = section(section_name);
  for (auto& [k, v] : s.entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  s.entries.emplace_back(key, value);
}

std::optional<std::string> IniDoc::get(const std::string& section_name,
                                       const std::string& key) const {
  for (const auto& s : sections_) {
    if (s.name != section_name) continue;
    for (const auto& [k, v] : s.entries) {
      if (k == key) return v;
    }
  }
  return std::nullopt;
}

bool IniDoc::has(const std::string& section_name, const std::string& key) const {
  return get(section_name, key).has_value();
}

std::string IniDoc::to_text() const {
  std::string out;
  for (const auto& s : sections_) {
    out += "[" + s.name + "]\n";
    for (const auto& [k, v] : s.entries) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

IniDoc IniDoc::parse(const std::string& text) {
  IniDoc doc;
  std::istringstream in(text);
  std::string line;
  std::string current;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw FormatError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      current = trim(t.substr(1, t.size() - 2));
      doc.section(current);
      continue;
    }
    const auto pos = t.find('=');
    if (pos == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    if (current.empty()) {
      throw FormatError("config line " + std::to_string(line_no) +
                        ": key outside any [section]");
    }
    doc.set(current, trim(t.substr(0, pos)), trim(t.substr(pos + 1)));
  }
  return doc;
}

IniDoc IniDoc::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

DecoderKind CliConfig::decoder_kind() const {
  if (decoder == "linear") return DecoderKind::kLinear;
  if (decoder == "lstm") return DecoderKind::kLstm;
  throw FormatError("unknown decoder kind '" + decoder + "' (expected linear or lstm)");
}

PoolMode CliConfig::pool_mode() const {
  if (pooling == "mlap") return PoolMode::kMlap;
  if (pooling == "last") return PoolMode::kLastLayer;
  throw FormatError("unknown pooling mode '" + pooling + "' (expected mlap or last)");
}

// Per-decoder defaults: linear -> 6 layers, residual, no graph norm;
// lstm -> 5 layers, residual, graph norm.
int CliConfig::resolved_layers() const {
  if (layers.has_value()) return *layers;
  return decoder_kind() == DecoderKind::kLinear ? 6 : 5;
}

bool CliConfig::resolved_residual() const { return residual.value_or(true); }

bool CliConfig::resolved_graphnorm() const {
  if (graphnorm.has_value()) return *graphnorm;
  return decoder_kind() == DecoderKind::kLstm;
}

ModelConfig CliConfig::model_config(std::size_t depth_vocab, std::size_t type_vocab,
                                    std::size_t attr_vocab,
                                    std::size_t target_vocab) const {
  ModelConfig cfg;
  cfg.encoder.num_layers = resolved_layers();
  cfg.encoder.hidden_dim = hidden_dim;
  cfg.encoder.residual = resolved_residual();
  cfg.encoder.graph_norm = resolved_graphnorm();
  cfg.encoder.dropout_p = dropout;
  cfg.encoder.pool = pool_mode();
  cfg.encoder.depth_vocab = depth_vocab;
  cfg.encoder.type_vocab = type_vocab;
  cfg.encoder.attr_vocab = attr_vocab;
  cfg.decoder = decoder_kind();
  cfg.target_vocab = target_vocab;
  cfg.max_len = static_cast<std::size_t>(max_len);
  cfg.teacher_forcing = teacher_forcing;
  cfg.validate();
  return cfg;
}

void CliConfig::apply_file(const IniDoc& doc) {
  auto str = [&](const char* s, const char* k, std::string& dst) {
    if (auto v = doc.get(s, k)) dst = *v;
  };
  str("paths", "corpus", corpus_dir);
  str("paths", "dataset", dataset_dir);
  str("paths", "checkpoint", checkpoint);
  str("paths", "out", out_dir);
  str("paths", "source", source_file);
  str("paths", "compare", compare_dir);
  str("paths", "split", split);

  if (auto v = doc.get("data", "target_cap")) target_cap = to_u64(*v, "data.target_cap");
  if (auto v = doc.get("data", "attr_cap")) attr_cap = to_u64(*v, "data.attr_cap");
  if (auto v = doc.get("data", "depth_cap")) depth_cap = to_int(*v, "data.depth_cap");
  if (auto v = doc.get("data", "split_seed")) split_seed = to_u64(*v, "data.split_seed");

  str("model", "decoder", decoder);
  if (auto v = doc.get("model", "layers")) layers = to_int(*v, "model.layers");
  if (auto v = doc.get("model", "residual")) residual = parse_bool(*v, "model.residual");
  if (auto v = doc.get("model", "graphnorm")) graphnorm = parse_bool(*v, "model.graphnorm");
  if (auto v = doc.get("model", "hidden_dim")) hidden_dim = to_int(*v, "model.hidden_dim");
  if (auto v = doc.get("model", "dropout")) dropout = to_double(*v, "model.dropout");
  str("model", "pooling", pooling);
  if (auto v = doc.get("model", "teacher_forcing")) {
    teacher_forcing = parse_bool(*v, "model.teacher_forcing");
  }

  if (auto v = doc.get("train", "epochs")) epochs = to_int(*v, "train.epochs");
  if (auto v = doc.get("train", "batch_size")) batch_size = to_int(*v, "train.batch_size");
  if (auto v = doc.get("train", "lr")) lr = to_double(*v, "train.lr");
  if (auto v = doc.get("train", "decay_factor")) {
    decay_factor = to_double(*v, "train.decay_factor");
  }
  if (auto v = doc.get("train", "patience")) patience = to_int(*v, "train.patience");
  if (auto v = doc.get("train", "min_lr")) min_lr = to_double(*v, "train.min_lr");
  if (auto v = doc.get("train", "max_len")) max_len = to_int(*v, "train.max_len");
  if (auto v = doc.get("train", "seeds")) {
    seeds.clear();
    std::istringstream ss(*v);
    std::string tok;
    while (ss >> tok) seeds.push_back(to_u64(tok, "train.seeds"));
    if (seeds.empty()) throw FormatError("train.seeds: expected at least one seed");
  }
}

std::string CliConfig::resolved_text() const {
  IniDoc doc;
  doc.set("paths", "corpus", corpus_dir);
  doc.set("paths", "dataset", dataset_dir);
  doc.set("paths", "checkpoint", checkpoint);
  doc.set("paths", "out", out_dir);
  doc.set("paths", "source", source_file);
  doc.set("paths", "compare", compare_dir);
  doc.set("paths", "split", split);
  doc.set("data", "target_cap", std::to_string(target_cap));
  doc.set("data", "attr_cap", std::to_string(attr_cap));
  doc.set("data", "depth_cap", std::to_string(depth_cap));
  doc.set("data", "split_seed", std::to_string(split_seed));
  doc.set("model", "decoder", decoder);
  doc.set("model", "layers", std::to_string(resolved_layers()));
  doc.set("model", "residual", bool_text(resolved_residual()));
  doc.set("model", "graphnorm", bool_text(resolved_graphnorm()));
  doc.set("model", "hidden_dim", std::to_string(hidden_dim));
  doc.set("model", "dropout", format_double(dropout));
  doc.set("model", "pooling", pooling);
  doc.set("model", "teacher_forcing", bool_text(teacher_forcing));
  doc.set("train", "epochs", std::to_string(epochs));
  doc.set("train", "batch_size", std::to_string(batch_size));
  doc.set("train", "lr", format_double(lr));
  doc.set("train", "decay_factor", format_double(decay_factor));
  doc.set("train", "patience", std::to_string(patience));
  doc.set("train", "min_lr", format_double(min_lr));
  doc.set("train", "max_len", std::to_string(max_len));
  std::string seed_text;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i > 0) seed_text += ' ';
    seed_text += std::to_string(seeds[i]);
  }
  doc.set("train", "seeds", seed_text);
  return "# g2s " + std::string(kVersion) + "\n" + doc.to_text();
}

std::string checkpoint_config_text(const ModelConfig& model, double initial_lr,
                                   int batch_size, std::uint64_t seed) {
  IniDoc doc;
  doc.set("model", "decoder", decoder_name(model.decoder));
  doc.set("model", "layers", std::to_string(model.encoder.num_layers));
  doc.set("model", "hidden_dim", std::to_string(model.encoder.hidden_dim));
  doc.set("model", "residual", bool_text(model.encoder.residual));
  doc.set("model", "graphnorm", bool_text(model.encoder.graph_norm));
  doc.set("model", "dropout", format_double(model.encoder.dropout_p));
  doc.set("model", "pooling", model.encoder.pool == PoolMode::kMlap ? "mlap" : "last");
  doc.set("model", "depth_vocab", std::to_string(model.encoder.depth_vocab));
  doc.set("model", "type_vocab", std::to_string(model.encoder.type_vocab));
  doc.set("model", "attr_vocab", std::to_string(model.encoder.attr_vocab));
  doc.set("model", "target_vocab", std::to_string(model.target_vocab));
  doc.set("model", "max_len", std::to_string(model.max_len));
  doc.set("model", "teacher_forcing", bool_text(model.teacher_forcing));
  doc.set("train", "lr", format_double(initial_lr));
  doc.set("train", "batch_size", std::to_string(batch_size));
  doc.set("train", "seed", std::to_string(seed));
  return doc.to_text();
}

ModelConfig model_config_from_checkpoint_text(const std::string& text) {
  const IniDoc doc = IniDoc::parse(text);
  auto need = [&](const char* key) {
    auto v = doc.get("model", key);
    if (!v) throw FormatError(std::string("checkpoint config: missing model.") + key);
    return *v;
  };
  ModelConfig cfg;
  const std::string dec = need("decoder");
  if (dec == "linear") {
    cfg.decoder = DecoderKind::kLinear;
  } else if (dec == "lstm") {
    cfg.decoder = DecoderKind::kLstm;
  } else {
    throw FormatError("checkpoint config: unknown decoder '" + dec + "'");
  }
  cfg.encoder.num_layers = to_int(need("layers"), "model.layers");
  cfg.encoder.hidden_dim = to_int(need("hidden_dim"), "model.hidden_dim");
  cfg.encoder.residual = parse_bool(need("residual"), "model.residual");
  cfg.encoder.graph_norm = parse_bool(need("graphnorm"), "model.graphnorm");
  cfg.encoder.dropout_p = to_double(need("dropout"), "model.dropout");
  const std::string pool = need("pooling");
  if (pool == "mlap") {
    cfg.encoder.pool = PoolMode::kMlap;
  } else if (pool == "last") {
    cfg.encoder.pool = PoolMode::kLastLayer;
  } else {
    throw FormatError("checkpoint config: unknown pooling '" + pool + "'");
  }
  cfg.encoder.depth_vocab = to_u64(need("depth_vocab"), "model.depth_vocab");
  cfg.encoder.type_vocab = to_u64(need("type_vocab"), "model.type_vocab");
  cfg.encoder.attr_vocab = to_u64(need("attr_vocab"), "model.attr_vocab");
  cfg.target_vocab = to_u64(need("target_vocab"), "model.target_vocab");
  cfg.max_len = to_u64(need("max_len"), "model.max_len");
  cfg.teacher_forcing = parse_bool(need("teacher_forcing"), "model.teacher_forcing");
  cfg.validate();
  return cfg;
}

}  // namespace g2s
