#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "g2s/model.hpp"

namespace g2s {

// Sectioned key=value text ([section] headers, # comments). Order-preserving
// so the echoed configuration is byte-stable.
class IniDoc {
 public:
  void set(const std::string& section, const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  bool has(const std::string& section, const std::string& key) const;

  std::string to_text() const;
  static IniDoc parse(const std::string& text);
  static IniDoc parse_file(const std::string& path);

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections_;
  Section& section(const std::string& name);
};

// Resolved settings for one run: config file values overridden by flags.
struct CliConfig {
  // paths
  std::string corpus_dir;
  std::string dataset_dir;
  std::string checkpoint;
  std::string out_dir;
  std::string source_file;
  std::string compare_dir;
  std::string split = "test";
  bool resume = false;

  // preprocessing
  std::size_t target_cap = 5000;
  std::size_t attr_cap = 10000;
  std::int32_t depth_cap = 20;
  std::uint64_t split_seed = 13;

  // model; layers/residual/graphnorm default per decoder kind
  std::string decoder = "linear";
  std::optional<int> layers;
  std::optional<bool> residual;
  std::optional<bool> graphnorm;
  int hidden_dim = 300;
  double dropout = 0.1;
  std::string pooling = "mlap";
  bool teacher_forcing = false;

  // training
  int epochs = 50;
  int batch_size = 256;
  double lr = 5e-4;
  double decay_factor = 0.2;
  int patience = 3;
  double min_lr = 1e-6;
  int max_len = 5;
  std::vector<std::uint64_t> seeds = {0};

  DecoderKind decoder_kind() const;
  PoolMode pool_mode() const;
  int resolved_layers() const;
  bool resolved_residual() const;
  bool resolved_graphnorm() const;

  // Builds the model configuration given the dataset's vocabulary sizes.
  ModelConfig model_config(std::size_t depth_vocab, std::size_t type_vocab,
                           std::size_t attr_vocab, std::size_t target_vocab) const;

  void apply_file(const IniDoc& doc);  // file values for keys not yet overridden
  std::string resolved_text() const;   // echoed into run directories
};

// Model/train configuration block stored in checkpoints.
std::string checkpoint_config_text(const ModelConfig& model, double initial_lr,
                                   int batch_size, std::uint64_t seed);
ModelConfig model_config_from_checkpoint_text(const std::string& text);

bool parse_bool(const std::string& value, const std::string& where);

}  // namespace g2s
