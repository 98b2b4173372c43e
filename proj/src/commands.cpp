#include "g2s/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "g2s/dataset.hpp"
#include "g2s/gradcheck.hpp"
#include "g2s/metrics.hpp"
#include "g2s/parser.hpp"
#include "g2s/subtoken.hpp"
#include "g2s/trainer.hpp"
#include "g2s/version.hpp"

namespace fs = std::filesystem;

namespace g2s {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ContractError(message);
}

TrainConfig train_config_from(const CliConfig& cfg, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr = cfg.lr;
  tc.schedule.decay_factor = cfg.decay_factor;
  tc.schedule.patience = cfg.patience;
  tc.schedule.min_lr = cfg.min_lr;
  tc.seed = seed;
  tc.max_len = static_cast<std::size_t>(cfg.max_len);
  tc.validate();
  return tc;
}

ModelConfig model_config_for_dataset(const CliConfig& cfg, const Dataset& ds) {
  return cfg.model_config(static_cast<std::size_t>(ds.meta.depth_cap) + 1,
                          ds.type_vocab.size(), ds.attr_vocab.size(),
                          ds.target_vocab.size());
}

struct LoadedModel {
  Model<float> model;
  CheckpointMeta meta;
};

LoadedModel load_model(const std::string& checkpoint_path) {
  auto loaded = load_checkpoint<float>(checkpoint_path);
  const ModelConfig cfg = model_config_from_checkpoint_text(loaded.meta.config_text);
  LoadedModel out{Model<float>(cfg), std::move(loaded.meta)};
  out.model.init(0);
  const auto live = out.model.params();
  ad::ParamMap<float> stored(loaded.tensors.begin(),
                             loaded.tensors.begin() +
                                 static_cast<std::ptrdiff_t>(live.size()));
  restore_params<float>(stored, live);
  return out;
}

void write_scores(const fs::path& path, const SplitEvaluation& eval) {
  std::string text;
  for (const auto& ex : eval.examples) {
    text += std::to_string(ex.index);
    text += '\t';
    for (std::size_t i = 0; i < ex.decoded.size(); ++i) {
      if (i > 0) text += ' ';
      text += ex.decoded[i];
    }
    text += '\t';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", ex.f1);
    text += buf;
    text += '\n';
  }
  write_text(path, text);
}

// Per-seed test scores for a training run directory (seed*/best.ckpt).
std::vector<double> evaluate_run_dir(const std::string& run_dir, const Dataset& ds,
                                     const std::string& split) {
  std::vector<fs::path> seed_dirs;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    if (entry.is_directory() &&
        entry.path().filename().string().rfind("seed", 0) == 0) {
      seed_dirs.push_back(entry.path());
    }
  }
  std::sort(seed_dirs.begin(), seed_dirs.end());
  require(!seed_dirs.empty(), "no seed directories under " + run_dir);
  std::vector<double> scores;
  for (const auto& dir : seed_dirs) {
    const auto ckpt = dir / "best.ckpt";
    require(fs::exists(ckpt), "missing checkpoint " + ckpt.string());
    auto loaded = load_model(ckpt.string());
    const auto eval = evaluate_split<float>(loaded.model, ds, ds.split(split));
    write_scores(dir / ("scores." + split + ".txt"), eval);
    scores.push_back(eval.mean_f1);
    log_info(dir.filename().string() + " " + split +
             " F1 = " + std::to_string(eval.mean_f1));
  }
  return scores;
}

std::string report_text(const RunReport& report, const std::string& label) {
  char buf[256];
  if (report.stddev.has_value()) {
    std::snprintf(buf, sizeof(buf), "%s: n=%zu mean_f1=%.6f std=%.6f", label.c_str(),
                  report.per_seed.size(), report.mean, *report.stddev);
  } else {
    std::snprintf(buf, sizeof(buf), "%s: n=%zu mean_f1=%.6f std=n/a", label.c_str(),
                  report.per_seed.size(), report.mean);
  }
  return buf;
}

}  // namespace

int cmd_preprocess(const CliConfig& cfg) {
  require(!cfg.corpus_dir.empty(), "preprocess needs a corpus directory (--corpus)");
  require(!cfg.dataset_dir.empty(), "preprocess needs an output dataset directory (--dataset)");

  const CorpusScan scan = scan_corpus(cfg.corpus_dir);
  for (const auto& failure : scan.failures) log_info("skipped " + failure);
  if (scan.functions.empty()) {
    throw ContractError("no parseable functions in " + cfg.corpus_dir + " (" +
                        std::to_string(scan.files_failed) + " files failed)");
  }
  const Dataset ds =
      build_dataset(scan.functions, scan.files_parsed, cfg.target_cap, cfg.attr_cap,
                    cfg.depth_cap, cfg.split_seed);
  save_dataset(ds, cfg.dataset_dir);
  write_text(fs::path(cfg.dataset_dir) / "config.resolved.ini", cfg.resolved_text());

  const CorpusStats stats = corpus_stats(ds);
  std::printf("graphs=%zu nodes_mean=%.4f edges_mean=%.4f target_len_mean=%.4f\n",
              stats.graphs, stats.nodes_mean, stats.edges_mean, stats.target_len_mean);
  std::printf("files=%zu parsed=%zu failed=%zu train=%zu valid=%zu test=%zu\n",
              scan.files_total, scan.files_parsed, scan.files_failed,
              ds.meta.train.size(), ds.meta.valid.size(), ds.meta.test.size());
  return 0;
}

int cmd_train(const CliConfig& cfg) {
  require(!cfg.dataset_dir.empty(), "train needs a dataset directory (--dataset)");
  require(!cfg.out_dir.empty(), "train needs an output directory (--out)");
  require(!cfg.seeds.empty(), "train needs at least one seed");

  const Dataset ds = load_dataset(cfg.dataset_dir);
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config.resolved.ini", cfg.resolved_text());

  std::vector<double> best_scores;
  bool reported_params = false;
  for (const std::uint64_t seed : cfg.seeds) {
    Model<float> model(model_config_for_dataset(cfg, ds));
    model.init(seed);
    if (!reported_params) {
      log_info("model parameters: " + std::to_string(model.param_count()));
      reported_params = true;
    }
    const auto seed_dir = fs::path(cfg.out_dir) / ("seed" + std::to_string(seed));
    const auto result =
        fit<float>(model, ds, train_config_from(cfg, seed), seed_dir.string(), cfg.resume);
    best_scores.push_back(result.best_valid_f1);
    log_info("seed " + std::to_string(seed) +
             " best valid F1 = " + std::to_string(result.best_valid_f1));
  }

  const RunReport report = aggregate_runs(best_scores);
  const std::string text = report_text(report, "valid");
  std::printf("%s\n", text.c_str());
  write_text(fs::path(cfg.out_dir) / "report.txt", text + "\n");
  return 0;
}

int cmd_evaluate(const CliConfig& cfg) {
  require(!cfg.dataset_dir.empty(), "evaluate needs a dataset directory (--dataset)");
  const Dataset ds = load_dataset(cfg.dataset_dir);

  if (!cfg.checkpoint.empty()) {
    auto loaded = load_model(cfg.checkpoint);
    const auto eval = evaluate_split<float>(loaded.model, ds, ds.split(cfg.split));
    const auto scores_path =
        fs::path(cfg.checkpoint).parent_path() / ("scores." + cfg.split + ".txt");
    write_scores(scores_path, eval);
    std::printf("split=%s n=%zu mean_f1=%.6f\n", cfg.split.c_str(), eval.examples.size(),
                eval.mean_f1);
    return 0;
  }

  require(!cfg.out_dir.empty(),
          "evaluate needs --checkpoint or a run directory (--out), optionally --compare");
  const auto scores_a = evaluate_run_dir(cfg.out_dir, ds, cfg.split);
  const RunReport report_a = aggregate_runs(scores_a);
  std::string text = report_text(report_a, "run_a[" + cfg.out_dir + "] " + cfg.split);
  if (!cfg.compare_dir.empty()) {
    const auto scores_b = evaluate_run_dir(cfg.compare_dir, ds, cfg.split);
    const RunReport report_b = aggregate_runs(scores_b);
    text += "\n" + report_text(report_b, "run_b[" + cfg.compare_dir + "] " + cfg.split);
    const Comparison cmp = compare_runs(scores_a, scores_b);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "\ncomparison (welch two-sided): t=%.4f dof=%.2f p=%.6g cohens_d=%.4f",
                  cmp.t_stat, cmp.dof, cmp.p_value, cmp.cohens_d);
    text += buf;
  }
  std::printf("%s\n", text.c_str());
  write_text(fs::path(cfg.out_dir) / ("report." + cfg.split + ".txt"), text + "\n");
  return 0;
}

int cmd_predict(const CliConfig& cfg) {
  require(!cfg.dataset_dir.empty(), "predict needs a dataset directory (--dataset)");
  require(!cfg.checkpoint.empty(), "predict needs a checkpoint (--checkpoint)");
  require(!cfg.source_file.empty(), "predict needs a source file (--source)");

  const Dataset ds = load_dataset(cfg.dataset_dir);
  std::ifstream in(cfg.source_file, std::ios::binary);
  if (!in) throw IoError("cannot read " + cfg.source_file);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto functions = parse_module(ss.str());
  const FunctionAst& fn = functions.front();
  const ProgramGraph graph = encode_function(fn, ds.type_vocab, ds.attr_vocab,
                                             ds.meta.depth_cap, cfg.source_file);

  auto loaded = load_model(cfg.checkpoint);
  const auto& enc_cfg = loaded.model.config().encoder;
  require(enc_cfg.type_vocab == ds.type_vocab.size() &&
              enc_cfg.attr_vocab == ds.attr_vocab.size() &&
              loaded.model.config().target_vocab == ds.target_vocab.size(),
          "checkpoint vocabularies do not match the dataset");

  const auto decoded = loaded.model.decode_graph(graph);
  std::string name;
  for (std::size_t i = 0; i < decoded.ids.size(); ++i) {
    if (i > 0) name += '_';
    name += ds.target_vocab.decode(decoded.ids[i]);
  }
  std::printf("%s\n", name.c_str());
  return 0;
}

namespace {

// Small random AST-shaped graphs for the self check.
ProgramGraph gradcheck_graph(Rng& rng, const ModelConfig& cfg) {
  const std::size_t n = 4 + rng.below(6);
  std::vector<std::pair<std::int32_t, std::int32_t>> ast;
  std::vector<std::int32_t> depth(n, 0);
  std::set<std::int32_t> parents;
  for (std::size_t i = 1; i < n; ++i) {
    const auto parent = static_cast<std::int32_t>(rng.below(i));
    ast.emplace_back(parent, static_cast<std::int32_t>(i));
    depth[i] = depth[static_cast<std::size_t>(parent)] + 1;
    parents.insert(parent);
  }
  std::vector<std::int32_t> leaves;
  for (std::size_t i = 0; i < n; ++i) {
    if (!parents.count(static_cast<std::int32_t>(i))) {
      leaves.push_back(static_cast<std::int32_t>(i));
    }
  }
  ProgramGraph g;
  g.provenance = "gradcheck";
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back(
        {std::min<std::int32_t>(depth[i],
                                static_cast<std::int32_t>(cfg.encoder.depth_vocab) - 1),
         static_cast<std::int32_t>(rng.below(cfg.encoder.type_vocab)),
         static_cast<std::int32_t>(rng.below(cfg.encoder.attr_vocab))});
  }
  g.edges = augment_edges(ast, leaves);
  g.target = {"t"};
  return g;
}

double run_gradcheck_for(DecoderKind kind, const GradcheckOptions& options) {
  ModelConfig cfg;
  cfg.encoder.num_layers = options.layers;
  cfg.encoder.hidden_dim = options.hidden_dim;
  cfg.encoder.residual = true;
  cfg.encoder.graph_norm = kind == DecoderKind::kLstm;  // cover both paths
  cfg.encoder.dropout_p = 0.0;
  cfg.encoder.depth_vocab = 6;
  cfg.encoder.type_vocab = 10;
  cfg.encoder.attr_vocab = 12;
  cfg.decoder = kind;
  cfg.target_vocab = 9;
  cfg.max_len = 5;

  Model<double> model(cfg);
  model.init(2024);
  auto params = model.params();
  Rng rng(99);
  ad::jitter_params(params, rng);

  std::vector<ProgramGraph> graphs;
  for (int i = 0; i < 3; ++i) graphs.push_back(gradcheck_graph(rng, cfg));
  std::vector<const ProgramGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  const auto batch = batch_graphs(ptrs);
  std::vector<ad::IdList> cols;
  {
    std::vector<std::vector<std::int32_t>> raw(cfg.max_len,
                                               std::vector<std::int32_t>(ptrs.size()));
    for (std::size_t b = 0; b < ptrs.size(); ++b) {
      for (std::size_t i = 0; i < cfg.max_len; ++i) {
        raw[i][b] = static_cast<std::int32_t>(3 + rng.below(cfg.target_vocab - 3));
      }
    }
    for (auto& c : raw) cols.push_back(ad::make_ids(std::move(c)));
  }

  const ad::Tensor<double> spy = params[0].second;
  auto f = [&](ad::Tape<double>* tape) {
    const auto probs = model.forward(tape, batch, &cols, nullptr, false);
    auto loss = sequence_loss<double>(tape, probs, cols).value;
    if (options.corrupt) {
      // untracked dependence on a parameter: the tape cannot see it
      auto ghost = ad::Tensor<double>::scalar(0.05 * spy.values()[0]);
      loss = ad::add(tape, loss, ghost);
    }
    return loss;
  };

  const auto per_param = ad::grad_check_per_param<double>(f, params, 1e-5, 1e-6);
  double worst = 0.0;
  for (const auto& [name, err] : per_param) {
    std::printf("gradcheck decoder=%s param=%-22s max_rel_err=%.3e\n", decoder_name(kind),
                name.c_str(), err);
    worst = std::max(worst, err);
  }
  std::printf("gradcheck decoder=%s overall max_rel_err=%.3e\n", decoder_name(kind), worst);
  return worst;
}

}  // namespace

int cmd_gradcheck(const GradcheckOptions& options) {
  if (options.dropout > 0.0) {
    std::printf(
        "gradcheck refuses to run with dropout enabled: the forward pass would be "
        "non-deterministic and finite differences meaningless. Set --dropout 0.\n");
    return 2;
  }
  std::vector<DecoderKind> kinds;
  if (options.decoder == "both") {
    kinds = {DecoderKind::kLinear, DecoderKind::kLstm};
  } else if (options.decoder == "linear") {
    kinds = {DecoderKind::kLinear};
  } else if (options.decoder == "lstm") {
    kinds = {DecoderKind::kLstm};
  } else {
    throw FormatError("gradcheck: unknown decoder '" + options.decoder + "'");
  }
  double worst = 0.0;
  for (const auto kind : kinds) worst = std::max(worst, run_gradcheck_for(kind, options));
  const bool ok = worst < options.tolerance;
  std::printf("gradcheck %s: max_rel_err=%.3e tolerance=%.1e\n", ok ? "PASS" : "FAIL",
              worst, options.tolerance);
  return ok ? 0 : 1;
}

}  // namespace g2s
