#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "g2s/commands.hpp"
#include "g2s/common.hpp"
#include "g2s/version.hpp"

namespace {

// Registers the flags shared by the data/model/train subcommands. Values are
// resolved in three layers: built-in defaults, then the --config file, then
// explicit flags.
struct FlagSet {
  std::string config_path;
  std::string residual_text;
  std::string graphnorm_text;
  std::string seeds_text;
  g2s::CliConfig cfg;

  void add_common(CLI::App* app) {
    app->add_option("--config", config_path, "configuration file (ini sections)");
    app->add_option("--dataset", cfg.dataset_dir, "dataset directory");
    app->add_option("--out", cfg.out_dir, "output directory");
  }

  void add_model_flags(CLI::App* app) {
    app->add_option("--decoder", cfg.decoder, "decoder kind: linear or lstm");
    app->add_option("--layers", layers_flag, "number of message-passing layers");
    app->add_option("--hidden-dim", cfg.hidden_dim, "hidden width d");
    app->add_option("--residual", residual_text, "residual connections: on or off");
    app->add_option("--graphnorm", graphnorm_text, "graph normalization: on or off");
    app->add_option("--dropout", cfg.dropout, "dropout probability");
    app->add_option("--pooling", cfg.pooling, "readout: mlap or last");
    app->add_flag("--teacher-forcing", cfg.teacher_forcing,
                  "feed ground-truth embeddings to the lstm decoder in training");
  }

  void add_train_flags(CLI::App* app) {
    app->add_option("--epochs", cfg.epochs, "training epochs");
    app->add_option("--batch-size", cfg.batch_size, "graphs per batch");
    app->add_option("--lr", cfg.lr, "initial learning rate");
    app->add_option("--decay-factor", cfg.decay_factor, "plateau decay factor");
    app->add_option("--patience", cfg.patience, "plateau patience in epochs");
    app->add_option("--min-lr", cfg.min_lr, "learning rate floor");
    app->add_option("--max-len", cfg.max_len, "maximum decoded sequence length");
    app->add_option("--seed", seeds_text, "training seed list, e.g. \"0 1 2\"");
    app->add_flag("--resume", cfg.resume, "continue from the last checkpoint");
  }

  // Called after parsing: file first, then explicit flags on top.
  void resolve(const CLI::App* app) {
    g2s::CliConfig resolved;
    if (!config_path.empty()) resolved.apply_file(g2s::IniDoc::parse_file(config_path));
    auto given = [&](const char* name) {
      const auto* opt = app->get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (given("--dataset")) resolved.dataset_dir = cfg.dataset_dir;
    if (given("--out")) resolved.out_dir = cfg.out_dir;
    if (given("--decoder")) resolved.decoder = cfg.decoder;
    if (given("--layers")) resolved.layers = layers_flag;
    if (given("--hidden-dim")) resolved.hidden_dim = cfg.hidden_dim;
    if (given("--residual")) resolved.residual = g2s::parse_bool(residual_text, "--residual");
    if (given("--graphnorm")) {
      resolved.graphnorm = g2s::parse_bool(graphnorm_text, "--graphnorm");
    }
    if (given("--dropout")) resolved.dropout = cfg.dropout;
    if (given("--pooling")) resolved.pooling = cfg.pooling;
    if (given("--teacher-forcing")) resolved.teacher_forcing = cfg.teacher_forcing;
    if (given("--epochs")) resolved.epochs = cfg.epochs;
    if (given("--batch-size")) resolved.batch_size = cfg.batch_size;
    if (given("--lr")) resolved.lr = cfg.lr;
    if (given("--decay-factor")) resolved.decay_factor = cfg.decay_factor;
    if (given("--patience")) resolved.patience = cfg.patience;
    if (given("--min-lr")) resolved.min_lr = cfg.min_lr;
    if (given("--max-len")) resolved.max_len = cfg.max_len;
    if (given("--resume")) resolved.resume = cfg.resume;
    if (given("--seed")) {
      resolved.seeds.clear();
      std::istringstream ss(seeds_text);
      std::string tok;
      while (ss >> tok) resolved.seeds.push_back(std::stoull(tok));
      if (resolved.seeds.empty()) throw g2s::FormatError("--seed: empty seed list");
    }
    if (given("--corpus")) resolved.corpus_dir = cfg.corpus_dir;
    if (given("--checkpoint")) resolved.checkpoint = cfg.checkpoint;
    if (given("--source")) resolved.source_file = cfg.source_file;
    if (given("--split")) resolved.split = cfg.split;
    if (given("--compare")) resolved.compare_dir = cfg.compare_dir;
    if (given("--target-cap")) resolved.target_cap = cfg.target_cap;
    if (given("--attr-cap")) resolved.attr_cap = cfg.attr_cap;
    if (given("--depth-cap")) resolved.depth_cap = cfg.depth_cap;
    if (given("--split-seed")) resolved.split_seed = cfg.split_seed;
    cfg = resolved;
  }

  int layers_flag = 0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-to-sequence toolkit: function name prediction from code graphs"};
  app.set_version_flag("--version", std::string("g2s ") + g2s::kVersion);
  app.require_subcommand(1);

  FlagSet pre, train, eval, predict;
  g2s::GradcheckOptions gradcheck_options;

  auto* cmd_pre = app.add_subcommand("preprocess", "parse a corpus into a dataset");
  pre.add_common(cmd_pre);
  cmd_pre->add_option("--corpus", pre.cfg.corpus_dir, "directory of .py source files");
  cmd_pre->add_option("--target-cap", pre.cfg.target_cap, "target vocabulary cap");
  cmd_pre->add_option("--attr-cap", pre.cfg.attr_cap, "attribute vocabulary cap");
  cmd_pre->add_option("--depth-cap", pre.cfg.depth_cap, "depth clamp");
  cmd_pre->add_option("--split-seed", pre.cfg.split_seed, "file split seed");

  auto* cmd_tr = app.add_subcommand("train", "train one model per seed");
  train.add_common(cmd_tr);
  train.add_model_flags(cmd_tr);
  train.add_train_flags(cmd_tr);

  auto* cmd_ev = app.add_subcommand("evaluate", "score checkpoints on a split");
  eval.add_common(cmd_ev);
  cmd_ev->add_option("--checkpoint", eval.cfg.checkpoint, "single checkpoint to score");
  cmd_ev->add_option("--split", eval.cfg.split, "train, valid or test");
  cmd_ev->add_option("--compare", eval.cfg.compare_dir,
                     "second run directory for a statistical comparison");

  auto* cmd_pr = app.add_subcommand("predict", "predict the name of one function");
  predict.add_common(cmd_pr);
  cmd_pr->add_option("--checkpoint", predict.cfg.checkpoint, "trained checkpoint");
  cmd_pr->add_option("--source", predict.cfg.source_file, "file with the function");

  auto* cmd_gc = app.add_subcommand("gradcheck", "compare gradients to finite differences");
  cmd_gc->add_option("--decoder", gradcheck_options.decoder, "linear, lstm or both");
  cmd_gc->add_option("--hidden-dim", gradcheck_options.hidden_dim, "hidden width");
  cmd_gc->add_option("--layers", gradcheck_options.layers, "encoder layers");
  cmd_gc->add_option("--dropout", gradcheck_options.dropout, "must be 0 to run");
  cmd_gc->add_option("--tolerance", gradcheck_options.tolerance, "pass threshold");
  cmd_gc->add_flag("--self-test-corrupt", gradcheck_options.corrupt,
                   "intentionally corrupt the loss to exercise the failure path")
      ->group("");  // hidden

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_pre->parsed()) {
      pre.resolve(cmd_pre);
      return g2s::cmd_preprocess(pre.cfg);
    }
    if (cmd_tr->parsed()) {
      train.resolve(cmd_tr);
      return g2s::cmd_train(train.cfg);
    }
    if (cmd_ev->parsed()) {
      eval.resolve(cmd_ev);
      return g2s::cmd_evaluate(eval.cfg);
    }
    if (cmd_pr->parsed()) {
      predict.resolve(cmd_pr);
      return g2s::cmd_predict(predict.cfg);
    }
    if (cmd_gc->parsed()) {
      return g2s::cmd_gradcheck(gradcheck_options);
    }
  } catch (const g2s::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
