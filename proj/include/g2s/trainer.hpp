#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "g2s/adam.hpp"
#include "g2s/checkpoint.hpp"
#include "g2s/config.hpp"
#include "g2s/dataset.hpp"
#include "g2s/eval.hpp"
#include "g2s/loss.hpp"
#include "g2s/model.hpp"
#include "g2s/schedule.hpp"

namespace g2s {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 256;
  double lr = 5e-4;
  ScheduleConfig schedule;
  std::uint64_t seed = 0;
  std::size_t max_len = 5;

  void validate() const {
    if (epochs < 0) throw ContractError("train: epochs must be nonnegative");
    if (batch_size < 1) throw ContractError("train: batch_size must be >= 1");
    if (lr < 0.0) throw ContractError("train: lr must be nonnegative");
    if (max_len == 0) throw ContractError("train: max_len must be >= 1");
    schedule.validate();
  }
};

struct EpochStats {
  int epoch = 0;          // 1-based in logs
  double lr = 0.0;        // rate used during the epoch
  double train_loss = 0.0;
  double valid_f1 = 0.0;
  double seconds = 0.0;
  std::size_t clamped = 0;
};

template <typename T>
struct FitResult {
  std::vector<EpochStats> log;
  double best_valid_f1 = -1.0;
  int best_epoch = 0;
  std::string best_path;
  std::string last_path;
};

// One pass over the training split: shuffled batches, forward, loss,
// backward, Adam. Deterministic given the generator state.
template <typename T>
EpochStats train_epoch(const Model<T>& model, const Dataset& dataset,
                       const std::vector<std::size_t>& train_ids,
                       ad::AdamState<T>& adam, Rng& rng, const TrainConfig& cfg) {
  cfg.validate();
  if (train_ids.empty()) throw ContractError("train_epoch: empty training split");
  auto params = model.param_tensors();
  std::vector<std::size_t> order = train_ids;
  rng.shuffle(order.begin(), order.end());

  EpochStats stats;
  stats.lr = adam.lr;
  double loss_sum = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    std::vector<const ProgramGraph*> graphs;
    graphs.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) graphs.push_back(&dataset.graphs[order[i]]);
    const auto batch = batch_graphs(graphs);
    const auto cols = encode_target_columns(graphs, dataset.target_vocab, cfg.max_len);

    try {
      ad::Tape<T> tape;
      const auto probs = model.forward(&tape, batch, &cols, &rng, true);
      const auto loss = sequence_loss<T>(&tape, probs, cols);
      const double value = static_cast<double>(loss.value.item());
      if (!std::isfinite(value)) throw NumericError("loss is not finite");
      model.zero_grads();
      tape.backward(loss.value, params);
      ad::adam_step<T>(params, adam);
      loss_sum += value * static_cast<double>(end - start);
      stats.clamped += loss.clamped;
    } catch (const NumericError& e) {
      throw NumericError("epoch aborted at batch " + std::to_string(start / cfg.batch_size) +
                         " (lr=" + std::to_string(adam.lr) + "): " + e.what());
    }
  }
  stats.train_loss = loss_sum / static_cast<double>(order.size());
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

namespace detail {

// Adam moments ride along in the checkpoint as named tensors so a resumed
// run continues the exact optimizer trajectory.
template <typename T>
ad::ParamMap<T> checkpoint_tensors(const ad::ParamMap<T>& params,
                                   const ad::AdamState<T>& adam) {
  ad::ParamMap<T> out = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.emplace_back("adam.m." + params[i].first,
                     ad::Tensor<T>::from(params[i].second.shape(), adam.m[i]));
    out.emplace_back("adam.v." + params[i].first,
                     ad::Tensor<T>::from(params[i].second.shape(), adam.v[i]));
  }
  out.emplace_back("adam.t", ad::Tensor<T>::scalar(static_cast<T>(adam.t)));
  return out;
}

template <typename T>
void restore_from_checkpoint(const LoadedCheckpoint<T>& loaded,
                             const ad::ParamMap<T>& params, ad::AdamState<T>& adam) {
  const std::size_t n = params.size();
  if (loaded.tensors.size() != 2 * n + n + 1 && loaded.tensors.size() != 3 * n + 1) {
    throw FormatError("checkpoint: unexpected tensor count " +
                      std::to_string(loaded.tensors.size()));
  }
  ad::ParamMap<T> stored_params(loaded.tensors.begin(), loaded.tensors.begin() + n);
  restore_params<T>(stored_params, params);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = loaded.tensors[n + 2 * i];
    const auto& v = loaded.tensors[n + 2 * i + 1];
    if (m.first != "adam.m." + params[i].first || v.first != "adam.v." + params[i].first) {
      throw FormatError("checkpoint: optimizer tensors out of order at " + params[i].first);
    }
    adam.m[i].assign(m.second.values().begin(), m.second.values().end());
    adam.v[i].assign(v.second.values().begin(), v.second.values().end());
  }
  adam.t = static_cast<std::int64_t>(loaded.tensors.back().second.item());
}

}  // namespace detail

// Full training protocol: per-epoch validation F1, plateau-driven learning
// rate decay, best-checkpoint tracking, CSV epoch log, resumable state.
template <typename T>
FitResult<T> fit(const Model<T>& model, const Dataset& dataset, const TrainConfig& cfg,
                 const std::string& out_dir, bool resume = false) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(out_dir);
  FitResult<T> result;
  result.best_path = (fs::path(out_dir) / "best.ckpt").string();
  result.last_path = (fs::path(out_dir) / "last.ckpt").string();
  const std::string log_path = (fs::path(out_dir) / "log.csv").string();

  const auto params = model.params();
  auto tensors = model.param_tensors();
  ad::AdamState<T> adam;
  adam.lr = cfg.lr;
  adam.init(tensors);
  LrScheduleState sched;
  sched.lr = cfg.lr;
  Rng rng(cfg.seed);
  const std::string config_text =
      checkpoint_config_text(model.config(), cfg.lr, cfg.batch_size, cfg.seed);

  std::int64_t start_epoch = 0;
  if (resume && fs::exists(result.last_path)) {
    const auto loaded = load_checkpoint<T>(result.last_path);
    if (loaded.meta.config_text != config_text) {
      throw FormatError("resume: checkpoint configuration does not match this run");
    }
    detail::restore_from_checkpoint<T>(loaded, params, adam);
    sched = loaded.meta.schedule;
    adam.lr = sched.lr;
    rng.deserialize(loaded.meta.rng_state);
    start_epoch = loaded.meta.epoch;
    log_info("resuming from " + result.last_path + " after epoch " +
             std::to_string(start_epoch));
  }

  std::ofstream log(log_path, start_epoch > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path);
  if (start_epoch == 0) log << "epoch,lr,train_loss,valid_f1,seconds\n";

  auto save = [&](const std::string& path, std::int64_t completed) {
    CheckpointMeta meta;
    meta.config_text = config_text;
    meta.epoch = completed;
    meta.schedule = sched;
    meta.rng_state = rng.serialize();
    save_checkpoint<T>(path, meta, detail::checkpoint_tensors<T>(params, adam));
  };

  if (cfg.epochs == 0) {
    save(result.last_path, 0);
    save(result.best_path, 0);
    return result;
  }

  result.best_valid_f1 = sched.best_f1;
  for (std::int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    EpochStats stats = train_epoch<T>(model, dataset, dataset.meta.train, adam, rng, cfg);
    stats.epoch = static_cast<int>(epoch + 1);
    stats.valid_f1 = evaluate_split<T>(model, dataset, dataset.meta.valid).mean_f1;

    char line[160];
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.3f", stats.epoch, stats.lr,
                  stats.train_loss, stats.valid_f1, stats.seconds);
    log << line << '\n';
    log.flush();
    log_info("epoch " + std::to_string(stats.epoch) + " loss " +
             std::to_string(stats.train_loss) + " valid F1 " +
             std::to_string(stats.valid_f1) + " lr " + std::to_string(stats.lr));

    const bool improved = stats.valid_f1 > sched.best_f1;
    update_lr_on_plateau(sched, stats.valid_f1, cfg.schedule);
    adam.lr = sched.lr;
    save(result.last_path, epoch + 1);
    if (improved) {
      result.best_valid_f1 = stats.valid_f1;
      result.best_epoch = stats.epoch;
      save(result.best_path, epoch + 1);
    }
    result.log.push_back(stats);
  }
  if (!fs::exists(result.best_path)) save(result.best_path, cfg.epochs);
  return result;
}

}  // namespace g2s
