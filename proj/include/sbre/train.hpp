#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sbre/corpus.hpp"
#include "sbre/metrics.hpp"
#include "sbre/model.hpp"
#include "sbre/tensor.hpp"

namespace sbre {

struct TrainConfig {
  std::size_t batch_size = 50;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  AdamConfig adam;
  std::size_t threads = 1;
  /// Stop once eval-mode train accuracy reaches this value; 0 disables.
  double stop_at_train_accuracy = 0.0;
  F1Mode f1_mode = F1Mode::official;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;            // mean training loss (dropout active)
  double train_accuracy = 0.0;  // eval mode, after the epoch's updates
  std::optional<double> eval_f1;
  double seconds = 0.0;
};

struct TrainHistory {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;

  double mean_epoch_seconds() const;
};

/// epoch,loss,train_acc,eval_f1 with shortest round-trip number formatting.
/// Wall-clock seconds are kept out so that equal seeds give equal files.
void write_history_csv(const TrainHistory& history, const std::string& path);
/// epoch,seconds
void write_epoch_times_csv(const TrainHistory& history, const std::string& path);

/// Structural blocks and encoder inputs for a list of instances.
std::vector<InstanceFeatures> prepare_features(const std::vector<SentenceInstance>& instances, const Vocab& vocab,
                                               const ModelConfig& config, std::size_t* truncated = nullptr);

/// Probability rows, computed in parallel with results in input order.
std::vector<std::vector<double>> predict_all(const ModelParams& params, const std::vector<InstanceFeatures>& items,
                                             const ModelConfig& config, std::size_t threads);

/// Mean cross-entropy with dropout disabled.
double mean_loss(const ModelParams& params, const std::vector<InstanceFeatures>& items, const ModelConfig& config,
                 std::size_t threads);

struct TrainSetup {
  ModelConfig model;
  TrainConfig train;
  const Vocab* vocab = nullptr;
  Dialect dialect = Dialect::semeval;
  const EmbeddingTable* embeddings = nullptr;
  /// Called after every epoch, e.g. for progress logging.
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;  // best eval macro-F1, or the last epoch without an eval set
  TrainHistory history;
  std::size_t truncated = 0;
};

/// Mini-batch Adam training. Deterministic for a given seed regardless of
/// the thread count: each batch is cut into a fixed number of shards whose
/// gradients are summed in shard order. Throws NumericError on divergence.
TrainResult train(const TrainSetup& setup, const std::vector<SentenceInstance>& train_set,
                  const std::vector<SentenceInstance>& eval_set);

/// Deterministic hold-out: a seeded `fraction` of `instances` goes to the
/// second element, the rest (in original order) to the first.
std::pair<std::vector<SentenceInstance>, std::vector<SentenceInstance>> split_holdout(
    const std::vector<SentenceInstance>& instances, double fraction, std::uint64_t seed);

struct Evaluation {
  Metrics metrics;
  std::vector<std::vector<double>> probs;  // one row per instance
  std::vector<std::size_t> predictions;
};

/// Single checkpoint: plain evaluation. Several: probabilities averaged
/// uniformly (independent of checkpoint order) before the argmax.
Evaluation evaluate(const std::vector<Checkpoint>& checkpoints, const std::vector<SentenceInstance>& eval_set,
                    const Vocab& vocab, Dialect dialect, F1Mode mode, std::size_t threads = 1);

/// Mean of the rows, summed in sorted order per coordinate so that the result
/// does not depend on the order of `rows`.
std::vector<double> average_probabilities(const std::vector<const std::vector<double>*>& rows);

struct AblationReport {
  Metrics with_children;
  Metrics without_children;
  TrainHistory with_history;
  TrainHistory without_history;
  double delta() const { return with_children.macro_f1 - without_children.macro_f1; }
};

/// Trains both block variants under the same seed (early stopping on
/// `eval_set`) and scores each on `test_set`.
AblationReport ablation(const TrainSetup& setup, const std::vector<SentenceInstance>& train_set,
                        const std::vector<SentenceInstance>& eval_set, const std::vector<SentenceInstance>& test_set);

std::string format_ablation(const AblationReport& report, Dialect dialect);

}  // namespace sbre
