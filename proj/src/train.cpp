#include "sbre/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "sbre/blocks.hpp"
#include "sbre/error.hpp"
#include "sbre/random.hpp"

namespace sbre {

namespace {

constexpr std::size_t kMaxShards = 8;
constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;
constexpr std::uint64_t kDropoutTag = 0x44524f50ULL;

/// Runs fn(i) for i in [0, n) on up to `threads` workers, contiguous chunks.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = n * t / threads, hi = n * (t + 1) / threads;
    pool.emplace_back([&, lo, hi]() {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string number(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::size_t argmax(const std::vector<double>& row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

double accuracy(const std::vector<std::vector<double>>& probs, const std::vector<InstanceFeatures>& items) {
  if (items.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < items.size(); ++i) hits += argmax(probs[i]) == items[i].label;
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

Confusion confusion_of(const std::vector<std::size_t>& predictions, const std::vector<InstanceFeatures>& items,
                       std::size_t classes) {
  Confusion c(classes);
  for (std::size_t i = 0; i < items.size(); ++i) c.add(items[i].label, predictions[i]);
  return c;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  if (epochs == 0) throw UsageError("epochs must be positive");
  if (threads == 0) throw UsageError("threads must be positive");
  if (!(adam.lr >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.eps > 0.0))
    throw UsageError("invalid Adam hyperparameters");
}

double TrainHistory::mean_epoch_seconds() const {
  if (epochs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : epochs) s += e.seconds;
  return s / static_cast<double>(epochs.size());
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "epoch,loss,train_acc,eval_f1\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << number(e.loss) << ',' << number(e.train_accuracy) << ','
        << (e.eval_f1 ? number(*e.eval_f1) : std::string()) << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

void write_epoch_times_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "epoch,seconds\n";
  for (const auto& e : history.epochs) out << e.epoch << ',' << std::fixed << std::setprecision(6) << e.seconds << '\n';
}

std::vector<InstanceFeatures> prepare_features(const std::vector<SentenceInstance>& instances, const Vocab& vocab,
                                               const ModelConfig& config, std::size_t* truncated) {
  std::vector<InstanceFeatures> out;
  out.reserve(instances.size());
  std::size_t cut = 0;
  for (const auto& inst : instances) {
    const StructuralBlock block = detect_block(inst, vocab, config.include_children);
    out.push_back(make_features(block, inst.label_id, config));
    cut += out.back().truncated;
  }
  if (truncated) *truncated = cut;
  return out;
}

std::vector<std::vector<double>> predict_all(const ModelParams& params, const std::vector<InstanceFeatures>& items,
                                             const ModelConfig& config, std::size_t threads) {
  std::vector<std::vector<double>> out(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) { out[i] = predict_probs(params, items[i], config); });
  return out;
}

double mean_loss(const ModelParams& params, const std::vector<InstanceFeatures>& items, const ModelConfig& config,
                 std::size_t threads) {
  if (items.empty()) return 0.0;
  const auto probs = predict_all(params, items, config, threads);
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) total += -std::log(probs[i][items[i].label]);
  return total / static_cast<double>(items.size());
}

TrainResult train(const TrainSetup& setup, const std::vector<SentenceInstance>& train_set,
                  const std::vector<SentenceInstance>& eval_set) {
  if (!setup.vocab) throw std::invalid_argument("train requires a vocabulary");
  if (train_set.empty()) throw DataError("training set is empty");
  const ModelConfig& mc = setup.model;
  const TrainConfig& tc = setup.train;
  mc.validate();
  tc.validate();
  if (mc.num_classes != setup.vocab->labels().size())
    throw UsageError("num_classes " + std::to_string(mc.num_classes) + " does not match the " +
                     std::to_string(setup.vocab->labels().size()) + "-label vocabulary");

  TrainResult result;
  std::size_t eval_truncated = 0;
  const auto train_items = prepare_features(train_set, *setup.vocab, mc, &result.truncated);
  const auto eval_items = prepare_features(eval_set, *setup.vocab, mc, &eval_truncated);
  result.truncated += eval_truncated;

  ModelParams params = init_params(mc, setup.vocab->words().size(), setup.embeddings);
  const bool train_words = !mc.freeze_word_embeddings;

  std::vector<Tensor*> opt_params;
  if (train_words) opt_params.push_back(&params.word_table);
  for (Tensor* t : params.dense_tensors()) opt_params.push_back(t);
  Adam adam(tc.adam);
  adam.attach(opt_params);
  Tensor word_grad = train_words ? Tensor(params.word_table.shape(), 0.0) : Tensor{};

  const std::size_t n = train_items.size();
  std::vector<ModelGrads> shard_grads;
  for (std::size_t s = 0; s < kMaxShards; ++s) shard_grads.push_back(ModelGrads::zeros_like(params));
  ModelGrads total = ModelGrads::zeros_like(params);

  ModelParams best = params;
  TrainingMeta best_meta;
  std::optional<double> best_f1;
  std::size_t since_best = 0;

  result.history.seed = mc.seed;
  std::vector<std::size_t> order(n);
  std::vector<double> example_loss(n, 0.0);

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(derive_seed(mc.seed, kShuffleTag, epoch));
    shuffler.shuffle(std::span<std::size_t>(order));

    for (std::size_t begin = 0; begin < n; begin += tc.batch_size) {
      const std::size_t end = std::min(n, begin + tc.batch_size);
      const std::size_t batch = end - begin;
      const std::size_t shards = std::min(kMaxShards, batch);
      const double weight = 1.0 / static_cast<double>(batch);

      parallel_for(shards, tc.threads, [&](std::size_t s) {
        ModelGrads& grads = shard_grads[s];
        grads.clear();
        const std::size_t lo = begin + batch * s / shards, hi = begin + batch * (s + 1) / shards;
        for (std::size_t pos = lo; pos < hi; ++pos) {
          const std::size_t ex = order[pos];
          Graph g;
          const BoundParams bound = bind_params(g, params, &grads, mc.freeze_word_embeddings);
          std::optional<Tensor> mask;
          if (mc.dropout > 0.0) mask = dropout_mask(mc, derive_seed(mc.seed, kDropoutTag, epoch, ex));
          const ForwardVars v = forward(g, bound, train_items[ex], mc, mask ? &*mask : nullptr);
          const Var loss = g.softmax_xent(v.logits, train_items[ex].label);
          example_loss[ex] = g.value(loss)[0];
          g.backward(g.scale(loss, weight));
        }
      });

      total.clear();
      for (std::size_t s = 0; s < shards; ++s) total.add(shard_grads[s]);

      std::vector<const Tensor*> grads;
      if (train_words) {
        word_grad.fill(0.0);
        total.word.scatter_into(word_grad);
        grads.push_back(&word_grad);
      }
      for (const Tensor& t : total.dense) grads.push_back(&t);
      for (const Tensor* t : grads)
        if (!t->all_finite()) throw NumericError("non-finite gradient at epoch " + std::to_string(epoch));
      adam.step(opt_params, grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = std::accumulate(example_loss.begin(), example_loss.end(), 0.0) / static_cast<double>(n);
    if (!std::isfinite(rec.loss)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
    rec.train_accuracy = accuracy(predict_all(params, train_items, mc, tc.threads), train_items);
    if (!eval_items.empty()) {
      const auto probs = predict_all(params, eval_items, mc, tc.threads);
      std::vector<std::size_t> pred;
      for (const auto& row : probs) pred.push_back(argmax(row));
      rec.eval_f1 =
          compute_metrics(confusion_of(pred, eval_items, mc.num_classes), setup.vocab->labels(), setup.dialect,
                          tc.f1_mode)
              .macro_f1;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(rec);
    if (setup.on_epoch) setup.on_epoch(rec);

    bool stop = tc.stop_at_train_accuracy > 0.0 && rec.train_accuracy >= tc.stop_at_train_accuracy;
    if (rec.eval_f1) {
      if (!best_f1 || *rec.eval_f1 > *best_f1) {
        best_f1 = rec.eval_f1;
        best = params;
        best_meta.best_epoch = epoch;
        best_meta.best_eval_f1 = *rec.eval_f1;
        since_best = 0;
      } else if (++since_best >= tc.patience) {
        stop = true;
      }
    }
    if (stop) break;
  }

  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = mc;
  ckpt.vocab_digest = setup.vocab->digest();
  ckpt.dialect = std::string(dialect_name(setup.dialect));
  ckpt.labels = setup.vocab->labels();
  ckpt.meta.epochs = result.history.epochs.size();
  ckpt.meta.final_loss = result.history.epochs.back().loss;
  ckpt.meta.seed = mc.seed;
  if (best_f1) {
    ckpt.params = std::move(best);
    ckpt.meta.best_epoch = best_meta.best_epoch;
    ckpt.meta.best_eval_f1 = best_meta.best_eval_f1;
  } else {
    ckpt.params = std::move(params);
    ckpt.meta.best_epoch = ckpt.meta.epochs;
  }
  return result;
}

std::pair<std::vector<SentenceInstance>, std::vector<SentenceInstance>> split_holdout(
    const std::vector<SentenceInstance>& instances, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw UsageError("hold-out fraction must be in [0, 1)");
  const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(instances.size())));
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x484f4c44ULL));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<bool> in_dev(instances.size(), false);
  for (std::size_t i = 0; i < held; ++i) in_dev[order[i]] = true;
  std::pair<std::vector<SentenceInstance>, std::vector<SentenceInstance>> out;
  for (std::size_t i = 0; i < instances.size(); ++i) (in_dev[i] ? out.second : out.first).push_back(instances[i]);
  return out;
}

std::vector<double> average_probabilities(const std::vector<const std::vector<double>*>& rows) {
  if (rows.empty()) return {};
  const std::size_t k = rows.front()->size();
  std::vector<double> out(k);
  std::vector<double> column(rows.size());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r]->size() != k) throw std::invalid_argument("probability rows differ in length");
      column[r] = (*rows[r])[c];
    }
    std::sort(column.begin(), column.end());
    if (column.front() == column.back()) {
      out[c] = column.front();
      continue;
    }
    double s = 0.0;
    for (double v : column) s += v;
    out[c] = s / static_cast<double>(rows.size());
  }
  return out;
}

Evaluation evaluate(const std::vector<Checkpoint>& checkpoints, const std::vector<SentenceInstance>& eval_set,
                    const Vocab& vocab, Dialect dialect, F1Mode mode, std::size_t threads) {
  if (checkpoints.empty()) throw UsageError("evaluation needs at least one checkpoint");
  const std::string digest = vocab.digest();
  std::vector<std::vector<std::vector<double>>> per_model;
  for (const Checkpoint& ckpt : checkpoints) {
    if (ckpt.vocab_digest != digest) throw DataError("checkpoint vocabulary digest does not match the corpus");
    if (ckpt.labels != vocab.labels()) throw DataError("checkpoint label set does not match the corpus");
    const auto items = prepare_features(eval_set, vocab, ckpt.config);
    per_model.push_back(predict_all(ckpt.params, items, ckpt.config, threads));
  }

  Evaluation ev;
  const std::size_t k = vocab.labels().size();
  Confusion confusion(k);
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    std::vector<double> row;
    if (per_model.size() == 1) {
      row = per_model.front()[i];
    } else {
      std::vector<const std::vector<double>*> rows;
      for (const auto& m : per_model) rows.push_back(&m[i]);
      row = average_probabilities(rows);
    }
    const std::size_t pred = argmax(row);
    confusion.add(eval_set[i].label_id, pred);
    ev.predictions.push_back(pred);
    ev.probs.push_back(std::move(row));
  }
  ev.metrics = compute_metrics(confusion, vocab.labels(), dialect, mode);
  return ev;
}

AblationReport ablation(const TrainSetup& setup, const std::vector<SentenceInstance>& train_set,
                        const std::vector<SentenceInstance>& eval_set, const std::vector<SentenceInstance>& test_set) {
  AblationReport report;
  for (bool children : {true, false}) {
    TrainSetup variant = setup;
    variant.model.include_children = children;
    TrainResult r = train(variant, train_set, eval_set);
    Evaluation ev = evaluate({r.checkpoint}, test_set, *setup.vocab, setup.dialect, setup.train.f1_mode,
                             setup.train.threads);
    ev.metrics.epoch_seconds = r.history.mean_epoch_seconds();
    (children ? report.with_children : report.without_children) = std::move(ev.metrics);
    (children ? report.with_history : report.without_history) = std::move(r.history);
  }
  return report;
}

std::string format_ablation(const AblationReport& report, Dialect dialect) {
  // Reference values for the two variants.
  const double ref_with = dialect == Dialect::semeval ? 80.7 : 60.9;
  const double ref_without = dialect == Dialect::semeval ? 81.1 : 60.7;
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << "Block variant           | " << dialect_name(dialect) << " macro-F1 (%) | reference (%)\n";
  out << "------------------------+--------------------+--------------\n";
  out << "Block with-children     | " << std::setw(18) << 100.0 * report.with_children.macro_f1 << " | "
      << ref_with << '\n';
  out << "Block without-children  | " << std::setw(18) << 100.0 * report.without_children.macro_f1 << " | "
      << ref_without << '\n';
  out << "delta (with - without)  | " << std::setw(18) << 100.0 * report.delta() << " | "
      << ref_with - ref_without << '\n';
  return out.str();
}

}  // namespace sbre
