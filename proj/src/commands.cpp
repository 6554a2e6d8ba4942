#include "sbre/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sbre/blocks.hpp"
#include "sbre/config.hpp"
#include "sbre/corpus.hpp"
#include "sbre/digest.hpp"
#include "sbre/error.hpp"
#include "sbre/gradcheck_suite.hpp"
#include "sbre/metrics.hpp"
#include "sbre/model.hpp"
#include "sbre/train.hpp"

namespace sbre {

namespace fs = std::filesystem;
using nlohmann::json;

std::string resolve_input(const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute() || fs::exists(p)) return path;
  if (const char* dir = std::getenv("SBRE_DATA_DIR"); dir && *dir) {
    const fs::path candidate = fs::path(dir) / p;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

namespace {

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return s.str();
}

std::string utc_iso() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace

std::string make_run_dir(const std::string& parent, std::uint64_t seed, const std::string& run_name) {
  fs::create_directories(parent);
  if (!run_name.empty()) {
    const fs::path dir = fs::path(parent) / run_name;
    if (fs::exists(dir)) throw UsageError("run directory " + dir.string() + " already exists");
    fs::create_directories(dir);
    return dir.string();
  }
  const std::string base = utc_stamp() + "-seed" + std::to_string(seed);
  fs::path dir = fs::path(parent) / base;
  for (int n = 2; fs::exists(dir); ++n) dir = fs::path(parent) / (base + "-" + std::to_string(n));
  fs::create_directories(dir);
  return dir.string();
}

namespace {

// ---------------------------------------------------------------------------
// Run manifest

class RunManifest {
 public:
  RunManifest(std::string command, const std::vector<std::string>& argv) {
    doc_["tool"] = "sbre";
    doc_["version"] = kToolVersion;
    doc_["command"] = std::move(command);
    doc_["argv"] = argv;
    doc_["created_utc"] = utc_iso();
    doc_["inputs"] = json::array();
    doc_["artifacts"] = json::object();
    doc_["status"] = "running";
  }
  RunManifest(const RunManifest&) = delete;
  RunManifest& operator=(const RunManifest&) = delete;

  /// A manifest left unfinished by an exception is marked failed.
  ~RunManifest() {
    if (finished_ || path_.empty()) return;
    doc_["status"] = "failed";
    try {
      flush();
    } catch (...) {
    }
  }

  /// Records the digest of an existing input; throws DataError if it is missing.
  void input(const std::string& role, const std::string& path) {
    if (!fs::is_regular_file(path)) throw DataError("input file not found: " + path);
    doc_["inputs"].push_back({{"role", role}, {"path", fs::absolute(path).string()}, {"sha256", sha256_file(path)}});
  }
  void config(const json& resolved) { doc_["config"] = resolved; }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void artifact(const std::string& name, const std::string& path) { doc_["artifacts"][name] = path; }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void write(const std::string& path) {
    path_ = path;
    flush();
  }
  void finish(const std::string& status = "complete") {
    doc_["status"] = status;
    finished_ = true;
    if (!path_.empty()) flush();
  }

 private:
  void flush() const {
    std::ofstream out(path_);
    if (!out) throw DataError("cannot write manifest " + path_);
    out << doc_.dump(2) << '\n';
  }

  json doc_;
  std::string path_;
  bool finished_ = false;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

// ---------------------------------------------------------------------------
// Shared option groups

struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--set", overrides, "override a config key (key=value); repeatable");
    cmd->add_option("--seed", seed, "random seed (overrides config)");
    cmd->add_option("--threads", threads, "worker threads");
  }

  RunConfig resolve(RunManifest& manifest) const {
    RunConfig c;
    if (!config_path.empty()) {
      const std::string path = resolve_input(config_path);
      manifest.input("config", path);
      apply_config_file(c, path);
    }
    apply_overrides(c, overrides);
    if (seed) c.model.seed = *seed;
    if (threads) c.train.threads = *threads;
    if (!c.embeddings.empty()) {
      c.embeddings = resolve_input(c.embeddings);
      manifest.input("embeddings", c.embeddings);
    }
    c.train.validate();
    return c;
  }
};

struct RunDirOptions {
  std::string out = "runs";
  std::string run_name;

  void attach(CLI::App* cmd) {
    cmd->add_option("--out", out, "parent directory for run directories")->capture_default_str();
    cmd->add_option("--run-name", run_name, "fixed run directory name instead of <timestamp>-seed<seed>");
  }
};

Corpus load_corpus_input(const std::string& path, RunManifest& manifest) {
  const std::string resolved = resolve_input(path);
  manifest.input("corpus", resolved);
  return load_corpus(resolved);
}

/// Sets num_classes from the corpus and checks the rest of the model config.
void bind_to_corpus(RunConfig& config, const Corpus& corpus) {
  config.model.num_classes = corpus.vocab.labels().size();
  config.model.validate();
}

struct EvalChoice {
  std::string eval_set = "dev";
  double dev_fraction = 0.1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--eval-set", eval_set, "early-stopping set: dev (hold-out of train), test or none")
        ->check(CLI::IsMember({"dev", "test", "none"}))
        ->capture_default_str();
    cmd->add_option("--dev-fraction", dev_fraction, "hold-out fraction for --eval-set dev")->capture_default_str();
  }

  std::pair<std::vector<SentenceInstance>, std::vector<SentenceInstance>> split(const Corpus& corpus,
                                                                                std::uint64_t seed) const {
    if (eval_set == "test") return {corpus.train, corpus.test};
    if (eval_set == "none") return {corpus.train, {}};
    return split_holdout(corpus.train, dev_fraction, seed);
  }
};

std::optional<EmbeddingTable> load_embeddings_if_any(const RunConfig& config, const Vocab& vocab,
                                                     std::ostream& err) {
  if (config.embeddings.empty()) return std::nullopt;
  EmbeddingTable table = load_embeddings(config.embeddings, vocab);
  err << "embeddings: dim " << table.dim << ", coverage " << std::fixed << std::setprecision(3) << table.coverage
      << " (" << table.exact_matches << " exact, " << table.lowercase_matches << " lowercase)\n";
  return table;
}

TrainSetup make_setup(const RunConfig& config, const Corpus& corpus, const EmbeddingTable* embeddings,
                      std::ostream& err) {
  TrainSetup setup;
  setup.model = config.model;
  setup.train = config.train;
  setup.vocab = &corpus.vocab;
  setup.dialect = corpus.dialect;
  setup.embeddings = embeddings;
  setup.on_epoch = [&err](const EpochRecord& r) {
    err << "epoch " << r.epoch << "  loss " << std::fixed << std::setprecision(4) << r.loss << "  train_acc "
        << r.train_accuracy;
    if (r.eval_f1) err << "  eval_f1 " << *r.eval_f1;
    err << "  " << std::setprecision(2) << r.seconds << " s\n";
  };
  return setup;
}

std::string config_text(const RunConfig& config) {
  std::ostringstream out;
  const json j = to_json(config);
  for (const std::string& key : config_keys()) {
    std::string name = key == "freeze_embeddings" ? "freeze_word_embeddings" : key;
    if (!j.contains(name)) continue;
    const json& v = j.at(name);
    out << key << " = ";
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i].get<std::size_t>();
    } else if (v.is_string()) {
      out << v.get<std::string>();
    } else {
      out << v.dump();
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Commands

struct IngestOptions {
  std::string dialect = "semeval";
  std::string train_raw, train_conllu, train_manifest;
  std::string test_raw, test_conllu, test_manifest;
  std::string pos_column = "upos";
  bool base_deprel = false;
  bool strict = false;
  std::string out;
};

int cmd_ingest(const IngestOptions& o, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  const Dialect dialect = parse_dialect(o.dialect);
  RunManifest manifest("ingest", argv);
  IngestInputs train{resolve_input(o.train_raw), resolve_input(o.train_conllu), resolve_input(o.train_manifest)};
  IngestInputs test{resolve_input(o.test_raw), resolve_input(o.test_conllu), resolve_input(o.test_manifest)};
  manifest.input("train_raw", train.raw_path);
  manifest.input("train_conllu", train.conllu_path);
  if (!train.manifest_path.empty()) manifest.input("train_manifest", train.manifest_path);
  manifest.input("test_raw", test.raw_path);
  manifest.input("test_conllu", test.conllu_path);
  if (!test.manifest_path.empty()) manifest.input("test_manifest", test.manifest_path);
  ConlluOptions copts;
  copts.pos_column = o.pos_column == "xpos" ? PosColumn::xpos : PosColumn::upos;
  copts.base_deprel = o.base_deprel;
  manifest.config({{"dialect", o.dialect}, {"pos_column", o.pos_column}, {"base_deprel", o.base_deprel},
                   {"strict", o.strict}});
  manifest.artifact("corpus", o.out);
  fs::create_directories(fs::absolute(o.out).parent_path());
  manifest.write(o.out + ".manifest.json");

  IngestReport report;
  const Corpus corpus = ingest(dialect, train, test, copts, o.strict, report);
  for (const auto& msg : report.skipped) err << "skipped " << msg << '\n';
  save_corpus(corpus, o.out);
  manifest.set("counts", {{"train", corpus.train.size()}, {"test", corpus.test.size()}, {"skipped", corpus.skipped}});
  manifest.finish();
  out << "train " << corpus.train.size() << " / test " << corpus.test.size() << " instances, "
      << corpus.vocab.labels().size() << " labels, " << corpus.vocab.words().size() << " words, " << corpus.skipped
      << " skipped\n";
  return 0;
}

json stats_json(const Corpus& corpus) {
  const Stats train = dataset_stats(corpus.train);
  const Stats test = dataset_stats(corpus.test);
  auto split_json = [](const Stats& s, const std::string& name) {
    auto it = s.splits.find(name);
    if (it == s.splits.end()) return json{{"count", 0}};
    const SplitStats& st = it->second;
    json hist = json::object();
    for (const auto& [bucket, n] : st.length_histogram) hist[std::to_string(bucket)] = n;
    return json{{"count", st.count}, {"mean_length", st.mean_length}, {"labels", st.label_counts},
                {"length_histogram", hist}};
  };
  std::vector<std::string> classes;
  for (const auto& label : corpus.vocab.labels()) {
    if (label == negative_label(corpus.dialect)) continue;
    const std::string cls = relation_class(label);
    if (std::find(classes.begin(), classes.end(), cls) == classes.end()) classes.push_back(cls);
  }
  return {{"dialect", std::string(dialect_name(corpus.dialect))},
          {"train", split_json(train, "train")},
          {"test", split_json(test, "test")},
          {"labels", corpus.vocab.labels().size()},
          {"directed_relation_types", corpus.vocab.labels().size() - 1},
          {"relation_classes", classes.size() + 1},
          {"words", corpus.vocab.words().size()},
          {"pos_tags", corpus.vocab.pos_tags().size()},
          {"deprels", corpus.vocab.deprels().size()},
          {"skipped", corpus.skipped}};
}

int cmd_stats(const std::string& corpus_path, const std::string& out_path, const std::vector<std::string>& argv,
              std::ostream& out) {
  RunManifest manifest("stats", argv);
  const std::string resolved = resolve_input(corpus_path);
  manifest.input("corpus", resolved);
  if (!out_path.empty()) {
    manifest.artifact("stats", out_path);
    manifest.write(out_path + ".manifest.json");
  }
  const json stats = stats_json(load_corpus(resolved));
  if (out_path.empty()) {
    out << stats.dump(2) << '\n';
  } else {
    write_json(out_path, stats);
    manifest.finish();
  }
  return 0;
}

int cmd_blocks(const std::string& corpus_path, bool children, const std::string& split, const std::string& out_path,
               const std::vector<std::string>& argv, std::ostream& out) {
  RunManifest manifest("blocks", argv);
  const std::string resolved = resolve_input(corpus_path);
  manifest.input("corpus", resolved);
  manifest.config({{"include_children", children}, {"split", split}});
  manifest.artifact("blocks", out_path);
  fs::create_directories(fs::absolute(out_path).parent_path());
  manifest.write(out_path + ".manifest.json");

  const Corpus corpus = load_corpus(resolved);
  std::ofstream file(out_path);
  if (!file) throw DataError("cannot write " + out_path);
  std::size_t n = 0;
  auto emit = [&](const std::vector<SentenceInstance>& instances) {
    for (const auto& inst : instances) {
      const StructuralBlock block = detect_block(inst, corpus.vocab, children);
      json forms = json::array(), roles = json::array(), pos = json::array();
      for (std::size_t i : block.indices) {
        const Token& t = inst.tokens[i - 1];
        forms.push_back(t.form);
        roles.push_back(t.deprel);
        pos.push_back(t.pos);
      }
      json rec = {{"id", inst.id},
                  {"split", std::string(split_name(inst.split))},
                  {"variant", children ? "with_children" : "without_children"},
                  {"indices", block.indices},
                  {"forms", forms},
                  {"roles", roles},
                  {"pos", pos}};
      file << rec.dump() << '\n';
      ++n;
    }
  };
  if (split == "train" || split == "all") emit(corpus.train);
  if (split == "test" || split == "all") emit(corpus.test);
  if (!file) throw DataError("failed writing " + out_path);
  manifest.finish();
  out << n << " blocks written to " << out_path << '\n';
  return 0;
}

int cmd_train(const std::string& corpus_path, const ConfigOptions& co, const RunDirOptions& ro, const EvalChoice& ec,
              const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  RunManifest manifest("train", argv);
  RunConfig config = co.resolve(manifest);
  const Corpus corpus = load_corpus_input(corpus_path, manifest);
  bind_to_corpus(config, corpus);

  const fs::path dir = make_run_dir(ro.out, config.model.seed, ro.run_name);
  json resolved = to_json(config);
  resolved["eval_set"] = ec.eval_set;
  resolved["dev_fraction"] = ec.dev_fraction;
  manifest.config(resolved);
  manifest.seed(config.model.seed);
  manifest.set("run_dir", dir.string());
  for (const char* name : {"checkpoint.sbck", "history.csv", "epoch_times.csv", "config.resolved", "summary.json"})
    manifest.artifact(name, join(dir, name));
  manifest.write(join(dir, "manifest.json"));
  write_text(join(dir, "config.resolved"), config_text(config));

  const auto embeddings = load_embeddings_if_any(config, corpus.vocab, err);
  const auto [train_set, eval_set] = ec.split(corpus, config.model.seed);
  err << "training on " << train_set.size() << " instances, early stopping on " << eval_set.size() << " ("
      << ec.eval_set << ")\n";
  const TrainSetup setup = make_setup(config, corpus, embeddings ? &*embeddings : nullptr, err);
  const TrainResult result = train(setup, train_set, eval_set);

  save_checkpoint(result.checkpoint, join(dir, "checkpoint.sbck"));
  write_history_csv(result.history, join(dir, "history.csv"));
  write_epoch_times_csv(result.history, join(dir, "epoch_times.csv"));
  write_json(join(dir, "summary.json"), {{"epochs", result.history.epochs.size()},
                                          {"best_epoch", result.checkpoint.meta.best_epoch},
                                          {"best_eval_f1", result.checkpoint.meta.best_eval_f1},
                                          {"final_loss", result.checkpoint.meta.final_loss},
                                          {"mean_epoch_seconds", result.history.mean_epoch_seconds()},
                                          {"truncated_blocks", result.truncated}});
  manifest.finish();
  out << dir.string() << '\n';
  return 0;
}

int cmd_eval(const std::vector<std::string>& checkpoint_paths, const std::string& corpus_path,
             const std::string& split, const std::string& mode_name, std::optional<std::size_t> threads,
             const RunDirOptions& ro, const std::vector<std::string>& argv, std::ostream& out) {
  RunManifest manifest("eval", argv);
  const F1Mode mode = parse_f1_mode(mode_name);
  std::vector<std::string> resolved;
  for (const auto& p : checkpoint_paths) {
    resolved.push_back(resolve_input(p));
    manifest.input("checkpoint", resolved.back());
  }
  const Corpus corpus = load_corpus_input(corpus_path, manifest);
  std::vector<Checkpoint> checkpoints;
  for (const auto& p : resolved) checkpoints.push_back(load_checkpoint(p));

  const std::uint64_t seed = checkpoints.front().config.seed;
  const fs::path dir = make_run_dir(ro.out, seed, ro.run_name);
  manifest.config({{"split", split}, {"f1_mode", mode_name}, {"threads", threads.value_or(1)},
                   {"ensemble_size", checkpoints.size()}});
  manifest.seed(seed);
  manifest.set("run_dir", dir.string());
  for (const char* name : {"metrics.json", "confusion.csv", "confusion_classes.csv", "predictions.tsv"})
    manifest.artifact(name, join(dir, name));
  manifest.write(join(dir, "manifest.json"));

  const auto& instances = split == "train" ? corpus.train : corpus.test;
  const Evaluation ev = evaluate(checkpoints, instances, corpus.vocab, corpus.dialect, mode, threads.value_or(1));
  json metrics = metrics_to_json(ev.metrics);
  metrics["ensemble_size"] = checkpoints.size();
  metrics["split"] = split;
  write_json(join(dir, "metrics.json"), metrics);
  write_confusion_csv(ev.metrics.confusion, corpus.vocab.labels(), join(dir, "confusion.csv"));
  const auto [classes, names] = class_confusion(ev.metrics.confusion, corpus.vocab.labels(), corpus.dialect);
  write_confusion_csv(classes, names, join(dir, "confusion_classes.csv"));
  std::ostringstream pred;
  pred << "id\tgold\tpredicted\n";
  for (std::size_t i = 0; i < instances.size(); ++i)
    pred << instances[i].id << '\t' << instances[i].label << '\t' << corpus.vocab.labels()[ev.predictions[i]] << '\n';
  write_text(join(dir, "predictions.tsv"), pred.str());
  manifest.finish();
  out << dir.string() << '\n'
      << "macro_f1 (" << mode_name << ") " << std::fixed << std::setprecision(4) << ev.metrics.macro_f1
      << "  accuracy " << ev.metrics.accuracy << '\n';
  return 0;
}

int cmd_ablation(const std::string& corpus_path, const ConfigOptions& co, const RunDirOptions& ro,
                 const EvalChoice& ec, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  RunManifest manifest("ablation", argv);
  RunConfig config = co.resolve(manifest);
  const Corpus corpus = load_corpus_input(corpus_path, manifest);
  bind_to_corpus(config, corpus);

  const fs::path dir = make_run_dir(ro.out, config.model.seed, ro.run_name);
  json resolved = to_json(config);
  resolved["eval_set"] = ec.eval_set;
  resolved["dev_fraction"] = ec.dev_fraction;
  manifest.config(resolved);
  manifest.seed(config.model.seed);
  manifest.set("run_dir", dir.string());
  for (const char* name : {"ablation.txt", "ablation.json", "history_with_children.csv",
                           "history_without_children.csv"})
    manifest.artifact(name, join(dir, name));
  manifest.write(join(dir, "manifest.json"));

  const auto embeddings = load_embeddings_if_any(config, corpus.vocab, err);
  const auto [train_set, eval_set] = ec.split(corpus, config.model.seed);
  const TrainSetup setup = make_setup(config, corpus, embeddings ? &*embeddings : nullptr, err);
  const AblationReport report = ablation(setup, train_set, eval_set, corpus.test);

  const std::string table = format_ablation(report, corpus.dialect);
  write_text(join(dir, "ablation.txt"), table);
  json with = metrics_to_json(report.with_children);
  json without = metrics_to_json(report.without_children);
  write_json(join(dir, "ablation.json"), {{"with_children", with}, {"without_children", without},
                                          {"delta_macro_f1", report.delta()}});
  write_history_csv(report.with_history, join(dir, "history_with_children.csv"));
  write_history_csv(report.without_history, join(dir, "history_without_children.csv"));
  manifest.finish();
  out << dir.string() << '\n' << table;
  return 0;
}

int cmd_gradcheck(const ConfigOptions& co, const std::string& out_dir, const std::string& run_name,
                  const std::vector<std::string>& argv, std::ostream& out) {
  RunManifest manifest("gradcheck", argv);
  const RunConfig config = co.resolve(manifest);
  GradSuiteOptions options;
  options.seed = config.model.seed;
  manifest.config({{"seed", options.seed}, {"cases_per_op", options.cases_per_op},
                   {"model_cases", options.model_cases}, {"tolerance", options.tolerance}});
  manifest.seed(options.seed);
  std::string dir;
  if (!out_dir.empty()) {
    dir = make_run_dir(out_dir, options.seed, run_name);
    manifest.artifact("gradcheck.txt", join(dir, "gradcheck.txt"));
    manifest.write(join(dir, "manifest.json"));
  }
  const GradSuiteReport report = run_grad_suite(options);
  const std::string text = format_grad_suite(report);
  out << text;
  if (!dir.empty()) {
    write_text(join(dir, "gradcheck.txt"), text);
    manifest.finish(report.passed() ? "complete" : "failed");
  }
  if (!report.passed()) throw NumericError("gradient check exceeded tolerance");
  return 0;
}

/// Drops `--flag value` and `--flag=value` occurrences.
std::vector<std::string> without_flag(const std::vector<std::string>& args, const std::string& flag) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag) {
      ++i;
      continue;
    }
    if (args[i].rfind(flag + "=", 0) == 0) continue;
    out.push_back(args[i]);
  }
  return out;
}

int cmd_replay(const std::string& manifest_path, const std::string& out_path, const std::string& run_name,
               std::ostream& out, std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path + ": " + e.what());
  }
  for (const auto& input : m.at("inputs")) {
    const std::string path = input.at("path").get<std::string>();
    if (!fs::is_regular_file(path)) throw DataError("replay input missing: " + path);
    if (sha256_file(path) != input.at("sha256").get<std::string>())
      throw DataError("replay input changed since the original run: " + path);
  }
  std::vector<std::string> args = m.at("argv").get<std::vector<std::string>>();
  args = without_flag(without_flag(args, "--out"), "--run-name");
  args.push_back("--out");
  args.push_back(out_path);
  if (!run_name.empty()) {
    args.push_back("--run-name");
    args.push_back(run_name);
  }
  err << "replaying:";
  for (const auto& a : args) err << ' ' << a;
  err << '\n';
  return run_cli(args, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structural-block CNN relation extraction"};
  app.set_version_flag("--version", std::string("sbre ") + kToolVersion);
  app.require_subcommand(1);

  IngestOptions ingest_o;
  auto* ingest_cmd = app.add_subcommand("ingest", "align raw relation files with CoNLL-U parses and build a corpus");
  ingest_cmd->add_option("--dialect", ingest_o.dialect, "semeval or kbp37")
      ->check(CLI::IsMember({"semeval", "kbp37"}))
      ->capture_default_str();
  ingest_cmd->add_option("--train-raw", ingest_o.train_raw, "training relation file")->required();
  ingest_cmd->add_option("--train-conllu", ingest_o.train_conllu, "training parses")->required();
  ingest_cmd->add_option("--train-manifest", ingest_o.train_manifest, "id -> sentence index JSON-lines");
  ingest_cmd->add_option("--test-raw", ingest_o.test_raw, "test relation file")->required();
  ingest_cmd->add_option("--test-conllu", ingest_o.test_conllu, "test parses")->required();
  ingest_cmd->add_option("--test-manifest", ingest_o.test_manifest, "id -> sentence index JSON-lines");
  ingest_cmd->add_option("--pos-column", ingest_o.pos_column, "upos or xpos")
      ->check(CLI::IsMember({"upos", "xpos"}))
      ->capture_default_str();
  ingest_cmd->add_flag("--base-deprel", ingest_o.base_deprel, "strip :subtype from dependency labels");
  ingest_cmd->add_flag("--strict", ingest_o.strict, "fail instead of skipping unalignable instances");
  ingest_cmd->add_option("--out", ingest_o.out, "corpus JSON to write")->required();

  std::string stats_corpus, stats_out;
  auto* stats_cmd = app.add_subcommand("stats", "dataset statistics as JSON");
  stats_cmd->add_option("corpus", stats_corpus, "corpus JSON")->required();
  stats_cmd->add_option("--out", stats_out, "write to a file instead of stdout");

  std::string blocks_corpus, blocks_out, blocks_split = "all";
  bool with_children = false, without_children = false;
  auto* blocks_cmd = app.add_subcommand("blocks", "structural blocks as JSON-lines");
  blocks_cmd->add_option("corpus", blocks_corpus, "corpus JSON")->required();
  auto* wc = blocks_cmd->add_flag("--with-children", with_children, "include the entity tokens' children");
  auto* woc = blocks_cmd->add_flag("--without-children", without_children, "entity tokens, heads and siblings only");
  wc->excludes(woc);
  blocks_cmd->add_option("--split", blocks_split, "train, test or all")
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  blocks_cmd->add_option("--out", blocks_out, "JSON-lines file to write")->required();

  std::string train_corpus;
  ConfigOptions train_co;
  RunDirOptions train_ro;
  EvalChoice train_ec;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, history and manifest");
  train_cmd->add_option("corpus", train_corpus, "corpus JSON")->required();
  train_co.attach(train_cmd);
  train_ro.attach(train_cmd);
  train_ec.attach(train_cmd);

  std::vector<std::string> eval_checkpoints;
  std::string eval_corpus, eval_split = "test", eval_mode = "official";
  std::optional<std::size_t> eval_threads;
  RunDirOptions eval_ro;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate one checkpoint or an ensemble of several");
  eval_cmd->add_option("--checkpoint", eval_checkpoints, "checkpoint file; repeat for an ensemble")->required();
  eval_cmd->add_option("corpus", eval_corpus, "corpus JSON")->required();
  eval_cmd->add_option("--split", eval_split, "train or test")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--f1-mode", eval_mode, "official or directed")
      ->check(CLI::IsMember({"official", "directed"}))
      ->capture_default_str();
  eval_cmd->add_option("--threads", eval_threads, "worker threads");
  eval_ro.attach(eval_cmd);

  std::string ablation_corpus;
  ConfigOptions ablation_co;
  RunDirOptions ablation_ro;
  EvalChoice ablation_ec;
  auto* ablation_cmd = app.add_subcommand("ablation", "paired with/without-children comparison");
  ablation_cmd->add_option("corpus", ablation_corpus, "corpus JSON")->required();
  ablation_co.attach(ablation_cmd);
  ablation_ro.attach(ablation_cmd);
  ablation_ec.attach(ablation_cmd);

  ConfigOptions grad_co;
  std::string grad_out, grad_run_name;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite; exit 4 on failure");
  grad_co.attach(grad_cmd);
  grad_cmd->add_option("--out", grad_out, "parent directory for a run directory with the report");
  grad_cmd->add_option("--run-name", grad_run_name, "fixed run directory name");

  std::string replay_manifest, replay_out, replay_run_name;
  auto* replay_cmd = app.add_subcommand("replay", "re-run the command recorded in a run manifest");
  replay_cmd->add_option("manifest", replay_manifest, "manifest.json of an earlier run")->required();
  replay_cmd->add_option("--out", replay_out, "output location replacing the original --out")->required();
  replay_cmd->add_option("--run-name", replay_run_name, "fixed run directory name");

  std::vector<std::string> argv_store{"sbre"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv_ptrs;
  for (auto& a : argv_store) argv_ptrs.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv_ptrs.size()), argv_ptrs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest_o, args, out, err);
    if (*stats_cmd) return cmd_stats(stats_corpus, stats_out, args, out);
    if (*blocks_cmd) return cmd_blocks(blocks_corpus, with_children, blocks_split, blocks_out, args, out);
    if (*train_cmd) return cmd_train(train_corpus, train_co, train_ro, train_ec, args, out, err);
    if (*eval_cmd)
      return cmd_eval(eval_checkpoints, eval_corpus, eval_split, eval_mode, eval_threads, eval_ro, args, out);
    if (*ablation_cmd) return cmd_ablation(ablation_corpus, ablation_co, ablation_ro, ablation_ec, args, out, err);
    if (*grad_cmd) return cmd_gradcheck(grad_co, grad_out, grad_run_name, args, out);
    if (*replay_cmd) return cmd_replay(replay_manifest, replay_out, replay_run_name, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::failure);
  }
  return static_cast<int>(ExitCode::usage);
}

}  // namespace sbre
