// Acceptance checks, one line per criterion.
//   acceptance core     properties checkable without the external corpora
//   acceptance corpus   criteria that need SemEval-2010 / KBP37 under $SBRE_DATA_DIR

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "sbre/blocks.hpp"
#include "sbre/commands.hpp"
#include "sbre/gradcheck_suite.hpp"
#include "sbre/metrics.hpp"
#include "sbre/train.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace sbre;

namespace {

int failures = 0;

void report(bool ok, const std::string& criterion, const std::string& detail) {
  std::cout << (ok ? "PASS  " : "FAIL  ") << criterion << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// Core suite

void gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const GradSuiteReport r = run_grad_suite({});
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string where;
  for (const auto& c : r.checks)
    if (c.max_rel_error >= worst) {
      worst = c.max_rel_error;
      where = c.name;
    }
  report(r.passed() && elapsed < 60.0, "gradient suite",
         std::to_string(r.checks.size()) + " checks, max rel error " + fmt(worst, 3) + " (" + where +
             ") < 1e-4, " + fmt(elapsed, 3) + " s < 60 s");
}

void block_oracle() {
  Rng rng(20240601);
  std::size_t mismatches = 0, subset_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(15);
    const auto heads = testing::random_heads(rng, n);
    const DepTree tree = DepTree::from_heads(heads);
    auto span = [&]() {
      const std::size_t first = 1 + rng.below(n);
      const std::size_t last = std::min(n, first + rng.below(3));
      return Span{first, last};
    };
    const Span e1 = span(), e2 = span();
    const IndexSet with = aggreg_block(tree, e1, e2, true);
    const IndexSet without = aggreg_block(tree, e1, e2, false);
    if (seq_tokens(with) != testing::naive_block(heads, e1, e2, true)) ++mismatches;
    if (seq_tokens(without) != testing::naive_block(heads, e1, e2, false)) ++mismatches;
    if (!std::includes(with.begin(), with.end(), without.begin(), without.end())) ++subset_violations;
  }
  report(mismatches == 0 && subset_violations == 0, "block oracle",
         "1000 random trees (<=15 nodes), " + std::to_string(mismatches) + " mismatches, " +
             std::to_string(subset_violations) + " subset violations");
}

void metric_oracle() {
  Rng rng(424242);
  double worst = 0.0;
  std::size_t empty_cases = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<std::vector<std::uint64_t>> rows(k, std::vector<std::uint64_t>(k, 0));
    for (auto& r : rows)
      for (auto& v : r) v = rng.below(2) ? rng.below(12) : 0;
    if (trial % 3 == 0) {
      const std::size_t dead = rng.below(k);  // class with no predictions and no gold
      for (std::size_t i = 0; i < k; ++i) rows[i][dead] = rows[dead][i] = 0;
    }
    std::vector<bool> mask(k, true);
    mask[rng.below(k)] = false;
    Confusion c(k);
    for (std::size_t g = 0; g < k; ++g)
      for (std::size_t p = 0; p < k; ++p)
        if (rows[g][p]) c.add(g, p, rows[g][p]);
    for (std::size_t i = 0; i < k; ++i) empty_cases += c.col_sum(i) == 0 || c.row_sum(i) == 0;
    const auto oracle = testing::naive_macro(rows, mask);
    worst = std::max({worst, std::abs(macro_f1(c, mask) - oracle.macro_f1),
                      std::abs(macro_precision(c, mask) - oracle.macro_precision),
                      std::abs(macro_recall(c, mask) - oracle.macro_recall)});
    for (double v : {macro_f1(c, mask), macro_precision(c, mask), macro_recall(c, mask)})
      if (!std::isfinite(v)) worst = INFINITY;
  }
  report(worst <= 1e-12 && empty_cases > 0, "metric oracle",
         "25 random matrices, max deviation " + fmt(worst, 3) + " <= 1e-12, " + std::to_string(empty_cases) +
             " empty-class (0/0) cases");
}

/// A 64-instance SemEval-format training set: the first 64 training instances
/// of the real corpus when present, otherwise a generated one.
std::pair<Corpus, std::string> overfit_corpus(const std::string& scratch) {
  if (const char* dir = std::getenv("SBRE_DATA_DIR"); dir && *dir) {
    const fs::path root = fs::path(dir) / "semeval";
    if (fs::exists(root / "train.txt") && fs::exists(root / "train.conllu")) {
      IngestReport r;
      const IngestInputs in{(root / "train.txt").string(), (root / "train.conllu").string(),
                            fs::exists(root / "train.manifest.jsonl") ? (root / "train.manifest.jsonl").string() : ""};
      Corpus full = ingest(Dialect::semeval, in, in, {}, false, r);
      full.train.resize(std::min<std::size_t>(64, full.train.size()));
      return {std::move(full), "SemEval-2010 training subset"};
    }
  }
  testing::SyntheticOptions o;
  o.train = 64;
  o.test = 19;
  return {testing::synthetic_corpus(scratch, o), "generated SemEval-format subset"};
}

void overfit_smoke(const std::string& scratch) {
  auto [corpus, source] = overfit_corpus(scratch + "/overfit");
  TrainSetup setup;
  setup.model.num_classes = corpus.vocab.labels().size();
  setup.train.epochs = 200;
  setup.train.stop_at_train_accuracy = 0.99;
  setup.vocab = &corpus.vocab;

  const auto items = prepare_features(corpus.train, corpus.vocab, setup.model);
  const ModelParams init = init_params(setup.model, corpus.vocab.words().size(), nullptr);
  const double initial = mean_loss(init, items, setup.model, 1);
  const double ln_k = std::log(static_cast<double>(setup.model.num_classes));

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(setup, corpus.train, {});
  const double acc = r.history.epochs.back().train_accuracy;
  const bool loss_ok = std::abs(initial - ln_k) <= 0.2 * ln_k;
  report(acc >= 0.99 && r.history.epochs.size() <= 200 && loss_ok && corpus.train.size() == 64, "overfit smoke test",
         source + ", default architecture: train accuracy " + fmt(acc) + " after " +
             std::to_string(r.history.epochs.size()) + " epochs (" + fmt(seconds_since(t0), 3) +
             " s); initial loss " + fmt(initial) + " vs ln K " + fmt(ln_k) + " (band +-20%)");
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << "sbre";
  if (code != 0)
    for (const auto& a : args) std::cerr << ' ' << a;
  if (code != 0) std::cerr << " -> " << code << '\n' << err.str();
  return code;
}

void determinism(const std::string& scratch) {
  const std::string dir = scratch + "/determinism";
  testing::SyntheticOptions o;
  o.train = 60;
  o.test = 20;
  const auto files = testing::write_synthetic(dir, o);
  const std::string corpus = dir + "/corpus.json";
  bool ok = cli({"ingest", "--train-raw", files.train_raw, "--train-conllu", files.train_conllu, "--test-raw",
                 files.test_raw, "--test-conllu", files.test_conllu, "--out", corpus}) == 0;
  const std::vector<std::string> common{"train", corpus, "--seed", "17", "--set", "epochs=4", "--threads", "2",
                                        "--out", dir + "/runs"};
  auto run = [&](const std::string& name) {
    auto args = common;
    args.insert(args.end(), {"--run-name", name});
    return cli(args) == 0;
  };
  ok = ok && run("a") && run("b");
  ok = ok && cli({"replay", dir + "/runs/a/manifest.json", "--out", dir + "/runs", "--run-name", "replayed"}) == 0;
  bool same_history = false, same_ckpt = false, same_replay = false;
  if (ok) {
    const std::string ha = slurp(dir + "/runs/a/history.csv"), ca = slurp(dir + "/runs/a/checkpoint.sbck");
    same_history = !ha.empty() && ha == slurp(dir + "/runs/b/history.csv");
    same_ckpt = !ca.empty() && ca == slurp(dir + "/runs/b/checkpoint.sbck");
    same_replay = ha == slurp(dir + "/runs/replayed/history.csv") &&
                  ca == slurp(dir + "/runs/replayed/checkpoint.sbck");
  }
  report(ok && same_history && same_ckpt && same_replay, "determinism",
         std::string("two train runs, seed 17: history.csv ") + (same_history ? "identical" : "DIFFERENT") +
             ", checkpoint " + (same_ckpt ? "identical" : "DIFFERENT") + ", manifest replay " +
             (same_replay ? "identical" : "DIFFERENT"));
}

void ensemble(const std::string& scratch) {
  testing::SyntheticOptions o;
  o.train = 76;
  o.test = 38;
  const Corpus corpus = testing::synthetic_corpus(scratch + "/ensemble", o);
  TrainSetup setup;
  setup.model.word_dim = 32;
  setup.model.filters = 16;
  setup.model.hidden = 32;
  setup.model.num_classes = corpus.vocab.labels().size();
  setup.train.epochs = 5;
  setup.vocab = &corpus.vocab;
  std::vector<Checkpoint> ckpts;
  for (std::uint64_t seed : {1, 2, 3}) {
    setup.model.seed = seed;
    ckpts.push_back(train(setup, corpus.train, {}).checkpoint);
  }
  const auto eval = [&](const std::vector<Checkpoint>& c) {
    return evaluate(c, corpus.test, corpus.vocab, Dialect::semeval, F1Mode::official);
  };
  const Evaluation single = eval({ckpts[0]});
  bool identical_ok = true;
  for (std::size_t k : {2u, 3u, 4u}) {
    const Evaluation e = eval(std::vector<Checkpoint>(k, ckpts[0]));
    identical_ok = identical_ok && e.probs == single.probs && e.metrics.confusion == single.metrics.confusion &&
                   e.metrics.macro_f1 == single.metrics.macro_f1 && e.metrics.accuracy == single.metrics.accuracy;
  }
  const Evaluation abc = eval({ckpts[0], ckpts[1], ckpts[2]});
  double worst_sum = 0.0;
  for (const auto& row : abc.probs)
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
  bool order_ok = true;
  std::vector<std::size_t> perm{0, 1, 2};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const Evaluation e = eval({ckpts[perm[0]], ckpts[perm[1]], ckpts[perm[2]]});
    order_ok = order_ok && e.probs == abc.probs && e.metrics.macro_f1 == abc.metrics.macro_f1 &&
               e.metrics.confusion == abc.metrics.confusion;
  }
  report(identical_ok && worst_sum <= 1e-12 && order_ok, "ensemble",
         std::string("k identical checkpoints (k=2,3,4) ") + (identical_ok ? "equal" : "DIFFER FROM") +
             " single-model metrics; 3 seeds: max |row sum - 1| " + fmt(worst_sum, 3) + ", metrics " +
             (order_ok ? "invariant" : "NOT invariant") + " under all 6 orders");
}

// ---------------------------------------------------------------------------
// Corpus suite

struct CorpusSpec {
  Dialect dialect;
  std::string name;
  std::size_t train, test, labels, classes;
};

std::optional<Corpus> load_real(const CorpusSpec& spec, std::string& why) {
  const char* root = std::getenv("SBRE_DATA_DIR");
  if (!root || !*root) {
    why = "SBRE_DATA_DIR is not set; " + spec.name + " corpus unavailable";
    return std::nullopt;
  }
  const fs::path dir = fs::path(root) / spec.name;
  auto part = [&](const std::string& split) {
    const fs::path manifest = dir / (split + ".manifest.jsonl");
    return IngestInputs{(dir / (split + ".txt")).string(), (dir / (split + ".conllu")).string(),
                        fs::exists(manifest) ? manifest.string() : ""};
  };
  const IngestInputs train = part("train"), test = part("test");
  for (const auto& p : {train.raw_path, train.conllu_path, test.raw_path, test.conllu_path})
    if (!fs::exists(p)) {
      why = "missing " + p;
      return std::nullopt;
    }
  try {
    IngestReport r;
    return ingest(spec.dialect, train, test, {}, false, r);
  } catch (const std::exception& e) {
    why = std::string("ingestion failed: ") + e.what();
    return std::nullopt;
  }
}

std::size_t relation_classes(const Corpus& c) {
  std::vector<std::string> classes;
  for (const auto& l : c.vocab.labels()) {
    const std::string cls = relation_class(l);
    if (std::find(classes.begin(), classes.end(), cls) == classes.end()) classes.push_back(cls);
  }
  return classes.size();
}

void corpus_suite(const std::string& scratch) {
  const std::vector<CorpusSpec> specs{{Dialect::semeval, "semeval", 8000, 2717, 19, 10},
                                      {Dialect::kbp37, "kbp37", 15917, 3405, 37, 19}};
  std::vector<std::optional<Corpus>> corpora;
  std::vector<std::string> why(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) corpora.push_back(load_real(specs[i], why[i]));

  // Ingestion counts
  {
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& s = specs[i];
      if (!corpora[i]) {
        ok = false;
        detail += s.name + ": " + why[i] + "; ";
        continue;
      }
      const Corpus& c = *corpora[i];
      const bool good = c.train.size() == s.train && c.test.size() == s.test && c.vocab.labels().size() == s.labels &&
                        (s.dialect == Dialect::semeval || relation_classes(c) == s.classes);
      ok = ok && good;
      detail += s.name + ": " + std::to_string(c.train.size()) + "/" + std::to_string(c.test.size()) + " (want " +
                std::to_string(s.train) + "/" + std::to_string(s.test) + "), " +
                std::to_string(c.vocab.labels().size()) + " labels, " + std::to_string(relation_classes(c)) +
                " classes; ";
    }
    report(ok, "ingestion counts", detail);
  }

  // Subset invariant on every real instance
  {
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (!corpora[i]) {
        ok = false;
        detail += specs[i].name + ": unavailable; ";
        continue;
      }
      std::size_t violations = 0, total = 0;
      for (const auto* split : {&corpora[i]->train, &corpora[i]->test})
        for (const auto& inst : *split) {
          const DepTree tree = build_tree(inst.tokens);
          const IndexSet with = aggreg_block(tree, inst.e1, inst.e2, true);
          const IndexSet without = aggreg_block(tree, inst.e1, inst.e2, false);
          violations += !std::includes(with.begin(), with.end(), without.begin(), without.end());
          ++total;
        }
      ok = ok && violations == 0;
      detail += specs[i].name + ": " + std::to_string(violations) + " violations in " + std::to_string(total) + "; ";
    }
    report(ok, "block subset invariant on both corpora", detail);
  }

  // Non-gating benchmark: full train + eval with the default config, and the ablation.
  {
    bool ok = true;
    std::string detail;
    const double published_f1[] = {81.1, 60.9}, published_secs[] = {4.6, 6.3};
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (!corpora[i]) {
        ok = false;
        detail += specs[i].name + ": unavailable; ";
        continue;
      }
      const Corpus& c = *corpora[i];
      TrainSetup setup;
      setup.model.num_classes = c.vocab.labels().size();
      setup.vocab = &c.vocab;
      setup.dialect = c.dialect;
      const auto [train_set, dev_set] = split_holdout(c.train, 0.1, setup.model.seed);
      const AblationReport ab = ablation(setup, train_set, dev_set, c.test);
      const Metrics& best = setup.model.include_children ? ab.with_children : ab.without_children;
      const TrainHistory& hist = setup.model.include_children ? ab.with_history : ab.without_history;
      std::cout << format_ablation(ab, c.dialect);
      detail += specs[i].name + ": macro-F1 " + fmt(100.0 * best.macro_f1, 3) + " (published " + fmt(published_f1[i], 3) +
                "), " + fmt(hist.mean_epoch_seconds(), 3) + " s/epoch (published " + fmt(published_secs[i], 2) +
                "), ablation delta " + fmt(100.0 * ab.delta(), 3) + " F1; ";
    }
    report(ok, "benchmark and ablation (non-gating numbers)", detail);
  }
  (void)scratch;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string suite = argc > 1 ? argv[1] : "core";
  if (suite != "core" && suite != "corpus" && suite != "all") {
    std::cerr << "usage: acceptance [core|corpus|all]\n";
    return 2;
  }
  const std::string scratch = testing::scratch_dir("acceptance");
  try {
    if (suite == "core" || suite == "all") {
      gradient_suite();
      block_oracle();
      metric_oracle();
      overfit_smoke(scratch);
      determinism(scratch);
      ensemble(scratch);
    }
    if (suite == "corpus" || suite == "all") corpus_suite(scratch);
  } catch (const std::exception& e) {
    report(false, "acceptance harness", std::string("unexpected exception: ") + e.what());
  }
  fs::remove_all(scratch);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
