#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sbre/commands.hpp"
#include "sbre/config.hpp"
#include "sbre/error.hpp"
#include "synthetic.hpp"

using namespace sbre;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result sbre_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

struct CliFixture {
  std::string dir, corpus;

  CliFixture() {
    dir = testing::scratch_dir("cli");
    testing::SyntheticOptions o;
    o.train = 38;
    o.test = 19;
    const auto f = testing::write_synthetic(dir, o);
    corpus = dir + "/corpus.json";
    const Result r = sbre_cli({"ingest", "--train-raw", f.train_raw, "--train-conllu", f.train_conllu, "--test-raw",
                               f.test_raw, "--test-conllu", f.test_conllu, "--out", corpus});
    REQUIRE(r.code == 0);
  }
  ~CliFixture() { fs::remove_all(dir); }
};

const char* kSmall[] = {"--set", "word_dim=16", "--set", "filters=8", "--set", "hidden=16"};

std::vector<std::string> small_train(const CliFixture& fx, const std::string& name, const std::string& epochs) {
  std::vector<std::string> args{"train", fx.corpus, "--out", fx.dir + "/runs", "--run-name", name, "--set",
                                "epochs=" + epochs};
  args.insert(args.end(), std::begin(kSmall), std::end(kSmall));
  return args;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(sbre_cli({}).code == 2);
  CHECK(sbre_cli({"frobnicate"}).code == 2);
  CHECK(sbre_cli({"stats"}).code == 2);
  CHECK(sbre_cli({"stats", "x.json", "--bogus"}).code == 2);
  CHECK(sbre_cli({"--help"}).code == 0);
  CHECK(sbre_cli({"--version"}).out.find(kToolVersion) != std::string::npos);
}

TEST_CASE("missing inputs exit with 3") {
  CHECK(sbre_cli({"stats", "/nonexistent/corpus.json"}).code == 3);
  const std::string dir = testing::scratch_dir("cli-missing");
  CHECK(sbre_cli({"ingest", "--train-raw", "a", "--train-conllu", "b", "--test-raw", "c", "--test-conllu", "d",
                  "--out", dir + "/x.json"})
            .code == 3);
  fs::remove_all(dir);
}

TEST_CASE("ingest writes a manifest and stats reports the counts") {
  CliFixture fx;
  const json manifest = read_json(fx.corpus + ".manifest.json");
  CHECK(manifest.at("command") == "ingest");
  CHECK(manifest.at("status") == "complete");
  CHECK(manifest.at("inputs").size() == 4);
  CHECK(manifest.at("inputs")[0].at("sha256").get<std::string>().size() == 64);
  CHECK(manifest.at("version") == kToolVersion);

  const Result r = sbre_cli({"stats", fx.corpus});
  REQUIRE(r.code == 0);
  const json stats = json::parse(r.out);
  CHECK(stats.at("train").at("count") == 38);
  CHECK(stats.at("test").at("count") == 19);
  CHECK(stats.at("labels") == 19);
}

TEST_CASE("relative inputs resolve against SBRE_DATA_DIR") {
  CliFixture fx;
  ::setenv("SBRE_DATA_DIR", fx.dir.c_str(), 1);
  CHECK(resolve_input("corpus.json") == (fs::path(fx.dir) / "corpus.json").string());
  CHECK(sbre_cli({"stats", "corpus.json"}).code == 0);
  ::unsetenv("SBRE_DATA_DIR");
  CHECK(resolve_input("corpus.json") == "corpus.json");
}

TEST_CASE("blocks emits one JSON line per instance") {
  CliFixture fx;
  const std::string path = fx.dir + "/blocks.jsonl";
  REQUIRE(sbre_cli({"blocks", fx.corpus, "--with-children", "--split", "test", "--out", path}).code == 0);
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const json rec = json::parse(line);
    CHECK(rec.at("variant") == "with_children");
    CHECK(rec.at("indices").size() == rec.at("forms").size());
    CHECK(rec.at("roles").size() == rec.at("pos").size());
    ++n;
  }
  CHECK(n == 19);
  CHECK(sbre_cli({"blocks", fx.corpus, "--with-children", "--without-children", "--out", path}).code == 2);
}

TEST_CASE("train and eval: a memorising checkpoint scores 1.0 on its own training data") {
  CliFixture fx;
  auto args = small_train(fx, "fit", "200");
  args.insert(args.end(), {"--set", "stop_at_train_accuracy=1", "--set", "dropout=0", "--set", "lr=0.01",
                           "--eval-set", "none"});
  const Result t = sbre_cli(args);
  REQUIRE(t.code == 0);
  const fs::path run = fs::path(fx.dir) / "runs" / "fit";
  for (const char* f : {"manifest.json", "checkpoint.sbck", "history.csv", "epoch_times.csv", "config.resolved"})
    CHECK(fs::exists(run / f));
  const json manifest = read_json((run / "manifest.json").string());
  CHECK(manifest.at("seed") == 1);
  CHECK(manifest.at("config").at("epochs") == 200);
  CHECK(manifest.at("config").at("word_dim") == 16);

  const Result e = sbre_cli({"eval", fx.corpus, "--checkpoint", (run / "checkpoint.sbck").string(), "--split",
                             "train", "--out", fx.dir + "/evals", "--run-name", "self"});
  REQUIRE(e.code == 0);
  const fs::path ev = fs::path(fx.dir) / "evals" / "self";
  const json metrics = read_json((ev / "metrics.json").string());
  CHECK(metrics.at("macro_f1").get<double>() == 1.0);
  CHECK(metrics.at("accuracy").get<double>() == 1.0);
  CHECK(fs::exists(ev / "confusion.csv"));
  CHECK(fs::exists(ev / "confusion_classes.csv"));
  CHECK(fs::exists(ev / "predictions.tsv"));

  // Re-using a run name is refused.
  CHECK(sbre_cli({"eval", fx.corpus, "--checkpoint", (run / "checkpoint.sbck").string(), "--out",
                  fx.dir + "/evals", "--run-name", "self"})
            .code == 2);
}

TEST_CASE("run directories default to timestamp and seed") {
  CliFixture fx;
  auto args = small_train(fx, "", "1");
  args.erase(args.begin() + 4, args.begin() + 6);  // drop --run-name
  args.insert(args.end(), {"--seed", "23"});
  const Result r = sbre_cli(args);
  REQUIRE(r.code == 0);
  const std::string dir = r.out.substr(0, r.out.find('\n'));
  CHECK(dir.size() > 7);
  CHECK(dir.substr(dir.size() - 7) == "-seed23");
}

TEST_CASE("checkpoint and corpus vocabularies must match") {
  CliFixture fx;
  REQUIRE(sbre_cli(small_train(fx, "m", "1")).code == 0);
  const std::string ckpt = fx.dir + "/runs/m/checkpoint.sbck";

  const std::string other_dir = testing::scratch_dir("cli-other");
  testing::SyntheticOptions o;
  o.train = 38;
  o.test = 19;
  o.seed = 99;
  const auto f = testing::write_synthetic(other_dir, o);
  const std::string other = other_dir + "/corpus.json";
  REQUIRE(sbre_cli({"ingest", "--train-raw", f.train_raw, "--train-conllu", f.train_conllu, "--test-raw",
                    f.test_raw, "--test-conllu", f.test_conllu, "--out", other})
              .code == 0);
  CHECK(sbre_cli({"eval", other, "--checkpoint", ckpt, "--out", fx.dir + "/evals"}).code == 3);
  fs::remove_all(other_dir);

  std::ofstream(fx.dir + "/bad.sbck") << "not a checkpoint";
  CHECK(sbre_cli({"eval", fx.corpus, "--checkpoint", fx.dir + "/bad.sbck", "--out", fx.dir + "/evals"}).code == 3);
}

TEST_CASE("divergence exits with 4 after the manifest was written") {
  CliFixture fx;
  auto args = small_train(fx, "boom", "3");
  args.insert(args.end(), {"--set", "lr=1e305"});
  const Result r = sbre_cli(args);
  CHECK(r.code == 4);
  const json manifest = read_json(fx.dir + "/runs/boom/manifest.json");
  CHECK(manifest.at("status") == "failed");
}

TEST_CASE("config files, overrides and unknown keys") {
  CliFixture fx;
  const std::string cfg = fx.dir + "/run.cfg";
  std::ofstream(cfg) << "# small model\nword_dim = 12\nkernel_widths = 2, 3\nepochs = 2  # short\nseed = 5\n";
  RunConfig c;
  apply_config_file(c, cfg);
  apply_overrides(c, {"epochs=3"});
  CHECK(c.model.word_dim == 12);
  CHECK(c.model.kernel_widths == std::vector<std::size_t>{2, 3});
  CHECK(c.train.epochs == 3);
  CHECK(c.model.seed == 5);
  CHECK_THROWS_AS(apply_overrides(c, {"wordDim=3"}), UsageError);
  CHECK_THROWS_AS(apply_overrides(c, {"dropout=lots"}), UsageError);

  auto args = small_train(fx, "cfg", "1");
  args.insert(args.end(), {"--config", cfg, "--seed", "8"});
  REQUIRE(sbre_cli(args).code == 0);
  const json manifest = read_json(fx.dir + "/runs/cfg/manifest.json");
  CHECK(manifest.at("seed") == 8);  // flags win over the file
  CHECK(manifest.at("config").at("epochs") == 1);
  CHECK(manifest.at("config").at("word_dim") == 16);

  std::ofstream(fx.dir + "/bad.cfg") << "colour = blue\n";
  auto bad = small_train(fx, "bad", "1");
  bad.insert(bad.end(), {"--config", fx.dir + "/bad.cfg"});
  CHECK(sbre_cli(bad).code == 2);
}

TEST_CASE("identical train invocations give identical history files") {
  CliFixture fx;
  REQUIRE(sbre_cli(small_train(fx, "one", "3")).code == 0);
  REQUIRE(sbre_cli(small_train(fx, "two", "3")).code == 0);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  CHECK(slurp(fx.dir + "/runs/one/history.csv") == slurp(fx.dir + "/runs/two/history.csv"));
  CHECK(slurp(fx.dir + "/runs/one/checkpoint.sbck") == slurp(fx.dir + "/runs/two/checkpoint.sbck"));
}

TEST_CASE("ablation writes the paired report") {
  CliFixture fx;
  std::vector<std::string> args{"ablation", fx.corpus, "--out", fx.dir + "/runs", "--run-name", "ab", "--set",
                                "epochs=1"};
  args.insert(args.end(), std::begin(kSmall), std::end(kSmall));
  const Result r = sbre_cli(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Block with-children") != std::string::npos);
  const json report = read_json(fx.dir + "/runs/ab/ablation.json");
  CHECK(report.contains("delta_macro_f1"));
}

TEST_CASE("gradcheck command") {
  const std::string dir = testing::scratch_dir("cli-grad");
  const Result r = sbre_cli({"gradcheck", "--out", dir, "--run-name", "g"});
  CHECK(r.code == 0);
  CHECK(r.out.find("gradient suite passed") != std::string::npos);
  CHECK(fs::exists(fs::path(dir) / "g" / "gradcheck.txt"));
  fs::remove_all(dir);
}
