#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sbre/tensor.hpp"

namespace sbre {

enum class Dialect { semeval, kbp37 };

Dialect parse_dialect(std::string_view name);
std::string_view dialect_name(Dialect dialect);

/// One record of a SemEval2010 / KBP37 relation file. `text` keeps the
/// <e1>…</e1> and <e2>…</e2> markers verbatim.
struct RawInstance {
  std::int64_t id = 0;
  std::string text;
  std::string label;
  std::size_t line = 0;  // 1-based line of the id line, 0 if not from a file

  bool operator==(const RawInstance& o) const { return id == o.id && text == o.text && label == o.label; }
};

/// Marker offsets located inside a raw sentence.
struct MarkedText {
  std::string plain;           // markers removed
  std::string e1, e2;          // marked substrings
  std::size_t e1_begin = 0, e1_end = 0;  // byte offsets into `plain`, half-open
  std::size_t e2_begin = 0, e2_end = 0;
};

/// Removes the entity markers; throws DataError on missing, repeated or nested markers.
MarkedText strip_markers(std::string_view text);

/// Reads the two-line-per-record format (id TAB "sentence", label, optional
/// `Comment:` lines, blank separator).
std::vector<RawInstance> parse_raw(std::istream& in, Dialect dialect);
void serialize_raw(std::ostream& out, const std::vector<RawInstance>& records);

struct Token {
  std::size_t index = 0;  // 1-based
  std::string form;
  std::string pos;
  std::string deprel;
  std::size_t head = 0;  // 0 = root
};

enum class PosColumn { upos, xpos };

struct ConlluOptions {
  PosColumn pos_column = PosColumn::upos;
  /// Drop `:subtype` suffixes from DEPREL (e.g. nmod:poss -> nmod).
  bool base_deprel = false;
};

using ConlluSentence = std::vector<Token>;

/// Reads every sentence of a CoNLL-U stream. Multiword-token ranges and empty
/// nodes are skipped.
std::vector<ConlluSentence> parse_conllu(std::istream& in, const ConlluOptions& options = {});

/// Sidecar mapping from instance id to the 0-based sentence index of a CoNLL-U file.
using ParseManifest = std::unordered_map<std::int64_t, std::size_t>;

/// JSON-lines records {"id": …, "conllu_sentence_index": …}.
ParseManifest parse_manifest(std::istream& in);
/// Maps the i-th raw record to the i-th sentence; used when no manifest is given.
ParseManifest identity_manifest(const std::vector<RawInstance>& records);

enum class Split { train, test };

std::string_view split_name(Split split);

struct Span {
  std::size_t first = 0;  // inclusive, 1-based token indices
  std::size_t last = 0;

  std::size_t width() const { return last - first + 1; }
  bool contains(std::size_t i) const { return i >= first && i <= last; }
  bool operator==(const Span&) const = default;
};

struct SentenceInstance {
  std::int64_t id = 0;
  std::vector<Token> tokens;
  Span e1;
  Span e2;
  std::string label;
  std::size_t label_id = 0;
  Split split = Split::train;
};

/// Locates the marked entities inside a parsed sentence. Matching compares
/// non-whitespace characters only and requires markers on token boundaries.
SentenceInstance align_conllu(const RawInstance& raw, const ConlluSentence& parse, Split split);

/// Token-id maps. Words reserve 0 (padding) and 1 (unknown); tag and label
/// maps have no reserved entries.
class Vocab {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kUnkId = 1;
  static constexpr std::size_t kPosCapacity = 24;
  static constexpr std::size_t kDeprelCapacity = 41;

  Vocab();

  std::size_t word_id(std::string_view word) const;
  std::optional<std::size_t> pos_id(std::string_view tag) const;
  std::optional<std::size_t> deprel_id(std::string_view tag) const;
  std::optional<std::size_t> label_id(std::string_view label) const;

  std::size_t add_word(const std::string& word);
  std::size_t add_pos(const std::string& tag);
  std::size_t add_deprel(const std::string& tag);
  std::size_t add_label(const std::string& label);

  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& pos_tags() const { return pos_; }
  const std::vector<std::string>& deprels() const { return deprels_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// Hex SHA-256 over all four maps in id order.
  std::string digest() const;

  bool operator==(const Vocab& o) const {
    return words_ == o.words_ && pos_ == o.pos_ && deprels_ == o.deprels_ && labels_ == o.labels_;
  }

 private:
  std::vector<std::string> words_, pos_, deprels_, labels_;
  std::unordered_map<std::string, std::size_t> word_ix_, pos_ix_, deprel_ix_, label_ix_;
};

/// Words from train only; tags and labels from train then test, first occurrence order.
Vocab build_vocab(const std::vector<SentenceInstance>& train, const std::vector<SentenceInstance>& test);

struct EmbeddingTable {
  std::size_t dim = 0;
  Tensor table;  // |vocab| × dim
  double coverage = 0.0;  // fraction of non-reserved vocab words found
  std::size_t exact_matches = 0;
  std::size_t lowercase_matches = 0;
};

/// Reads GloVe-format text. Words absent from the file keep all-zero rows.
EmbeddingTable load_embeddings(std::istream& in, const Vocab& vocab);
EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab);

struct SplitStats {
  std::size_t count = 0;
  double mean_length = 0.0;
  std::map<std::string, std::size_t> label_counts;
  std::map<std::size_t, std::size_t> length_histogram;  // bucket start (width 10) -> count
};

struct Stats {
  std::map<std::string, SplitStats> splits;
};

Stats dataset_stats(const std::vector<SentenceInstance>& instances);

/// Relation class of a directed label: "Cause-Effect(e1,e2)" -> "Cause-Effect".
std::string relation_class(std::string_view label);
/// Label that is excluded from macro averages ("Other" / "no_relation").
std::string_view negative_label(Dialect dialect);

/// Fixed KBP37 class order used for the class-level confusion matrix
/// (no_relation first, then org_*, then per_*).
const std::vector<std::string>& kbp37_class_order();
/// Maps a KBP37 relation class ("org:top_members/employees") to its
/// confusion-matrix name ("org_top_members").
std::string kbp37_class_key(std::string_view relation_class);

/// Aligned corpus plus its vocabulary, the unit persisted by `ingest`.
struct Corpus {
  Dialect dialect = Dialect::semeval;
  std::vector<SentenceInstance> train;
  std::vector<SentenceInstance> test;
  Vocab vocab;
  std::size_t skipped = 0;
};

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

struct IngestReport {
  std::size_t raw_train = 0, raw_test = 0;
  std::vector<std::string> skipped;  // one message per dropped instance
};

struct IngestInputs {
  std::string raw_path;
  std::string conllu_path;
  std::string manifest_path;  // empty -> identity mapping
};

/// parse_raw + parse_conllu + align_conllu + tree validation for both splits,
/// then build_vocab. Instances that fail alignment or tree validation are
/// skipped and reported unless `strict` is set.
Corpus ingest(Dialect dialect, const IngestInputs& train, const IngestInputs& test, const ConlluOptions& options,
              bool strict, IngestReport& report);

}  // namespace sbre
