#include "sbre/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sbre/deptree.hpp"
#include "sbre/digest.hpp"
#include "sbre/error.hpp"

namespace sbre {

using nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!is_space(c)) out.push_back(c);
  return out;
}

template <typename T>
bool parse_integer(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool well_formed_label(std::string_view label, Dialect dialect) {
  if (label == negative_label(dialect)) return true;
  const bool directed = label.ends_with("(e1,e2)") || label.ends_with("(e2,e1)");
  return directed && label.size() > 7;
}

}  // namespace

Dialect parse_dialect(std::string_view name) {
  if (name == "semeval") return Dialect::semeval;
  if (name == "kbp37") return Dialect::kbp37;
  throw UsageError("unknown dialect '" + std::string(name) + "' (expected semeval or kbp37)");
}

std::string_view dialect_name(Dialect dialect) { return dialect == Dialect::semeval ? "semeval" : "kbp37"; }

std::string_view negative_label(Dialect dialect) { return dialect == Dialect::semeval ? "Other" : "no_relation"; }

std::string_view split_name(Split split) { return split == Split::train ? "train" : "test"; }

// ---------------------------------------------------------------------------
// Raw relation files

MarkedText strip_markers(std::string_view text) {
  struct Marker {
    std::string_view tag;
    std::size_t pos = std::string_view::npos;
  };
  std::array<Marker, 4> marks{{{"<e1>"}, {"</e1>"}, {"<e2>"}, {"</e2>"}}};
  for (Marker& m : marks) {
    m.pos = text.find(m.tag);
    if (m.pos == std::string_view::npos) throw DataError("missing marker " + std::string(m.tag));
    if (text.find(m.tag, m.pos + 1) != std::string_view::npos)
      throw DataError("marker " + std::string(m.tag) + " appears more than once");
  }
  const std::size_t o1 = marks[0].pos, c1 = marks[1].pos, o2 = marks[2].pos, c2 = marks[3].pos;
  if (c1 < o1) throw DataError("</e1> precedes <e1>");
  if (c2 < o2) throw DataError("</e2> precedes <e2>");
  const bool disjoint = c1 < o2 || c2 < o1;
  if (!disjoint) throw DataError("entity markers are nested or overlapping");

  // Rebuild the sentence without markers, tracking where each entity lands.
  std::vector<std::pair<std::size_t, std::size_t>> cuts;  // (position, length) in original
  for (const Marker& m : marks) cuts.emplace_back(m.pos, m.tag.size());
  std::sort(cuts.begin(), cuts.end());

  MarkedText out;
  std::size_t cursor = 0;
  std::array<std::size_t, 4> mapped{};
  for (const auto& [pos, len] : cuts) {
    out.plain.append(text.substr(cursor, pos - cursor));
    for (std::size_t k = 0; k < 4; ++k)
      if (marks[k].pos == pos) mapped[k] = out.plain.size();
    cursor = pos + len;
  }
  out.plain.append(text.substr(cursor));
  out.e1_begin = mapped[0];
  out.e1_end = mapped[1];
  out.e2_begin = mapped[2];
  out.e2_end = mapped[3];
  out.e1 = std::string(trim(std::string_view(out.plain).substr(out.e1_begin, out.e1_end - out.e1_begin)));
  out.e2 = std::string(trim(std::string_view(out.plain).substr(out.e2_begin, out.e2_end - out.e2_begin)));
  if (out.e1.empty() || out.e2.empty()) throw DataError("empty entity between markers");
  return out;
}

std::vector<RawInstance> parse_raw(std::istream& in, Dialect dialect) {
  std::vector<RawInstance> out;
  std::set<std::int64_t> seen;
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&](std::string& dst) {
    if (!std::getline(in, dst)) return false;
    ++lineno;
    dst = strip_cr(std::move(dst));
    return true;
  };

  while (next_line(line)) {
    if (trim(line).empty()) continue;
    const std::size_t id_line = lineno;
    auto fail = [&](const std::string& what) {
      throw DataError("line " + std::to_string(id_line) + ": " + what);
    };

    RawInstance rec;
    rec.line = id_line;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) fail("expected '<id>\\t\"<sentence>\"'");
    if (!parse_integer(std::string_view(line).substr(0, tab), rec.id)) fail("invalid instance id");
    std::string_view text = trim(std::string_view(line).substr(tab + 1));
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') text = text.substr(1, text.size() - 2);
    rec.text = std::string(text);
    try {
      strip_markers(rec.text);
    } catch (const DataError& e) {
      fail(std::string("instance ") + std::to_string(rec.id) + ": " + e.what());
    }

    std::string label_line;
    if (!next_line(label_line) || trim(label_line).empty()) fail("missing relation label");
    rec.label = std::string(trim(label_line));
    if (!well_formed_label(rec.label, dialect))
      fail("relation label '" + rec.label + "' is not valid for dialect " + std::string(dialect_name(dialect)));
    if (!seen.insert(rec.id).second) fail("duplicate instance id " + std::to_string(rec.id));

    // Optional comment lines until the blank separator.
    std::string extra;
    while (in.peek() != std::char_traits<char>::eof()) {
      if (!next_line(extra)) break;
      if (trim(extra).empty()) break;
      if (!extra.starts_with("Comment")) {
        throw DataError("line " + std::to_string(lineno) + ": unexpected content after label: " + extra);
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void serialize_raw(std::ostream& out, const std::vector<RawInstance>& records) {
  for (const RawInstance& r : records) out << r.id << "\t\"" << r.text << "\"\n" << r.label << "\n\n";
}

// ---------------------------------------------------------------------------
// CoNLL-U

std::vector<ConlluSentence> parse_conllu(std::istream& in, const ConlluOptions& options) {
  std::vector<ConlluSentence> out;
  ConlluSentence current;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&]() {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (trim(line).empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    while (true) {
      const std::size_t tab = rest.find('\t');
      cols.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    auto fail = [&](const std::string& what) {
      throw DataError("CoNLL-U line " + std::to_string(lineno) + ": " + what);
    };
    if (cols.size() != 10) fail("expected 10 tab-separated columns, found " + std::to_string(cols.size()));
    if (cols[0].find_first_of("-.") != std::string_view::npos) continue;  // multiword range / empty node

    Token tok;
    if (!parse_integer(cols[0], tok.index)) fail("invalid ID '" + std::string(cols[0]) + "'");
    if (tok.index != current.size() + 1) fail("token IDs must be consecutive from 1");
    tok.form = std::string(cols[1]);
    tok.pos = std::string(options.pos_column == PosColumn::upos ? cols[3] : cols[4]);
    if (!parse_integer(cols[6], tok.head)) fail("invalid HEAD '" + std::string(cols[6]) + "'");
    tok.deprel = std::string(cols[7]);
    if (options.base_deprel) {
      const std::size_t colon = tok.deprel.find(':');
      if (colon != std::string::npos && colon > 0) tok.deprel.resize(colon);
    }
    current.push_back(std::move(tok));
  }
  flush();
  return out;
}

ParseManifest parse_manifest(std::istream& in) {
  ParseManifest out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json rec = json::parse(line);
      const auto id = rec.at("id").get<std::int64_t>();
      const auto idx = rec.at("conllu_sentence_index").get<std::size_t>();
      if (!out.emplace(id, idx).second) throw DataError("duplicate id " + std::to_string(id));
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ParseManifest identity_manifest(const std::vector<RawInstance>& records) {
  ParseManifest out;
  for (std::size_t i = 0; i < records.size(); ++i) out.emplace(records[i].id, i);
  return out;
}

// ---------------------------------------------------------------------------
// Alignment

SentenceInstance align_conllu(const RawInstance& raw, const ConlluSentence& parse, Split split) {
  const MarkedText marked = strip_markers(raw.text);
  const std::string prefix = "instance " + std::to_string(raw.id) + ": ";

  // Positions below are counts of non-whitespace bytes.
  auto nonspace_before = [&](std::size_t byte) {
    return static_cast<std::size_t>(std::count_if(marked.plain.begin(),
                                                  marked.plain.begin() + static_cast<std::ptrdiff_t>(byte),
                                                  [](char c) { return !is_space(c); }));
  };
  const std::string surface = collapse_ws(marked.plain);
  std::string tokens_joined;
  std::vector<std::size_t> starts, ends;
  for (const Token& t : parse) {
    starts.push_back(tokens_joined.size());
    tokens_joined += collapse_ws(t.form);
    ends.push_back(tokens_joined.size());
  }
  if (surface != tokens_joined)
    throw DataError(prefix + "tokenization mismatch between sentence \"" + marked.plain + "\" and parse \"" +
                    tokens_joined + "\"");

  auto locate = [&](std::size_t b, std::size_t e, const std::string& entity) {
    const std::size_t first = nonspace_before(b), last = nonspace_before(e);
    auto fi = std::find(starts.begin(), starts.end(), first);
    auto li = std::find(ends.begin(), ends.end(), last);
    if (first == last || fi == starts.end() || li == ends.end() || (li - ends.begin()) < (fi - starts.begin())) {
      std::string covering;
      for (std::size_t i = 0; i < parse.size(); ++i)
        if (ends[i] > first && starts[i] < last) covering += (covering.empty() ? "" : " ") + parse[i].form;
      throw DataError(prefix + "entity \"" + entity + "\" does not align to token boundaries (tokens: \"" +
                      covering + "\")");
    }
    return Span{static_cast<std::size_t>(fi - starts.begin()) + 1, static_cast<std::size_t>(li - ends.begin()) + 1};
  };

  SentenceInstance inst;
  inst.id = raw.id;
  inst.tokens = parse;
  inst.e1 = locate(marked.e1_begin, marked.e1_end, marked.e1);
  inst.e2 = locate(marked.e2_begin, marked.e2_end, marked.e2);
  inst.label = raw.label;
  inst.split = split;
  return inst;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocab::Vocab() {
  add_word("<pad>");
  add_word("<unk>");
}

namespace {

std::size_t intern(std::vector<std::string>& names, std::unordered_map<std::string, std::size_t>& index,
                   const std::string& key) {
  auto [it, inserted] = index.try_emplace(key, names.size());
  if (inserted) names.push_back(key);
  return it->second;
}

std::optional<std::size_t> find_id(const std::unordered_map<std::string, std::size_t>& index, std::string_view key) {
  auto it = index.find(std::string(key));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

}  // namespace

std::size_t Vocab::word_id(std::string_view word) const { return find_id(word_ix_, word).value_or(kUnkId); }
std::optional<std::size_t> Vocab::pos_id(std::string_view tag) const { return find_id(pos_ix_, tag); }
std::optional<std::size_t> Vocab::deprel_id(std::string_view tag) const { return find_id(deprel_ix_, tag); }
std::optional<std::size_t> Vocab::label_id(std::string_view label) const { return find_id(label_ix_, label); }

std::size_t Vocab::add_word(const std::string& word) { return intern(words_, word_ix_, word); }

std::size_t Vocab::add_pos(const std::string& tag) {
  if (!pos_ix_.count(tag) && pos_.size() >= kPosCapacity)
    throw DataError("POS tag '" + tag + "' exceeds the " + std::to_string(kPosCapacity) + "-tag capacity");
  return intern(pos_, pos_ix_, tag);
}

std::size_t Vocab::add_deprel(const std::string& tag) {
  if (!deprel_ix_.count(tag) && deprels_.size() >= kDeprelCapacity)
    throw DataError("dependency label '" + tag + "' exceeds the " + std::to_string(kDeprelCapacity) +
                    "-label capacity");
  return intern(deprels_, deprel_ix_, tag);
}

std::size_t Vocab::add_label(const std::string& label) { return intern(labels_, label_ix_, label); }

std::string Vocab::digest() const {
  std::string buf;
  for (const auto* names : {&words_, &pos_, &deprels_, &labels_}) {
    for (const std::string& s : *names) {
      buf += s;
      buf.push_back('\0');
    }
    buf.push_back('\x1e');
  }
  return sha256_hex(buf);
}

Vocab build_vocab(const std::vector<SentenceInstance>& train, const std::vector<SentenceInstance>& test) {
  Vocab v;
  for (const auto& inst : train)
    for (const Token& t : inst.tokens) v.add_word(t.form);
  for (const auto* split : {&train, &test}) {
    for (const auto& inst : *split) {
      for (const Token& t : inst.tokens) {
        v.add_pos(t.pos);
        v.add_deprel(t.deprel);
      }
      v.add_label(inst.label);
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable load_embeddings(std::istream& in, const Vocab& vocab) {
  const auto& words = vocab.words();
  std::unordered_map<std::string, std::size_t> exact;
  std::unordered_map<std::string, std::vector<std::size_t>> folded;
  for (std::size_t id = 2; id < words.size(); ++id) {
    exact.emplace(words[id], id);
    folded[lowercase(words[id])].push_back(id);
  }

  enum class Match { none, lower, exact };
  std::vector<Match> matched(words.size(), Match::none);
  EmbeddingTable out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    values.clear();
    std::string num;
    while (fields >> num) {
      char* end = nullptr;
      const double v = std::strtod(num.c_str(), &end);
      if (end != num.c_str() + num.size())
        throw DataError("embeddings line " + std::to_string(lineno) + ": bad number '" + num + "'");
      values.push_back(v);
    }
    if (out.dim == 0) {
      // word2vec-style "<count> <dim>" header
      std::size_t a = 0;
      if (lineno == 1 && values.size() == 1 && parse_integer(word, a)) continue;
      if (values.empty()) throw DataError("embeddings line " + std::to_string(lineno) + ": no vector values");
      out.dim = values.size();
      out.table = Tensor({words.size(), out.dim}, 0.0);
    } else if (values.size() != out.dim) {
      throw DataError("embeddings line " + std::to_string(lineno) + ": expected " + std::to_string(out.dim) +
                      " values, found " + std::to_string(values.size()));
    }
    auto assign = [&](std::size_t id, Match kind) {
      std::copy(values.begin(), values.end(), out.table.row(id).begin());
      matched[id] = kind;
    };
    if (auto it = exact.find(word); it != exact.end()) assign(it->second, Match::exact);
    if (auto it = folded.find(word); it != folded.end()) {
      for (std::size_t id : it->second)
        if (matched[id] == Match::none) assign(id, Match::lower);
    }
  }
  if (out.dim == 0) throw DataError("embeddings file contains no vectors");
  for (Match m : matched) {
    if (m == Match::exact) ++out.exact_matches;
    if (m == Match::lower) ++out.lowercase_matches;
  }
  const std::size_t candidates = words.size() > 2 ? words.size() - 2 : 0;
  out.coverage = candidates == 0 ? 0.0
                                 : static_cast<double>(out.exact_matches + out.lowercase_matches) /
                                       static_cast<double>(candidates);
  return out;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read embeddings file " + path);
  return load_embeddings(in, vocab);
}

// ---------------------------------------------------------------------------
// Statistics and label helpers

Stats dataset_stats(const std::vector<SentenceInstance>& instances) {
  Stats stats;
  std::map<std::string, std::size_t> total_len;
  for (const auto& inst : instances) {
    const std::string split(split_name(inst.split));
    SplitStats& s = stats.splits[split];
    ++s.count;
    ++s.label_counts[inst.label];
    ++s.length_histogram[(inst.tokens.size() / 10) * 10];
    total_len[split] += inst.tokens.size();
  }
  for (auto& [name, s] : stats.splits)
    s.mean_length = static_cast<double>(total_len[name]) / static_cast<double>(s.count);
  return stats;
}

std::string relation_class(std::string_view label) {
  const std::size_t paren = label.rfind('(');
  if (paren == std::string_view::npos || !label.ends_with(")")) return std::string(label);
  return std::string(label.substr(0, paren));
}

const std::vector<std::string>& kbp37_class_order() {
  static const std::vector<std::string> order = {
      "no_relation",
      "org_alternate_names",
      "org_city_of_headquarters",
      "org_country_of_headquarters",
      "org_founded",
      "org_founded_by",
      "org_members",
      "org_stateorprovince_of_headquarters",
      "org_subsidiaries",
      "org_top_members",
      "per_alternate_names",
      "per_cities_of_residence",
      "per_countries_of_residence",
      "per_country_of_birth",
      "per_employee_of",
      "per_origin",
      "per_spouse",
      "per_stateorprovinces_of_residence",
      "per_title",
  };
  return order;
}

std::string kbp37_class_key(std::string_view cls) {
  std::string key(cls);
  std::replace(key.begin(), key.end(), ':', '_');
  if (const auto slash = key.find('/'); slash != std::string::npos) key.resize(slash);
  return key;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json instance_to_json(const SentenceInstance& inst) {
  json toks = json::array();
  for (const Token& t : inst.tokens) toks.push_back({t.form, t.pos, t.deprel, t.head});
  return {{"id", inst.id},
          {"label", inst.label},
          {"e1", {inst.e1.first, inst.e1.last}},
          {"e2", {inst.e2.first, inst.e2.last}},
          {"tokens", std::move(toks)}};
}

SentenceInstance instance_from_json(const json& j, Split split, const Vocab& vocab) {
  SentenceInstance inst;
  inst.id = j.at("id").get<std::int64_t>();
  inst.label = j.at("label").get<std::string>();
  inst.e1 = Span{j.at("e1").at(0).get<std::size_t>(), j.at("e1").at(1).get<std::size_t>()};
  inst.e2 = Span{j.at("e2").at(0).get<std::size_t>(), j.at("e2").at(1).get<std::size_t>()};
  inst.split = split;
  std::size_t idx = 0;
  for (const json& t : j.at("tokens")) {
    Token tok;
    tok.index = ++idx;
    tok.form = t.at(0).get<std::string>();
    tok.pos = t.at(1).get<std::string>();
    tok.deprel = t.at(2).get<std::string>();
    tok.head = t.at(3).get<std::size_t>();
    inst.tokens.push_back(std::move(tok));
  }
  const auto label = vocab.label_id(inst.label);
  if (!label) throw DataError("instance " + std::to_string(inst.id) + " has label missing from vocab");
  inst.label_id = *label;
  const std::size_t n = inst.tokens.size();
  if (inst.e1.first < 1 || inst.e1.last > n || inst.e1.first > inst.e1.last || inst.e2.first < 1 ||
      inst.e2.last > n || inst.e2.first > inst.e2.last)
    throw DataError("instance " + std::to_string(inst.id) + " has entity span outside the sentence");
  return inst;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  json j;
  j["format"] = "sbre-corpus";
  j["version"] = 1;
  j["dialect"] = std::string(dialect_name(corpus.dialect));
  j["vocab"] = {{"words", corpus.vocab.words()},
                {"pos", corpus.vocab.pos_tags()},
                {"deprels", corpus.vocab.deprels()},
                {"labels", corpus.vocab.labels()},
                {"digest", corpus.vocab.digest()}};
  j["skipped"] = corpus.skipped;
  for (const auto& [name, split] : {std::pair{"train", &corpus.train}, std::pair{"test", &corpus.test}}) {
    json arr = json::array();
    for (const auto& inst : *split) arr.push_back(instance_to_json(inst));
    j[name] = std::move(arr);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus " + path);
  Corpus corpus;
  try {
    const json j = json::parse(in);
    if (j.at("format") != "sbre-corpus" || j.at("version") != 1)
      throw DataError(path + " is not a version-1 corpus file");
    corpus.dialect = parse_dialect(j.at("dialect").get<std::string>());
    const json& v = j.at("vocab");
    const auto words = v.at("words").get<std::vector<std::string>>();
    if (words.size() < 2 || words[0] != "<pad>" || words[1] != "<unk>")
      throw DataError(path + ": word vocabulary lacks reserved entries");
    for (std::size_t i = 2; i < words.size(); ++i) corpus.vocab.add_word(words[i]);
    for (const auto& s : v.at("pos").get<std::vector<std::string>>()) corpus.vocab.add_pos(s);
    for (const auto& s : v.at("deprels").get<std::vector<std::string>>()) corpus.vocab.add_deprel(s);
    for (const auto& s : v.at("labels").get<std::vector<std::string>>()) corpus.vocab.add_label(s);
    if (v.at("digest").get<std::string>() != corpus.vocab.digest())
      throw DataError(path + ": vocabulary digest mismatch");
    corpus.skipped = j.value("skipped", std::size_t{0});
    for (const json& inst : j.at("train")) corpus.train.push_back(instance_from_json(inst, Split::train, corpus.vocab));
    for (const json& inst : j.at("test")) corpus.test.push_back(instance_from_json(inst, Split::test, corpus.vocab));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Ingestion pipeline

namespace {

std::vector<SentenceInstance> ingest_split(const IngestInputs& inputs, Dialect dialect, Split split,
                                           const ConlluOptions& options, bool strict, IngestReport& report,
                                           std::size_t& raw_count) {
  std::ifstream raw_in(inputs.raw_path);
  if (!raw_in) throw DataError("cannot read " + inputs.raw_path);
  const auto raw = parse_raw(raw_in, dialect);
  raw_count = raw.size();

  std::ifstream conllu_in(inputs.conllu_path);
  if (!conllu_in) throw DataError("cannot read " + inputs.conllu_path);
  const auto parses = parse_conllu(conllu_in, options);

  ParseManifest manifest;
  if (inputs.manifest_path.empty()) {
    manifest = identity_manifest(raw);
  } else {
    std::ifstream man_in(inputs.manifest_path);
    if (!man_in) throw DataError("cannot read " + inputs.manifest_path);
    manifest = parse_manifest(man_in);
  }

  std::vector<SentenceInstance> out;
  for (const RawInstance& r : raw) {
    const auto it = manifest.find(r.id);
    if (it == manifest.end() || it->second >= parses.size())
      throw DataError(std::string(split_name(split)) + " instance " + std::to_string(r.id) + " has no parse");
    try {
      SentenceInstance inst = align_conllu(r, parses[it->second], split);
      build_tree(inst.tokens);
      out.push_back(std::move(inst));
    } catch (const DataError& e) {
      if (strict) throw;
      report.skipped.push_back(std::string(split_name(split)) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

Corpus ingest(Dialect dialect, const IngestInputs& train, const IngestInputs& test, const ConlluOptions& options,
              bool strict, IngestReport& report) {
  Corpus corpus;
  corpus.dialect = dialect;
  corpus.train = ingest_split(train, dialect, Split::train, options, strict, report, report.raw_train);
  corpus.test = ingest_split(test, dialect, Split::test, options, strict, report, report.raw_test);
  corpus.vocab = build_vocab(corpus.train, corpus.test);
  for (auto* split : {&corpus.train, &corpus.test})
    for (auto& inst : *split) inst.label_id = *corpus.vocab.label_id(inst.label);
  corpus.skipped = report.skipped.size();
  return corpus;
}

}  // namespace sbre
