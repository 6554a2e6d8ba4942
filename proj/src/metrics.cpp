#include "sbre/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "sbre/error.hpp"

namespace sbre {

using nlohmann::json;

void Confusion::add(std::size_t gold, std::size_t predicted, std::uint64_t n) {
  if (gold >= k_ || predicted >= k_) throw std::out_of_range("confusion index out of range");
  counts_[gold * k_ + predicted] += n;
}

std::uint64_t Confusion::row_sum(std::size_t gold) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < k_; ++p) s += at(gold, p);
  return s;
}

std::uint64_t Confusion::col_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t g = 0; g < k_; ++g) s += at(g, predicted);
  return s;
}

std::uint64_t Confusion::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

Confusion Confusion::collapse(const std::vector<std::size_t>& group, std::size_t groups) const {
  if (group.size() != k_) throw std::invalid_argument("collapse map must cover every class");
  Confusion out(groups);
  for (std::size_t g = 0; g < k_; ++g)
    for (std::size_t p = 0; p < k_; ++p)
      if (at(g, p)) out.add(group[g], group[p], at(g, p));
  return out;
}

ClassScore score(std::uint64_t correct, std::uint64_t predicted, std::uint64_t gold) {
  ClassScore s;
  s.correct = correct;
  s.predicted = predicted;
  s.gold = gold;
  s.precision = predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
  s.recall = gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
  const double denom = s.precision + s.recall;
  s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

std::vector<ClassScore> per_class_scores(const Confusion& c) {
  std::vector<ClassScore> out;
  for (std::size_t k = 0; k < c.classes(); ++k) out.push_back(score(c.at(k, k), c.col_sum(k), c.row_sum(k)));
  return out;
}

namespace {

template <typename Field>
double masked_mean(const Confusion& c, const std::vector<bool>& scored, Field field) {
  if (scored.size() != c.classes()) throw std::invalid_argument("scored-class mask size differs from class count");
  const auto scores = per_class_scores(c);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!scored[k]) continue;
    sum += field(scores[k]);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double mean_of(const std::vector<ClassScore>& scores, double ClassScore::*field) {
  if (scores.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : scores) sum += s.*field;
  return sum / static_cast<double>(scores.size());
}

}  // namespace

double macro_f1(const Confusion& c, const std::vector<bool>& scored) {
  return masked_mean(c, scored, [](const ClassScore& s) { return s.f1; });
}

double macro_precision(const Confusion& c, const std::vector<bool>& scored) {
  return masked_mean(c, scored, [](const ClassScore& s) { return s.precision; });
}

double macro_recall(const Confusion& c, const std::vector<bool>& scored) {
  return masked_mean(c, scored, [](const ClassScore& s) { return s.recall; });
}

F1Mode parse_f1_mode(const std::string& name) {
  if (name == "official") return F1Mode::official;
  if (name == "directed") return F1Mode::directed;
  throw UsageError("unknown f1 mode '" + name + "' (expected official or directed)");
}

std::string f1_mode_name(F1Mode mode) { return mode == F1Mode::official ? "official" : "directed"; }

std::vector<ClassScore> official_class_scores(const Confusion& c, const std::vector<std::string>& labels,
                                              std::string_view negative) {
  if (labels.size() != c.classes()) throw std::invalid_argument("label list size differs from class count");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == negative) continue;
    const std::string cls = relation_class(labels[k]);
    if (!members.count(cls)) order.push_back(cls);
    members[cls].push_back(k);
  }
  std::vector<ClassScore> out;
  for (const std::string& cls : order) {
    std::uint64_t correct = 0, predicted = 0, gold = 0;
    for (std::size_t k : members[cls]) {
      correct += c.at(k, k);
      predicted += c.col_sum(k);
      gold += c.row_sum(k);
    }
    ClassScore s = score(correct, predicted, gold);
    s.name = cls;
    out.push_back(std::move(s));
  }
  return out;
}

Metrics compute_metrics(const Confusion& confusion, const std::vector<std::string>& labels, Dialect dialect,
                        F1Mode mode) {
  Metrics m;
  m.labels = labels;
  m.confusion = confusion;
  m.mode = mode;
  const std::string_view negative = negative_label(dialect);

  m.directed = per_class_scores(confusion);
  std::vector<bool> scored(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    m.directed[k].name = labels[k];
    scored[k] = labels[k] != negative;
  }
  m.relations = official_class_scores(confusion, labels, negative);

  m.macro_f1_directed = macro_f1(confusion, scored);
  m.macro_f1_official = mean_of(m.relations, &ClassScore::f1);
  if (mode == F1Mode::official) {
    m.macro_f1 = m.macro_f1_official;
    m.macro_precision = mean_of(m.relations, &ClassScore::precision);
    m.macro_recall = mean_of(m.relations, &ClassScore::recall);
  } else {
    m.macro_f1 = m.macro_f1_directed;
    m.macro_precision = macro_precision(confusion, scored);
    m.macro_recall = macro_recall(confusion, scored);
  }
  std::uint64_t correct = 0;
  for (std::size_t k = 0; k < confusion.classes(); ++k) correct += confusion.at(k, k);
  const std::uint64_t total = confusion.total();
  m.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return m;
}

json metrics_to_json(const Metrics& m) {
  auto scores_json = [](const std::vector<ClassScore>& scores) {
    json arr = json::array();
    for (const auto& s : scores)
      arr.push_back({{"name", s.name},
                     {"gold", s.gold},
                     {"predicted", s.predicted},
                     {"correct", s.correct},
                     {"precision", s.precision},
                     {"recall", s.recall},
                     {"f1", s.f1}});
    return arr;
  };
  json conf = json::array();
  for (std::size_t g = 0; g < m.confusion.classes(); ++g) {
    json row = json::array();
    for (std::size_t p = 0; p < m.confusion.classes(); ++p) row.push_back(m.confusion.at(g, p));
    conf.push_back(std::move(row));
  }
  return {{"f1_mode", f1_mode_name(m.mode)},
          {"macro_f1", m.macro_f1},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1_official", m.macro_f1_official},
          {"macro_f1_directed", m.macro_f1_directed},
          {"accuracy", m.accuracy},
          {"instances", m.confusion.total()},
          {"epoch_seconds", m.epoch_seconds},
          {"labels", m.labels},
          {"per_label", scores_json(m.directed)},
          {"per_relation", scores_json(m.relations)},
          {"confusion", std::move(conf)}};
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_confusion_csv(const Confusion& c, const std::vector<std::string>& names, const std::string& path) {
  if (names.size() != c.classes()) throw std::invalid_argument("confusion names do not match class count");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "gold\\predicted";
  for (const auto& n : names) out << ',' << csv_field(n);
  out << '\n';
  for (std::size_t g = 0; g < c.classes(); ++g) {
    out << csv_field(names[g]);
    for (std::size_t p = 0; p < c.classes(); ++p) out << ',' << c.at(g, p);
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

std::pair<Confusion, std::vector<std::string>> class_confusion(const Confusion& c,
                                                               const std::vector<std::string>& labels,
                                                               Dialect dialect) {
  std::vector<std::string> names;
  if (dialect == Dialect::kbp37) names = kbp37_class_order();
  std::vector<std::size_t> group(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    std::string key = relation_class(labels[k]);
    if (dialect == Dialect::kbp37) key = kbp37_class_key(key);
    auto it = std::find(names.begin(), names.end(), key);
    if (it == names.end()) {
      names.push_back(key);
      it = names.end() - 1;
    }
    group[k] = static_cast<std::size_t>(it - names.begin());
  }
  return {c.collapse(group, names.size()), names};
}

}  // namespace sbre
