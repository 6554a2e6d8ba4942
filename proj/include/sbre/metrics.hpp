#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbre/corpus.hpp"

namespace sbre {

/// K×K counts, rows = gold, columns = predicted.
class Confusion {
 public:
  explicit Confusion(std::size_t classes = 0) : k_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return k_; }
  void add(std::size_t gold, std::size_t predicted, std::uint64_t n = 1);
  std::uint64_t at(std::size_t gold, std::size_t predicted) const { return counts_[gold * k_ + predicted]; }
  std::uint64_t row_sum(std::size_t gold) const;
  std::uint64_t col_sum(std::size_t predicted) const;
  std::uint64_t total() const;

  /// Merges classes: entry (g, p) moves to (group[g], group[p]).
  Confusion collapse(const std::vector<std::size_t>& group, std::size_t groups) const;

  bool operator==(const Confusion&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

struct ClassScore {
  std::string name;
  std::uint64_t gold = 0, predicted = 0, correct = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// P = correct / predicted, R = correct / gold, F1 = 2PR / (P + R), with every
/// 0/0 taken as 0.
ClassScore score(std::uint64_t correct, std::uint64_t predicted, std::uint64_t gold);

std::vector<ClassScore> per_class_scores(const Confusion& confusion);

/// Means over the classes whose mask entry is true. An empty mask selects nothing and yields 0.
double macro_f1(const Confusion& confusion, const std::vector<bool>& scored);
double macro_precision(const Confusion& confusion, const std::vector<bool>& scored);
double macro_recall(const Confusion& confusion, const std::vector<bool>& scored);

/// directed: every directed relation type is its own class.
/// official: directed types are grouped into relation classes and a prediction
/// counts as correct only with the right direction (SemEval scorer convention).
/// Both exclude the negative label from the average.
enum class F1Mode { directed, official };

F1Mode parse_f1_mode(const std::string& name);
std::string f1_mode_name(F1Mode mode);

/// Per-relation-class scores with direction-sensitive correctness.
std::vector<ClassScore> official_class_scores(const Confusion& confusion, const std::vector<std::string>& labels,
                                              std::string_view negative);

struct Metrics {
  std::vector<std::string> labels;
  Confusion confusion;
  std::vector<ClassScore> directed;   // one per label
  std::vector<ClassScore> relations;  // one per relation class, negative excluded
  double macro_f1_directed = 0.0;
  double macro_f1_official = 0.0;
  double macro_precision = 0.0;  // selected mode
  double macro_recall = 0.0;     // selected mode
  double macro_f1 = 0.0;         // selected mode
  double accuracy = 0.0;
  F1Mode mode = F1Mode::official;
  double epoch_seconds = 0.0;  // mean training epoch time when known
};

Metrics compute_metrics(const Confusion& confusion, const std::vector<std::string>& labels, Dialect dialect,
                        F1Mode mode);

nlohmann::json metrics_to_json(const Metrics& metrics);

/// Header row and column carry the names; cells are raw counts.
void write_confusion_csv(const Confusion& confusion, const std::vector<std::string>& names, const std::string& path);

/// Direction-free class-level confusion. KBP37 uses the fixed class order
/// (no_relation = 0 … per_title = 18); SemEval uses first appearance.
std::pair<Confusion, std::vector<std::string>> class_confusion(const Confusion& confusion,
                                                               const std::vector<std::string>& labels,
                                                               Dialect dialect);

}  // namespace sbre
