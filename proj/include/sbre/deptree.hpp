#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbre/corpus.hpp"
#include "sbre/error.hpp"

namespace sbre {

/// Raised for trees with zero or several roots or with a cycle.
class TreeError : public DataError {
 public:
  using DataError::DataError;
};

/// Validated rooted dependency tree over tokens 1..n. Non-projective trees are
/// accepted.
class DepTree {
 public:
  /// `heads[i - 1]` is the head of token i (0 = root).
  static DepTree from_heads(std::span<const std::size_t> heads);

  std::size_t size() const noexcept { return heads_.size(); }
  std::size_t root() const noexcept { return root_; }

  std::optional<std::size_t> head_of(std::size_t i) const;
  /// Dependents of i, ascending.
  const std::vector<std::size_t>& children_of(std::size_t i) const;
  /// Other dependents of head_of(i), ascending; empty for the root.
  std::vector<std::size_t> siblings_of(std::size_t i) const;

  /// Indented rendering, one token per line, children below their head.
  std::string pretty(std::span<const Token> tokens = {}) const;

 private:
  void check_index(std::size_t i) const;

  std::vector<std::size_t> heads_;
  std::vector<std::vector<std::size_t>> children_;  // index 0 unused
  std::size_t root_ = 0;
};

DepTree build_tree(std::span<const Token> tokens);

}  // namespace sbre
