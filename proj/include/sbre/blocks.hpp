#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <vector>

#include "sbre/corpus.hpp"
#include "sbre/deptree.hpp"

namespace sbre {

using IndexSet = std::set<std::size_t>;

/// Tokens structurally tied to one entity: each entity token with its head,
/// its siblings and, for the with-children variant, its children. A root
/// token contributes no head.
IndexSet single_block(const DepTree& tree, Span entity, bool include_children);

/// Union of the single blocks of both entities.
IndexSet aggreg_block(const DepTree& tree, Span e1, Span e2, bool include_children);

/// Selected indices in surface order, duplicates removed.
std::vector<std::size_t> seq_tokens(std::span<const std::size_t> indices);
std::vector<std::size_t> seq_tokens(const IndexSet& indices);

/// Block tokens with parallel word / dependency-label / POS id sequences.
/// The per-token "role" is the token's dependency label.
struct StructuralBlock {
  std::vector<std::size_t> indices;  // 1-based token indices, ascending
  std::vector<std::size_t> word_ids;
  std::vector<std::size_t> role_ids;
  std::vector<std::size_t> pos_ids;
  std::vector<std::size_t> e1_positions;  // offsets into `indices`
  std::vector<std::size_t> e2_positions;

  std::size_t size() const { return indices.size(); }
};

StructuralBlock enrich(const SentenceInstance& sentence, std::span<const std::size_t> ranked, const Vocab& vocab);

/// build_tree + aggreg_block + seq_tokens + enrich.
StructuralBlock detect_block(const SentenceInstance& sentence, const Vocab& vocab, bool include_children);

}  // namespace sbre
