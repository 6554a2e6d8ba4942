#include "sbre/blocks.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sbre {

IndexSet single_block(const DepTree& tree, Span entity, bool include_children) {
  if (entity.first < 1 || entity.last > tree.size() || entity.first > entity.last)
    throw std::out_of_range("entity span [" + std::to_string(entity.first) + "," + std::to_string(entity.last) +
                            "] outside sentence of " + std::to_string(tree.size()) + " tokens");
  IndexSet out;
  for (std::size_t t = entity.first; t <= entity.last; ++t) {
    out.insert(t);
    if (const auto head = tree.head_of(t)) {
      out.insert(*head);
      for (std::size_t s : tree.children_of(*head)) out.insert(s);  // siblings plus t itself
    }
    if (include_children) {
      for (std::size_t c : tree.children_of(t)) out.insert(c);
    }
  }
  return out;
}

IndexSet aggreg_block(const DepTree& tree, Span e1, Span e2, bool include_children) {
  IndexSet out = single_block(tree, e1, include_children);
  out.merge(single_block(tree, e2, include_children));
  return out;
}

std::vector<std::size_t> seq_tokens(std::span<const std::size_t> indices) {
  std::vector<std::size_t> out(indices.begin(), indices.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> seq_tokens(const IndexSet& indices) {
  return std::vector<std::size_t>(indices.begin(), indices.end());
}

StructuralBlock enrich(const SentenceInstance& sentence, std::span<const std::size_t> ranked, const Vocab& vocab) {
  StructuralBlock block;
  block.indices.assign(ranked.begin(), ranked.end());
  for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
    const std::size_t i = ranked[pos];
    if (i < 1 || i > sentence.tokens.size())
      throw std::out_of_range("block index " + std::to_string(i) + " outside sentence");
    if (pos > 0 && ranked[pos - 1] >= i) throw std::logic_error("block indices must be strictly ascending");
    const Token& tok = sentence.tokens[i - 1];
    const auto role = vocab.deprel_id(tok.deprel);
    const auto tag = vocab.pos_id(tok.pos);
    if (!role || !tag)
      throw std::logic_error("token '" + tok.form + "' of instance " + std::to_string(sentence.id) +
                             " has a tag missing from the vocabulary");
    block.word_ids.push_back(vocab.word_id(tok.form));
    block.role_ids.push_back(*role);
    block.pos_ids.push_back(*tag);
    if (sentence.e1.contains(i)) block.e1_positions.push_back(pos);
    if (sentence.e2.contains(i)) block.e2_positions.push_back(pos);
  }
  return block;
}

StructuralBlock detect_block(const SentenceInstance& sentence, const Vocab& vocab, bool include_children) {
  const DepTree tree = build_tree(sentence.tokens);
  const auto ranked = seq_tokens(aggreg_block(tree, sentence.e1, sentence.e2, include_children));
  return enrich(sentence, ranked, vocab);
}

}  // namespace sbre
