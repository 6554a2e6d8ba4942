#include <doctest.h>

#include <algorithm>
#include <vector>

#include "oracles.hpp"
#include "sbre/blocks.hpp"
#include "synthetic.hpp"

using namespace sbre;

namespace {

const std::vector<std::size_t> kFlightHeads{2, 0, 5, 5, 2, 5, 6};

std::vector<std::size_t> as_vector(const IndexSet& s) { return {s.begin(), s.end()}; }

SentenceInstance flight_sentence(Span e1, Span e2) {
  const char* forms[] = {"I", "prefer", "the", "morning", "flight", "through", "Denver"};
  const char* pos[] = {"PRON", "VERB", "DET", "NOUN", "NOUN", "ADP", "PROPN"};
  const char* rel[] = {"nsubj", "root", "det", "compound", "obj", "case", "nmod"};
  SentenceInstance s;
  for (std::size_t i = 0; i < 7; ++i) s.tokens.push_back({i + 1, forms[i], pos[i], rel[i], kFlightHeads[i]});
  s.e1 = e1;
  s.e2 = e2;
  s.label = "Other";
  return s;
}

}  // namespace

TEST_CASE("flight blocks with and without children") {
  const DepTree tree = DepTree::from_heads(kFlightHeads);
  CHECK(as_vector(single_block(tree, {5, 5}, true)) == std::vector<std::size_t>{1, 2, 3, 4, 5, 6});
  CHECK(as_vector(single_block(tree, {5, 5}, false)) == std::vector<std::size_t>{1, 2, 5});
}

TEST_CASE("single token sentence yields just that token") {
  const DepTree tree = DepTree::from_heads(std::vector<std::size_t>{0});
  CHECK(as_vector(single_block(tree, {1, 1}, true)) == std::vector<std::size_t>{1});
}

TEST_CASE("out-of-range span") {
  const DepTree tree = DepTree::from_heads(kFlightHeads);
  CHECK_THROWS_AS(single_block(tree, {6, 8}, false), std::out_of_range);
}

TEST_CASE("aggregation") {
  const DepTree tree = DepTree::from_heads(kFlightHeads);
  SUBCASE("identical spans") {
    CHECK(aggreg_block(tree, {5, 5}, {5, 5}, true) == single_block(tree, {5, 5}, true));
  }
  SUBCASE("union of the two single blocks") {
    const IndexSet a = single_block(tree, {1, 1}, false), b = single_block(tree, {7, 7}, false);
    IndexSet u = a;
    u.insert(b.begin(), b.end());
    CHECK(aggreg_block(tree, {1, 1}, {7, 7}, false) == u);
  }
  SUBCASE("overlapping blocks share tokens") {
    // e2 = "morning" has head "flight", which is e1's own block member
    const IndexSet a = single_block(tree, {5, 5}, false), b = single_block(tree, {4, 4}, false);
    std::vector<std::size_t> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    CHECK_FALSE(common.empty());
    CHECK(aggreg_block(tree, {5, 5}, {4, 4}, false).size() == a.size() + b.size() - common.size());
  }
}

TEST_CASE("seq_tokens sorts and removes duplicates") {
  CHECK(seq_tokens(std::vector<std::size_t>{5, 2, 5, 1, 2}) == std::vector<std::size_t>{1, 2, 5});
  CHECK(seq_tokens(std::vector<std::size_t>{}).empty());
}

TEST_CASE("detection agrees with the naive oracle on random trees") {
  Rng rng(2024);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(15);
    const auto heads = testing::random_heads(rng, n);
    const DepTree tree = DepTree::from_heads(heads);
    auto span = [&]() {
      const std::size_t a = 1 + rng.below(n), b = 1 + rng.below(n);
      return Span{std::min(a, b), std::min(std::max(a, b), std::min(a, b) + 2)};
    };
    const Span e1 = span(), e2 = span();
    for (bool children : {true, false}) {
      const auto got = seq_tokens(aggreg_block(tree, e1, e2, children));
      if (got != testing::naive_block(heads, e1, e2, children)) ++mismatches;
    }
    const IndexSet with = aggreg_block(tree, e1, e2, true), without = aggreg_block(tree, e1, e2, false);
    CHECK(std::includes(with.begin(), with.end(), without.begin(), without.end()));
  }
  CHECK(mismatches == 0);
}

TEST_CASE("enrichment builds parallel id sequences") {
  const SentenceInstance s = flight_sentence({5, 5}, {7, 7});
  Vocab vocab;
  for (const Token& t : s.tokens) {
    vocab.add_word(t.form);
    vocab.add_pos(t.pos);
    vocab.add_deprel(t.deprel);
  }
  vocab.add_label("Other");
  const StructuralBlock b = detect_block(s, vocab, false);
  // flight: {I, prefer, flight}; Denver: head "through", no siblings
  CHECK(b.indices == std::vector<std::size_t>{1, 2, 5, 6, 7});
  REQUIRE(b.word_ids.size() == b.size());
  REQUIRE(b.role_ids.size() == b.size());
  REQUIRE(b.pos_ids.size() == b.size());
  CHECK(b.word_ids[2] == vocab.word_id("flight"));
  CHECK(b.role_ids[2] == *vocab.deprel_id("obj"));
  CHECK(b.pos_ids[4] == *vocab.pos_id("PROPN"));
  CHECK(b.e1_positions == std::vector<std::size_t>{2});
  CHECK(b.e2_positions == std::vector<std::size_t>{4});
}

TEST_CASE("enrichment rejects unsorted indices and unknown tags") {
  const SentenceInstance s = flight_sentence({5, 5}, {7, 7});
  Vocab vocab;
  for (const Token& t : s.tokens) {
    vocab.add_word(t.form);
    vocab.add_pos(t.pos);
  }
  CHECK_THROWS_AS(enrich(s, std::vector<std::size_t>{1, 2}, vocab), std::logic_error);
  for (const Token& t : s.tokens) vocab.add_deprel(t.deprel);
  CHECK_THROWS_AS(enrich(s, std::vector<std::size_t>{2, 1}, vocab), std::logic_error);
  CHECK_NOTHROW(enrich(s, std::vector<std::size_t>{1, 2}, vocab));
}
