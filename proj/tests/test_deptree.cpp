#include <doctest.h>

#include <algorithm>
#include <vector>

#include "sbre/deptree.hpp"
#include "synthetic.hpp"

using namespace sbre;

namespace {

// I prefer the morning flight through Denver
const std::vector<std::size_t> kFlightHeads{2, 0, 5, 5, 2, 5, 6};

}  // namespace

TEST_CASE("flight sentence: root and children") {
  const DepTree tree = DepTree::from_heads(kFlightHeads);
  CHECK(tree.root() == 2);
  CHECK_FALSE(tree.head_of(2).has_value());
  CHECK(tree.head_of(5) == 2u);
  CHECK(tree.children_of(2) == std::vector<std::size_t>{1, 5});
  CHECK(tree.children_of(5) == std::vector<std::size_t>{3, 4, 6});
  CHECK(tree.siblings_of(1) == std::vector<std::size_t>{5});
  CHECK(tree.siblings_of(2).empty());
}

TEST_CASE("single token tree") {
  const DepTree tree = DepTree::from_heads(std::vector<std::size_t>{0});
  CHECK(tree.root() == 1);
  CHECK(tree.children_of(1).empty());
  CHECK(tree.siblings_of(1).empty());
}

TEST_CASE("malformed head arrays are rejected") {
  SUBCASE("two-node cycle") {
    try {
      DepTree::from_heads(std::vector<std::size_t>{0, 3, 2});
      FAIL("expected a cycle error");
    } catch (const TreeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("cycle") != std::string::npos);
      CHECK(msg.find('2') != std::string::npos);
      CHECK(msg.find('3') != std::string::npos);
    }
  }
  SUBCASE("no root") { CHECK_THROWS_AS(DepTree::from_heads(std::vector<std::size_t>{2, 1}), TreeError); }
  SUBCASE("two roots") { CHECK_THROWS_AS(DepTree::from_heads(std::vector<std::size_t>{0, 0, 1}), TreeError); }
  SUBCASE("self loop") { CHECK_THROWS_AS(DepTree::from_heads(std::vector<std::size_t>{0, 2}), TreeError); }
  SUBCASE("head out of range") { CHECK_THROWS_AS(DepTree::from_heads(std::vector<std::size_t>{0, 7}), TreeError); }
  SUBCASE("empty") { CHECK_THROWS_AS(DepTree::from_heads(std::vector<std::size_t>{}), TreeError); }
}

TEST_CASE("index errors") {
  const DepTree tree = DepTree::from_heads(kFlightHeads);
  CHECK_THROWS_AS(tree.children_of(0), std::out_of_range);
  CHECK_THROWS_AS(tree.head_of(8), std::out_of_range);
}

TEST_CASE("random trees satisfy the structural invariants") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const auto heads = testing::random_heads(rng, n);
    const DepTree tree = DepTree::from_heads(heads);
    std::size_t total_children = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      const auto& kids = tree.children_of(i);
      CHECK(std::is_sorted(kids.begin(), kids.end()));
      total_children += kids.size();
      const auto sib = tree.siblings_of(i);
      CHECK(std::find(sib.begin(), sib.end(), i) == sib.end());
      if (const auto h = tree.head_of(i)) {
        const auto& hk = tree.children_of(*h);
        CHECK(std::find(hk.begin(), hk.end(), i) != hk.end());
        std::vector<std::size_t> expect;
        for (std::size_t k : hk)
          if (k != i) expect.push_back(k);
        CHECK(sib == expect);
        for (std::size_t s : sib) {
          const auto back = tree.siblings_of(s);
          CHECK(std::find(back.begin(), back.end(), i) != back.end());
        }
      } else {
        CHECK(i == tree.root());
        CHECK(sib.empty());
      }
    }
    CHECK(total_children == n - 1);
  }
}

TEST_CASE("build_tree checks token numbering") {
  std::vector<Token> tokens{{1, "a", "X", "root", 0}, {3, "b", "X", "dep", 1}};
  CHECK_THROWS_AS(build_tree(tokens), DataError);
  tokens[1].index = 2;
  CHECK(build_tree(tokens).root() == 1);
}

TEST_CASE("pretty printer nests children under heads") {
  const DepTree tree = DepTree::from_heads(kFlightHeads);
  std::vector<Token> tokens;
  const char* forms[] = {"I", "prefer", "the", "morning", "flight", "through", "Denver"};
  for (std::size_t i = 0; i < 7; ++i) tokens.push_back({i + 1, forms[i], "X", "dep", kFlightHeads[i]});
  const std::string text = tree.pretty(tokens);
  CHECK(text.find("prefer") < text.find("flight"));
  CHECK(text.find("flight") < text.find("Denver"));
}
