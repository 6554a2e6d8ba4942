#include "sbre/deptree.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace sbre {

DepTree DepTree::from_heads(std::span<const std::size_t> heads) {
  const std::size_t n = heads.size();
  if (n == 0) throw TreeError("empty sentence has no root");
  DepTree tree;
  tree.heads_.assign(heads.begin(), heads.end());
  tree.children_.assign(n + 1, {});

  std::vector<std::size_t> roots;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t h = heads[i - 1];
    if (h > n) throw TreeError("head " + std::to_string(h) + " of token " + std::to_string(i) + " out of range");
    if (h == i) throw TreeError("token " + std::to_string(i) + " is its own head");
    if (h == 0) {
      roots.push_back(i);
    } else {
      tree.children_[h].push_back(i);  // i ascends, so lists stay sorted
    }
  }
  if (roots.size() != 1) {
    std::string which;
    for (std::size_t r : roots) which += (which.empty() ? "" : ",") + std::to_string(r);
    throw TreeError(roots.empty() ? "tree has no root" : "tree has multiple roots: " + which);
  }
  tree.root_ = roots.front();

  // Walk each token up to the root; a revisit within one walk is a cycle.
  std::vector<int> state(n + 1, 0);  // 0 unseen, 1 on current path, 2 reaches root
  state[tree.root_] = 2;
  for (std::size_t start = 1; start <= n; ++start) {
    std::vector<std::size_t> path;
    std::size_t cur = start;
    while (state[cur] == 0) {
      state[cur] = 1;
      path.push_back(cur);
      cur = tree.heads_[cur - 1];
    }
    if (state[cur] == 1) {
      auto it = std::find(path.begin(), path.end(), cur);
      std::vector<std::size_t> cycle(it, path.end());
      std::sort(cycle.begin(), cycle.end());
      std::string nodes;
      for (std::size_t c : cycle) nodes += (nodes.empty() ? "" : ",") + std::to_string(c);
      throw TreeError("dependency cycle among tokens {" + nodes + "}");
    }
    for (std::size_t p : path) state[p] = 2;
  }
  return tree;
}

void DepTree::check_index(std::size_t i) const {
  if (i == 0 || i > heads_.size())
    throw std::out_of_range("token index " + std::to_string(i) + " outside 1.." + std::to_string(heads_.size()));
}

std::optional<std::size_t> DepTree::head_of(std::size_t i) const {
  check_index(i);
  const std::size_t h = heads_[i - 1];
  if (h == 0) return std::nullopt;
  return h;
}

const std::vector<std::size_t>& DepTree::children_of(std::size_t i) const {
  check_index(i);
  return children_[i];
}

std::vector<std::size_t> DepTree::siblings_of(std::size_t i) const {
  const auto h = head_of(i);
  if (!h) return {};
  std::vector<std::size_t> out;
  for (std::size_t c : children_[*h])
    if (c != i) out.push_back(c);
  return out;
}

std::string DepTree::pretty(std::span<const Token> tokens) const {
  std::ostringstream out;
  auto emit = [&](auto&& self, std::size_t i, std::size_t depth) -> void {
    out << std::string(depth * 2, ' ') << i;
    if (i <= tokens.size()) {
      const Token& t = tokens[i - 1];
      out << ' ' << t.form << " [" << t.deprel << ", " << t.pos << ']';
    }
    out << '\n';
    for (std::size_t c : children_[i]) self(self, c, depth + 1);
  };
  emit(emit, root_, 0);
  return out.str();
}

DepTree build_tree(std::span<const Token> tokens) {
  std::vector<std::size_t> heads;
  heads.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].index != i + 1)
      throw TreeError("token indices must run 1..n, found " + std::to_string(tokens[i].index) + " at position " +
                      std::to_string(i + 1));
    heads.push_back(tokens[i].head);
  }
  return DepTree::from_heads(heads);
}

}  // namespace sbre
