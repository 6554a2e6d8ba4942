#include "oracles.hpp"

namespace sbre::testing {

std::vector<std::size_t> naive_block(const std::vector<std::size_t>& heads, Span e1, Span e2, bool children) {
  const std::size_t n = heads.size();
  auto head = [&](std::size_t i) { return heads[i - 1]; };
  std::vector<std::size_t> out;
  for (std::size_t j = 1; j <= n; ++j) {
    bool keep = false;
    for (const Span& e : {e1, e2}) {
      for (std::size_t t = e.first; t <= e.last; ++t) {
        if (j == t) keep = true;
        if (head(t) != 0 && j == head(t)) keep = true;
        if (head(t) != 0 && head(j) == head(t)) keep = true;
        if (children && head(j) == t) keep = true;
      }
    }
    if (keep) out.push_back(j);
  }
  return out;
}

NaiveMacro naive_macro(const std::vector<std::vector<std::uint64_t>>& counts, const std::vector<bool>& scored) {
  const std::size_t k = counts.size();
  NaiveMacro m;
  std::size_t used = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = static_cast<double>(counts[c][c]);
    double predicted = 0.0, gold = 0.0;
    for (std::size_t o = 0; o < k; ++o) {
      predicted += static_cast<double>(counts[o][c]);
      gold += static_cast<double>(counts[c][o]);
    }
    const double p = predicted == 0.0 ? 0.0 : tp / predicted;
    const double r = gold == 0.0 ? 0.0 : tp / gold;
    const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    m.precision.push_back(p);
    m.recall.push_back(r);
    m.f1.push_back(f);
    if (scored[c]) {
      m.macro_precision += p;
      m.macro_recall += r;
      m.macro_f1 += f;
      ++used;
    }
  }
  if (used) {
    m.macro_precision /= static_cast<double>(used);
    m.macro_recall /= static_cast<double>(used);
    m.macro_f1 /= static_cast<double>(used);
  }
  return m;
}

std::vector<std::vector<double>> naive_conv(const std::vector<std::vector<double>>& x,
                                            const std::vector<std::vector<std::vector<double>>>& w,
                                            const std::vector<double>& b) {
  const std::size_t k = w.size(), f = b.size();
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t + k <= x.size(); ++t) {
    std::vector<double> row(b);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t d = 0; d < x[t + j].size(); ++d)
        for (std::size_t c = 0; c < f; ++c) row[c] += x[t + j][d] * w[j][d][c];
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace sbre::testing
