#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sbre/corpus.hpp"

namespace sbre::testing {

/// Block membership by direct definition over the head array: token j is kept
/// if it is an entity token, the head of one, shares a head with one, or
/// (with children) has one as its head.
std::vector<std::size_t> naive_block(const std::vector<std::size_t>& heads, Span e1, Span e2, bool children);

struct NaiveMacro {
  std::vector<double> precision, recall, f1;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
};

/// Per-class rates from an explicit count matrix (rows gold), averaged over
/// the classes whose mask entry is set.
NaiveMacro naive_macro(const std::vector<std::vector<std::uint64_t>>& counts, const std::vector<bool>& scored);

/// Plain valid 1-D convolution: out[t][f] = b[f] + sum_{j,d} x[t+j][d] * w[j][d][f].
std::vector<std::vector<double>> naive_conv(const std::vector<std::vector<double>>& x,
                                            const std::vector<std::vector<std::vector<double>>>& w,
                                            const std::vector<double>& b);

}  // namespace sbre::testing
