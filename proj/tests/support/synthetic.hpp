#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sbre/corpus.hpp"
#include "sbre/random.hpp"

namespace sbre::testing {

/// The 19 SemEval-2010 directed labels.
const std::vector<std::string>& semeval_labels();

/// Uniform random tree over n tokens: `heads[i - 1]` is the head of token i.
std::vector<std::size_t> random_heads(Rng& rng, std::size_t n);

struct SyntheticOptions {
  std::size_t train = 64;
  std::size_t test = 32;
  std::size_t min_len = 5;
  std::size_t max_len = 14;
  std::uint64_t seed = 1;
};

struct SyntheticFiles {
  std::string train_raw, train_conllu, test_raw, test_conllu;
};

/// Writes SemEval-format relation files plus matching CoNLL-U parses. Each
/// sentence carries a label-specific cue word next to an entity so the task is
/// learnable; labels cycle through all 19 directed types.
SyntheticFiles write_synthetic(const std::string& dir, const SyntheticOptions& options);

/// write_synthetic followed by the regular ingestion path.
Corpus synthetic_corpus(const std::string& dir, const SyntheticOptions& options);

/// Fresh empty directory under the system temp dir.
std::string scratch_dir(const std::string& tag);

}  // namespace sbre::testing
