#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbre/blocks.hpp"
#include "sbre/corpus.hpp"
#include "sbre/tensor.hpp"

namespace sbre {

struct ModelConfig {
  std::size_t word_dim = 100;
  static constexpr std::size_t kPosDim = Vocab::kPosCapacity;
  static constexpr std::size_t kDepDim = Vocab::kDeprelCapacity;
  std::vector<std::size_t> kernel_widths{2, 3, 4, 5};
  std::size_t filters = 64;
  std::size_t hidden = 256;
  std::size_t num_classes = 0;
  std::size_t max_block_len = 40;
  std::size_t max_entity_len = 8;
  double dropout = 0.5;
  bool freeze_word_embeddings = false;
  bool include_children = false;
  std::uint64_t seed = 1;
  /// Only "per_token" (word ⊕ dep one-hot ⊕ POS one-hot rows) is implemented.
  std::string channel_mode = "per_token";

  void validate() const;
  std::size_t input_dim() const { return word_dim + kPosDim + kDepDim; }
  std::size_t max_width() const;
  std::size_t encoder_dim() const { return filters * kernel_widths.size(); }
  /// [b, e1, e2, b - e1 - e2, e1 * e2]
  std::size_t concat_dim() const { return 5 * encoder_dim(); }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// One token sequence as fed to an encoder.
struct TokenSequence {
  std::vector<std::size_t> word_ids;
  std::vector<std::size_t> role_ids;
  std::vector<std::size_t> pos_ids;

  std::size_t size() const { return word_ids.size(); }
};

/// Encoder inputs for one instance.
struct InstanceFeatures {
  TokenSequence block;
  TokenSequence e1;
  TokenSequence e2;
  std::size_t label = 0;
  bool truncated = false;
};

/// Cuts the block to max_block_len (window centred on the entity tokens) and
/// pulls the entity sub-sequences (first max_entity_len tokens each).
InstanceFeatures make_features(const StructuralBlock& block, std::size_t label, const ModelConfig& config);

struct ConvParams {
  Tensor kernel;  // width × input_dim × filters
  Tensor bias;    // filters
};

struct EncoderParams {
  std::vector<ConvParams> convs;  // one per kernel width
};

enum EncoderSlot : std::size_t { kBlockEncoder = 0, kE1Encoder = 1, kE2Encoder = 2 };

struct ModelParams {
  Tensor word_table;  // |V| × word_dim
  std::array<EncoderParams, 3> encoders;
  Tensor hidden_w, hidden_b;  // H × concat_dim, H
  Tensor out_w, out_b;        // K × H, K

  /// Every array except the word table, in checkpoint order.
  std::vector<Tensor*> dense_tensors();
  std::vector<const Tensor*> dense_tensors() const;
  /// (name, array) for every array, word table first.
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  std::vector<std::pair<std::string, Tensor*>> named_tensors();

  bool operator==(const ModelParams& other) const;
};

/// Gradient buffers mirroring ModelParams.
struct ModelGrads {
  SparseRowGrad word;
  std::vector<Tensor> dense;

  static ModelGrads zeros_like(const ModelParams& params);
  void clear();
  void add(const ModelGrads& other);
};

/// Parameter leaves of one graph.
struct BoundParams {
  Var word_table;
  std::array<std::vector<std::pair<Var, Var>>, 3> convs;
  Var hidden_w, hidden_b, out_w, out_b;
};

/// Registers the parameters in `g`. With `grads` null, every leaf is a constant.
BoundParams bind_params(Graph& g, const ModelParams& params, ModelGrads* grads, bool freeze_word_embeddings);

/// L' × (word_dim + 24 + 41) rows: word vector, then dependency one-hot, then
/// POS one-hot. Zero rows pad the sequence up to the widest kernel.
Var featurize(Graph& g, const BoundParams& bound, const TokenSequence& seq, const ModelConfig& config);

/// Per kernel width: conv1d, relu, max over time; concatenated across widths.
Var encode(Graph& g, std::span<const std::pair<Var, Var>> convs, Var input);

struct ForwardVars {
  Var block, e1, e2;
  Var subtract, multiply;
  Var features;  // concatenation fed to the hidden layer (after dropout, if any)
  Var hidden;
  Var logits;
};

/// `dropout_mask` (inverted, length concat_dim) is applied to the concatenated
/// representation when given.
ForwardVars forward(Graph& g, const BoundParams& bound, const InstanceFeatures& features, const ModelConfig& config,
                    const Tensor* dropout_mask = nullptr);

/// Inference: class probabilities, no dropout.
std::vector<double> predict_probs(const ModelParams& params, const InstanceFeatures& features,
                                  const ModelConfig& config);

/// Inverted-dropout mask for the concatenated representation.
Tensor dropout_mask(const ModelConfig& config, std::uint64_t stream_seed);

/// Glorot-uniform conv/dense weights, zero biases. The word table comes from
/// `embeddings` when given (rows of missing words stay zero); otherwise rows
/// past the reserved ids are uniform in [-0.1, 0.1].
ModelParams init_params(const ModelConfig& config, std::size_t vocab_size, const EmbeddingTable* embeddings);

struct TrainingMeta {
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double final_loss = 0.0;
  double best_eval_f1 = 0.0;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  ModelConfig config;
  std::string vocab_digest;
  std::string dialect;
  std::vector<std::string> labels;
  TrainingMeta meta;
  ModelParams params;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'B', 'C', 'N', 'N', 'R', 'E', '1'};
inline constexpr int kCheckpointVersion = 1;

/// Magic, u64 little-endian header length, JSON header, then float64
/// little-endian arrays in header order.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sbre
