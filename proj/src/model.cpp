#include "sbre/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sbre/digest.hpp"
#include "sbre/error.hpp"
#include "sbre/random.hpp"

namespace sbre {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

std::size_t ModelConfig::max_width() const {
  return kernel_widths.empty() ? 0 : *std::max_element(kernel_widths.begin(), kernel_widths.end());
}

void ModelConfig::validate() const {
  if (word_dim == 0) throw UsageError("word_dim must be positive");
  if (kernel_widths.empty()) throw UsageError("kernel_widths must not be empty");
  for (std::size_t k : kernel_widths) {
    if (k == 0) throw UsageError("kernel widths must be positive");
    if (k > max_block_len) throw UsageError("kernel width " + std::to_string(k) + " exceeds max_block_len");
  }
  if (filters == 0 || hidden == 0) throw UsageError("filters and hidden must be positive");
  if (max_block_len == 0 || max_entity_len == 0) throw UsageError("sequence length caps must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  if (channel_mode != "per_token") throw UsageError("channel_mode '" + channel_mode + "' is not supported");
}

json to_json(const ModelConfig& c) {
  return {{"word_dim", c.word_dim},
          {"pos_dim", ModelConfig::kPosDim},
          {"dep_dim", ModelConfig::kDepDim},
          {"kernel_widths", c.kernel_widths},
          {"filters", c.filters},
          {"hidden", c.hidden},
          {"num_classes", c.num_classes},
          {"max_block_len", c.max_block_len},
          {"max_entity_len", c.max_entity_len},
          {"dropout", c.dropout},
          {"freeze_word_embeddings", c.freeze_word_embeddings},
          {"include_children", c.include_children},
          {"seed", c.seed},
          {"channel_mode", c.channel_mode}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.kernel_widths = j.at("kernel_widths").get<std::vector<std::size_t>>();
  c.filters = j.at("filters").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.max_block_len = j.at("max_block_len").get<std::size_t>();
  c.max_entity_len = j.at("max_entity_len").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.freeze_word_embeddings = j.at("freeze_word_embeddings").get<bool>();
  c.include_children = j.at("include_children").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.channel_mode = j.at("channel_mode").get<std::string>();
  if (j.at("pos_dim").get<std::size_t>() != ModelConfig::kPosDim ||
      j.at("dep_dim").get<std::size_t>() != ModelConfig::kDepDim)
    throw DataError("checkpoint tag dimensions differ from 24/41");
  return c;
}

// ---------------------------------------------------------------------------
// Features

namespace {

TokenSequence take(const StructuralBlock& block, std::span<const std::size_t> positions) {
  TokenSequence seq;
  for (std::size_t p : positions) {
    seq.word_ids.push_back(block.word_ids[p]);
    seq.role_ids.push_back(block.role_ids[p]);
    seq.pos_ids.push_back(block.pos_ids[p]);
  }
  return seq;
}

}  // namespace

InstanceFeatures make_features(const StructuralBlock& block, std::size_t label, const ModelConfig& config) {
  if (block.e1_positions.empty() || block.e2_positions.empty())
    throw std::logic_error("structural block is missing entity tokens");
  InstanceFeatures f;
  f.label = label;

  const std::size_t n = block.size();
  std::size_t start = 0, len = n;
  if (n > config.max_block_len) {
    const std::size_t lo = std::min(block.e1_positions.front(), block.e2_positions.front());
    const std::size_t hi = std::max(block.e1_positions.back(), block.e2_positions.back());
    const std::size_t centre = (lo + hi) / 2;
    const std::size_t half = config.max_block_len / 2;
    start = centre > half ? centre - half : 0;
    start = std::min(start, n - config.max_block_len);
    len = config.max_block_len;
    f.truncated = true;
  }
  std::vector<std::size_t> window(len);
  for (std::size_t i = 0; i < len; ++i) window[i] = start + i;
  f.block = take(block, window);

  auto entity = [&](const std::vector<std::size_t>& positions) {
    const std::size_t keep = std::min(positions.size(), config.max_entity_len);
    if (keep < positions.size()) f.truncated = true;
    return take(block, std::span<const std::size_t>(positions).first(keep));
  };
  f.e1 = entity(block.e1_positions);
  f.e2 = entity(block.e2_positions);
  return f;
}

// ---------------------------------------------------------------------------
// Params

std::vector<Tensor*> ModelParams::dense_tensors() {
  std::vector<Tensor*> out;
  for (auto& enc : encoders)
    for (auto& conv : enc.convs) {
      out.push_back(&conv.kernel);
      out.push_back(&conv.bias);
    }
  for (Tensor* t : {&hidden_w, &hidden_b, &out_w, &out_b}) out.push_back(t);
  return out;
}

std::vector<const Tensor*> ModelParams::dense_tensors() const {
  auto mut = const_cast<ModelParams*>(this)->dense_tensors();
  return {mut.begin(), mut.end()};
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  static constexpr const char* kEncoderNames[] = {"block", "e1", "e2"};
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("word_table", &word_table);
  for (std::size_t e = 0; e < encoders.size(); ++e) {
    for (std::size_t w = 0; w < encoders[e].convs.size(); ++w) {
      const std::string base = std::string(kEncoderNames[e]) + ".conv" + std::to_string(w);
      out.emplace_back(base + ".kernel", &encoders[e].convs[w].kernel);
      out.emplace_back(base + ".bias", &encoders[e].convs[w].bias);
    }
  }
  out.emplace_back("hidden.weight", &hidden_w);
  out.emplace_back("hidden.bias", &hidden_b);
  out.emplace_back("output.weight", &out_w);
  out.emplace_back("output.bias", &out_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
  auto mut = const_cast<ModelParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

bool ModelParams::operator==(const ModelParams& other) const {
  const auto a = named_tensors();
  const auto b = other.named_tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].first != b[i].first || !(*a[i].second == *b[i].second)) return false;
  return true;
}

ModelGrads ModelGrads::zeros_like(const ModelParams& params) {
  ModelGrads g;
  g.word = SparseRowGrad(params.word_table.rank() == 2 ? params.word_table.dim(1) : 0);
  for (const Tensor* t : params.dense_tensors()) g.dense.emplace_back(t->shape(), 0.0);
  return g;
}

void ModelGrads::clear() {
  word.clear();
  for (Tensor& t : dense) t.fill(0.0);
}

void ModelGrads::add(const ModelGrads& other) {
  word.merge(other.word);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    auto dst = dense[i].data();
    auto src = other.dense[i].data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

BoundParams bind_params(Graph& g, const ModelParams& params, ModelGrads* grads, bool freeze_word_embeddings) {
  BoundParams b;
  auto leaf = [&](const Tensor& t, std::size_t& slot) {
    Var v = grads ? g.parameter(t, &grads->dense[slot]) : g.constant_ref(t);
    ++slot;
    return v;
  };
  b.word_table = (grads && !freeze_word_embeddings) ? g.sparse_parameter(params.word_table, &grads->word)
                                                    : g.constant_ref(params.word_table);
  std::size_t slot = 0;
  for (std::size_t e = 0; e < 3; ++e) {
    for (const ConvParams& conv : params.encoders[e].convs) {
      Var k = leaf(conv.kernel, slot);
      Var bias = leaf(conv.bias, slot);
      b.convs[e].emplace_back(k, bias);
    }
  }
  b.hidden_w = leaf(params.hidden_w, slot);
  b.hidden_b = leaf(params.hidden_b, slot);
  b.out_w = leaf(params.out_w, slot);
  b.out_b = leaf(params.out_b, slot);
  return b;
}

// ---------------------------------------------------------------------------
// Forward

Var featurize(Graph& g, const BoundParams& bound, const TokenSequence& seq, const ModelConfig& config) {
  const std::size_t len = seq.size();
  if (len == 0) throw std::logic_error("cannot featurize an empty token sequence");
  constexpr std::size_t tag_dim = ModelConfig::kDepDim + ModelConfig::kPosDim;
  Tensor tags({len, tag_dim}, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    if (seq.role_ids[i] >= ModelConfig::kDepDim || seq.pos_ids[i] >= ModelConfig::kPosDim)
      throw std::logic_error("tag id outside one-hot width");
    tags.at(i, seq.role_ids[i]) = 1.0;
    tags.at(i, ModelConfig::kDepDim + seq.pos_ids[i]) = 1.0;
  }
  Var words = g.embed_lookup(bound.word_table, seq.word_ids);
  Var rows = g.concat_columns(words, g.constant(std::move(tags)));
  return g.pad_rows(rows, std::max(len, config.max_width()));
}

Var encode(Graph& g, std::span<const std::pair<Var, Var>> convs, Var input) {
  std::vector<Var> pooled;
  pooled.reserve(convs.size());
  for (const auto& [kernel, bias] : convs) {
    const std::size_t width = g.value(kernel).dim(0);
    Var x = input;
    if (g.value(x).dim(0) < width) x = g.pad_rows(x, width);
    pooled.push_back(g.max_over_time(g.relu(g.conv1d(x, kernel, bias))));
  }
  return g.concat(pooled);
}

ForwardVars forward(Graph& g, const BoundParams& bound, const InstanceFeatures& features, const ModelConfig& config,
                    const Tensor* mask) {
  ForwardVars v;
  v.block = encode(g, bound.convs[kBlockEncoder], featurize(g, bound, features.block, config));
  v.e1 = encode(g, bound.convs[kE1Encoder], featurize(g, bound, features.e1, config));
  v.e2 = encode(g, bound.convs[kE2Encoder], featurize(g, bound, features.e2, config));
  v.subtract = g.subtract3(v.block, v.e1, v.e2);
  v.multiply = g.hadamard(v.e1, v.e2);
  v.features = g.concat({v.block, v.e1, v.e2, v.subtract, v.multiply});
  if (mask) v.features = g.mul_mask(v.features, *mask);
  v.hidden = g.dense(v.features, bound.hidden_w, bound.hidden_b, Activation::relu);
  v.logits = g.dense(v.hidden, bound.out_w, bound.out_b, Activation::identity);
  return v;
}

std::vector<double> predict_probs(const ModelParams& params, const InstanceFeatures& features,
                                  const ModelConfig& config) {
  Graph g;
  const BoundParams bound = bind_params(g, params, nullptr, true);
  const ForwardVars v = forward(g, bound, features, config);
  return softmax(g.value(v.logits).data());
}

Tensor dropout_mask(const ModelConfig& config, std::uint64_t stream_seed) {
  Tensor mask({config.concat_dim()}, 1.0);
  if (config.dropout <= 0.0) return mask;
  Rng rng(stream_seed);
  const double keep = 1.0 - config.dropout;
  for (double& m : mask.data()) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

// ---------------------------------------------------------------------------
// Initialisation

namespace {

void glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : t.data()) x = rng.uniform(-limit, limit);
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::size_t vocab_size, const EmbeddingTable* embeddings) {
  config.validate();
  if (config.num_classes < 2) throw UsageError("num_classes must be at least 2");
  if (vocab_size < 2) throw UsageError("vocabulary must contain the reserved entries");
  ModelParams p;
  Rng rng(derive_seed(config.seed, 0x1417ULL));

  p.word_table = Tensor({vocab_size, config.word_dim}, 0.0);
  if (embeddings) {
    if (embeddings->dim != config.word_dim)
      throw DataError("embedding dimension " + std::to_string(embeddings->dim) + " differs from word_dim " +
                      std::to_string(config.word_dim));
    if (embeddings->table.dim(0) != vocab_size) throw DataError("embedding table does not match the vocabulary");
    p.word_table = embeddings->table;
    for (double& x : p.word_table.row(Vocab::kPadId)) x = 0.0;
  } else {
    for (std::size_t r = 2; r < vocab_size; ++r)
      for (double& x : p.word_table.row(r)) x = rng.uniform(-0.1, 0.1);
  }

  const std::size_t d = config.input_dim(), f = config.filters;
  for (auto& enc : p.encoders) {
    for (std::size_t k : config.kernel_widths) {
      ConvParams conv{Tensor({k, d, f}), Tensor({f}, 0.0)};
      glorot(conv.kernel, k * d, k * f, rng);
      enc.convs.push_back(std::move(conv));
    }
  }
  p.hidden_w = Tensor({config.hidden, config.concat_dim()});
  glorot(p.hidden_w, config.concat_dim(), config.hidden, rng);
  p.hidden_b = Tensor({config.hidden}, 0.0);
  p.out_w = Tensor({config.num_classes, config.hidden});
  glorot(p.out_w, config.hidden, config.num_classes, rng);
  p.out_b = Tensor({config.num_classes}, 0.0);
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

std::string array_bytes(const Tensor& t) {
  std::string out;
  out.reserve(t.size() * 8);
  for (double x : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

json meta_json(const TrainingMeta& m) {
  return {{"epochs", m.epochs},
          {"best_epoch", m.best_epoch},
          {"final_loss", m.final_loss},
          {"best_eval_f1", m.best_eval_f1},
          {"seed", m.seed}};
}

Checkpoint decode_checkpoint_unchecked(const std::string& bytes);

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  json arrays = json::array();
  std::string payload;
  for (const auto& [name, t] : ckpt.params.named_tensors()) {
    std::string bytes = array_bytes(*t);
    arrays.push_back({{"name", name}, {"shape", t->shape()}, {"sha256", sha256_hex(bytes)}});
    payload += bytes;
  }
  json header = {{"format_version", kCheckpointVersion},
                 {"config", to_json(ckpt.config)},
                 {"vocab_digest", ckpt.vocab_digest},
                 {"dialect", ckpt.dialect},
                 {"labels", ckpt.labels},
                 {"meta", meta_json(ckpt.meta)},
                 {"arrays", std::move(arrays)}};
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u64(out, text.size());
  out += text;
  out += payload;
  return out;
}

namespace {

Checkpoint decode_checkpoint_unchecked(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw DataError("not a checkpoint file (bad magic bytes)");
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw DataError("checkpoint header length exceeds file size");
  Checkpoint ckpt;
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw DataError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    ckpt.config = model_config_from_json(header.at("config"));
    ckpt.vocab_digest = header.at("vocab_digest").get<std::string>();
    ckpt.dialect = header.at("dialect").get<std::string>();
    ckpt.labels = header.at("labels").get<std::vector<std::string>>();
    const json& m = header.at("meta");
    ckpt.meta.epochs = m.at("epochs").get<std::size_t>();
    ckpt.meta.best_epoch = m.at("best_epoch").get<std::size_t>();
    ckpt.meta.final_loss = m.at("final_loss").get<double>();
    ckpt.meta.best_eval_f1 = m.at("best_eval_f1").get<double>();
    ckpt.meta.seed = m.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }

  // Rebuild the parameter skeleton from the config, then fill it in order.
  const ModelConfig& c = ckpt.config;
  ModelParams& p = ckpt.params;
  const json& arrays = header.at("arrays");
  if (arrays.empty() || arrays[0].at("name") != "word_table") throw DataError("checkpoint lacks a word table");
  const auto word_shape = arrays[0].at("shape").get<Shape>();
  p.word_table = Tensor(word_shape, 0.0);
  for (auto& enc : p.encoders)
    for (std::size_t k : c.kernel_widths) enc.convs.push_back({Tensor({k, c.input_dim(), c.filters}), Tensor({c.filters})});
  p.hidden_w = Tensor({c.hidden, c.concat_dim()});
  p.hidden_b = Tensor({c.hidden});
  p.out_w = Tensor({c.num_classes, c.hidden});
  p.out_b = Tensor({c.num_classes});

  auto named = p.named_tensors();
  if (named.size() != arrays.size()) throw DataError("checkpoint array count does not match its config");
  std::size_t offset = 16 + header_len;
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, t] = named[i];
    const json& a = arrays[i];
    if (a.at("name") != name || a.at("shape").get<Shape>() != t->shape())
      throw DataError("checkpoint array " + std::to_string(i) + " does not match expected " + name + " " +
                      shape_string(t->shape()));
    const std::size_t n = t->size() * 8;
    if (offset + n > bytes.size()) throw DataError("checkpoint truncated in array " + name);
    const std::string chunk = bytes.substr(offset, n);
    if (sha256_hex(chunk) != a.at("sha256").get<std::string>())
      throw DataError("checkpoint array " + name + " fails its checksum");
    for (std::size_t j = 0; j < t->size(); ++j) (*t)[j] = std::bit_cast<double>(get_u64(chunk, j * 8));
    offset += n;
  }
  if (offset != bytes.size()) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

}  // namespace

Checkpoint decode_checkpoint(const std::string& bytes) {
  try {
    return decode_checkpoint_unchecked(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  const std::string bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace sbre
