#include "sbre/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "sbre/error.hpp"

namespace sbre {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty())
    throw UsageError("invalid value '" + value + "' for " + key);
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return parse_number<std::size_t>(key, value);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("invalid boolean '" + value + "' for " + key);
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  if (out.empty()) throw UsageError(key + " needs at least one value");
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "word_dim", "kernel_widths", "filters",   "hidden",    "max_block_len", "max_entity_len",
      "dropout",  "freeze_embeddings", "include_children", "seed", "lr", "beta1", "beta2", "eps",
      "batch_size", "epochs", "patience", "threads", "embeddings", "f1_mode", "stop_at_train_accuracy",
      "channel_mode"};
  return keys;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  ModelConfig& m = c.model;
  TrainConfig& t = c.train;
  if (key == "word_dim") m.word_dim = parse_size(key, value);
  else if (key == "kernel_widths") m.kernel_widths = parse_sizes(key, value);
  else if (key == "filters") m.filters = parse_size(key, value);
  else if (key == "hidden") m.hidden = parse_size(key, value);
  else if (key == "max_block_len") m.max_block_len = parse_size(key, value);
  else if (key == "max_entity_len") m.max_entity_len = parse_size(key, value);
  else if (key == "dropout") m.dropout = parse_number<double>(key, value);
  else if (key == "freeze_embeddings") m.freeze_word_embeddings = parse_bool(key, value);
  else if (key == "include_children") m.include_children = parse_bool(key, value);
  else if (key == "seed") m.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "channel_mode") m.channel_mode = value;
  else if (key == "lr") t.adam.lr = parse_number<double>(key, value);
  else if (key == "beta1") t.adam.beta1 = parse_number<double>(key, value);
  else if (key == "beta2") t.adam.beta2 = parse_number<double>(key, value);
  else if (key == "eps") t.adam.eps = parse_number<double>(key, value);
  else if (key == "batch_size") t.batch_size = parse_size(key, value);
  else if (key == "epochs") t.epochs = parse_size(key, value);
  else if (key == "patience") t.patience = parse_size(key, value);
  else if (key == "threads") t.threads = parse_size(key, value);
  else if (key == "f1_mode") t.f1_mode = parse_f1_mode(value);
  else if (key == "stop_at_train_accuracy") t.stop_at_train_accuracy = parse_number<double>(key, value);
  else if (key == "embeddings") c.embeddings = value;
  else throw UsageError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw UsageError(source + ":" + std::to_string(number) + ": expected key = value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw UsageError(source + ":" + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(body).substr(eq + 1)));
  }
  return out;
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  for (const auto& [key, value] : parse_key_values(in, path)) {
    try {
      apply_setting(config, key, value);
    } catch (const UsageError& e) {
      throw UsageError(path + ": " + e.what());
    }
  }
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("override '" + item + "' is not key=value");
    apply_setting(config, trim(std::string_view(item).substr(0, eq)), trim(std::string_view(item).substr(eq + 1)));
  }
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = to_json(c.model);
  j["lr"] = c.train.adam.lr;
  j["beta1"] = c.train.adam.beta1;
  j["beta2"] = c.train.adam.beta2;
  j["eps"] = c.train.adam.eps;
  j["batch_size"] = c.train.batch_size;
  j["epochs"] = c.train.epochs;
  j["patience"] = c.train.patience;
  j["threads"] = c.train.threads;
  j["f1_mode"] = f1_mode_name(c.train.f1_mode);
  j["stop_at_train_accuracy"] = c.train.stop_at_train_accuracy;
  j["embeddings"] = c.embeddings;
  return j;
}

}  // namespace sbre
