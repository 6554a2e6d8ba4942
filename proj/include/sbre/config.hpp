#pragma once

#include <istream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sbre/model.hpp"
#include "sbre/train.hpp"

namespace sbre {

/// Everything a run needs besides its inputs.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string embeddings;  // GloVe text file; empty -> random word vectors
};

/// Lines of `key = value`; `#` starts a comment, blank lines are ignored.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in, const std::string& source);

/// Applies one setting. Unknown keys and malformed values throw UsageError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads a config file over `config`.
void apply_config_file(RunConfig& config, const std::string& path);

/// "key=value" overrides, applied after the file.
void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides);

nlohmann::json to_json(const RunConfig& config);

/// Names accepted by apply_setting.
const std::vector<std::string>& config_keys();

}  // namespace sbre
