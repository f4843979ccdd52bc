#pragma once

// Flat key-value configuration: one `dotted.key = value` per line, `#`
// comments, later assignments win. docs/config.md lists every key.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scam/losses.hpp"
#include "scam/model.hpp"

namespace scam {

struct TrainConfig {
  int64_t steps = 5000;
  int64_t batch_size = 8;
  double lr_eg = 1e-4;
  double lr_d = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-2;
  uint64_t seed = 0;
  int64_t checkpoint_every = 1000;
  int64_t log_every = 100;
  std::string device = "cpu";
  uint64_t perceptual_seed = 7;

  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  LossWeights loss;
  TrainConfig train;

  void validate() const;
};

class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  /// Applies a `key=value` override.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted `key = value` lines.
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Builds a run configuration from defaults plus the given keys; unknown keys
/// and malformed values raise ConfigError.
RunConfig to_run_config(const KeyValueConfig& kv);

/// Full key set describing `config`, so that to_run_config(to_key_values(c)) == c.
KeyValueConfig to_key_values(const RunConfig& config);

/// Convenience: load optional file, apply overrides, convert.
RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace scam
