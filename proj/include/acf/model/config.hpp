#ifndef ACF_MODEL_CONFIG_HPP_
#define ACF_MODEL_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "acf/cost_volume.hpp"

namespace acf {

// Which supervision the network is trained with.
enum class TrainingMode {
  kAdaptive,        // focal loss on unimodal targets with learned per-pixel sigma
  kUniform,         // focal loss on unimodal targets with one fixed sigma
  kRegressionOnly,  // smooth-L1 on the soft-argmin disparity only
};

enum class Precision { kFloat32, kFloat64 };

std::string to_string(TrainingMode mode);
TrainingMode parse_training_mode(const std::string& text);
std::string to_string(Precision precision);
Precision parse_precision(const std::string& text);

struct ModelConfig {
  // Network
  std::vector<std::size_t> feature_channels{16, 16, 16};
  std::size_t max_disp = 32;
  CostMode cost_mode = CostMode::kAbsoluteDifference;
  std::size_t aggregation_blocks = 1;
  std::size_t aggregation_channels = 8;
  std::size_t cenet_channels = 16;
  std::size_t num_supervised_outputs = 1;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  // Supervision
  TrainingMode mode = TrainingMode::kAdaptive;
  double alpha = 5.0;
  double s = 1.0;
  double eps = 1.0;
  double uniform_sigma = 1.2;
  double lambda_regression = 1.0;
  double lambda_confidence = 8.0;
  bool detach_target = false;

  // Optimization
  double lr = 1e-3;
  double decay = 0.9;
  double eps_opt = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  std::uint64_t seed = 1;
  Precision precision = Precision::kFloat32;

  // Throws Error(config) naming the first offending key.
  void validate() const;
};

// Sets one key from its textual value. Returns false for an unknown key;
// throws Error(config) for a malformed value.
bool apply_model_key(ModelConfig& cfg, const std::string& key, const std::string& value);

// All keys in canonical order.
const std::vector<std::string>& model_config_keys();

// Canonical `key=value` lines in fixed key order; doubles print with enough
// digits to round-trip exactly.
std::string to_config_text(const ModelConfig& cfg);

// Parses `key=value` lines (`#` starts a comment). Unknown keys and malformed
// lines throw Error(config) naming the key and 1-based line number.
ModelConfig parse_model_config(const std::string& text);

std::string format_double(double value);

struct KeyValueLine {
  std::string key;
  std::string value;
  std::size_t line = 0;  // 1-based
};

// Splits `key=value` text into trimmed entries, skipping blank lines and `#`
// comments. Throws Error(config) on a line without '=' or a repeated key.
std::vector<KeyValueLine> parse_key_value_lines(const std::string& text);

}  // namespace acf

#endif  // ACF_MODEL_CONFIG_HPP_
