#include "acf/cli/run_config.hpp"

#include <charconv>
#include <cmath>
#include <map>

#include "acf/error.hpp"

namespace acf {
namespace {

double parse_positive(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || end != value.data() + value.size() || !std::isfinite(v)) {
    throw Error(errc::kConfig, "key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || end != value.data() + value.size()) {
    throw Error(errc::kConfig, "key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return v;
}

const std::map<std::string, std::string>& model_key_meanings() {
  static const std::map<std::string, std::string> meanings = {
      {"mode", "acf-adaptive, acf-uniform or regression-only"},
      {"feature_channels", "output channels of each 3x3 feature layer, comma separated"},
      {"max_disp", "number of disparity hypotheses D"},
      {"cost_mode", "absolute_difference or concat_aggregate"},
      {"aggregation_blocks", "per-slice 2D aggregation blocks"},
      {"aggregation_channels", "hidden channels inside each aggregation block"},
      {"cenet_channels", "hidden channels of the confidence head"},
      {"num_supervised_outputs", "how many of the last aggregation outputs are supervised, equally weighted"},
      {"bn_momentum", "batch-norm running-statistics momentum"},
      {"bn_eps", "batch-norm epsilon"},
      {"alpha", "focal weighting exponent; 0 gives plain cross entropy"},
      {"s", "confidence-to-variance scale"},
      {"eps", "lower bound of the variance"},
      {"uniform_sigma", "fixed variance for acf-uniform"},
      {"lambda_regression", "weight of the smooth-L1 disparity loss"},
      {"lambda_confidence", "weight of the confidence regularizer"},
      {"detach_target", "1 stops the target-distribution gradient at the cost volume"},
      {"lr", "RMSprop learning rate"},
      {"decay", "RMSprop decay of the squared-gradient average"},
      {"eps_opt", "RMSprop denominator epsilon"},
      {"epochs", "training epochs"},
      {"batch_size", "samples per optimizer step"},
      {"seed", "initialization and shuffling seed"},
      {"precision", "float32 or float64 arithmetic"},
  };
  return meanings;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (!(lr_check_threshold > 0.0)) throw Error(errc::kConfig, "key 'lr_check_threshold' must be positive");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  for (const KeyValueLine& kv : parse_key_value_lines(text)) {
    try {
      if (kv.key == "lr_check_threshold") {
        cfg.lr_check_threshold = parse_positive(kv.key, kv.value);
      } else if (kv.key == "sparsify_seed") {
        cfg.sparsify_seed = parse_u64(kv.key, kv.value);
      } else if (!apply_model_key(cfg.model, kv.key, kv.value)) {
        throw Error(errc::kConfig, "unknown key '" + kv.key + "'");
      }
    } catch (const Error& e) {
      throw Error(errc::kConfig, "line " + std::to_string(kv.line) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::string to_run_config_text(const RunConfig& cfg) {
  return to_config_text(cfg.model) + "lr_check_threshold=" + format_double(cfg.lr_check_threshold) + "\n" +
         "sparsify_seed=" + std::to_string(cfg.sparsify_seed) + "\n";
}

std::vector<KeyDoc> run_config_documentation() {
  std::vector<KeyDoc> docs;
  const std::string defaults = to_config_text(ModelConfig{});
  std::map<std::string, std::string> values;
  for (const KeyValueLine& kv : parse_key_value_lines(defaults)) values[kv.key] = kv.value;
  for (const std::string& key : model_config_keys()) {
    const auto it = model_key_meanings().find(key);
    docs.push_back({key, values[key], it == model_key_meanings().end() ? "" : it->second});
  }
  docs.push_back({"lr_check_threshold", "1", "left-right consistency threshold in pixels for the OCC/NOC split"});
  docs.push_back({"sparsify_seed", "1", "seed of the random sparsification ordering"});
  return docs;
}

}  // namespace acf
