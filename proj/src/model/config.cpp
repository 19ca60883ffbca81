#include "acf/model/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "acf/error.hpp"

namespace acf {

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kAdaptive:
      return "acf-adaptive";
    case TrainingMode::kUniform:
      return "acf-uniform";
    case TrainingMode::kRegressionOnly:
      return "regression-only";
  }
  return "?";
}

TrainingMode parse_training_mode(const std::string& text) {
  if (text == "acf-adaptive") return TrainingMode::kAdaptive;
  if (text == "acf-uniform") return TrainingMode::kUniform;
  if (text == "regression-only") return TrainingMode::kRegressionOnly;
  throw Error(errc::kConfig, "unknown mode '" + text + "' (acf-adaptive|acf-uniform|regression-only)");
}

std::string to_string(Precision precision) { return precision == Precision::kFloat32 ? "float32" : "float64"; }

Precision parse_precision(const std::string& text) {
  if (text == "float32") return Precision::kFloat32;
  if (text == "float64") return Precision::kFloat64;
  throw Error(errc::kConfig, "unknown precision '" + text + "' (float32|float64)");
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(errc::kConfig, "key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(errc::kConfig, "key '" + key + "': '" + text + "' is not a non-negative integer");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(errc::kConfig, "key '" + key + "': '" + text + "' is not a boolean (true|false)");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(parse_uint(key, trim(item))));
  return out;
}

struct KeySpec {
  std::string name;
  std::function<void(ModelConfig&, const std::string&)> set;
  std::function<std::string(const ModelConfig&)> get;
};

#define ACF_DOUBLE_KEY(field)                                                                   \
  KeySpec {                                                                                     \
    #field, [](ModelConfig& c, const std::string& v) { c.field = parse_double(#field, v); },     \
        [](const ModelConfig& c) { return format_double(c.field); }                             \
  }
#define ACF_SIZE_KEY(field)                                                                             \
  KeySpec {                                                                                             \
    #field, [](ModelConfig& c, const std::string& v) { c.field = static_cast<std::size_t>(parse_uint(#field, v)); }, \
        [](const ModelConfig& c) { return std::to_string(c.field); }                                    \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      KeySpec{"mode", [](ModelConfig& c, const std::string& v) { c.mode = parse_training_mode(v); },
              [](const ModelConfig& c) { return to_string(c.mode); }},
      KeySpec{"feature_channels",
              [](ModelConfig& c, const std::string& v) { c.feature_channels = parse_list("feature_channels", v); },
              [](const ModelConfig& c) {
                std::string out;
                for (std::size_t i = 0; i < c.feature_channels.size(); ++i) {
                  if (i) out += ',';
                  out += std::to_string(c.feature_channels[i]);
                }
                return out;
              }},
      ACF_SIZE_KEY(max_disp),
      KeySpec{"cost_mode", [](ModelConfig& c, const std::string& v) { c.cost_mode = parse_cost_mode(v); },
              [](const ModelConfig& c) { return to_string(c.cost_mode); }},
      ACF_SIZE_KEY(aggregation_blocks),
      ACF_SIZE_KEY(aggregation_channels),
      ACF_SIZE_KEY(cenet_channels),
      ACF_SIZE_KEY(num_supervised_outputs),
      ACF_DOUBLE_KEY(bn_momentum),
      ACF_DOUBLE_KEY(bn_eps),
      ACF_DOUBLE_KEY(alpha),
      ACF_DOUBLE_KEY(s),
      ACF_DOUBLE_KEY(eps),
      ACF_DOUBLE_KEY(uniform_sigma),
      ACF_DOUBLE_KEY(lambda_regression),
      ACF_DOUBLE_KEY(lambda_confidence),
      KeySpec{"detach_target",
              [](ModelConfig& c, const std::string& v) { c.detach_target = parse_bool("detach_target", v); },
              [](const ModelConfig& c) { return std::string(c.detach_target ? "true" : "false"); }},
      ACF_DOUBLE_KEY(lr),
      ACF_DOUBLE_KEY(decay),
      ACF_DOUBLE_KEY(eps_opt),
      ACF_SIZE_KEY(epochs),
      ACF_SIZE_KEY(batch_size),
      KeySpec{"seed", [](ModelConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); },
              [](const ModelConfig& c) { return std::to_string(c.seed); }},
      KeySpec{"precision", [](ModelConfig& c, const std::string& v) { c.precision = parse_precision(v); },
              [](const ModelConfig& c) { return to_string(c.precision); }},
  };
  return specs;
}

#undef ACF_DOUBLE_KEY
#undef ACF_SIZE_KEY

void fail(const std::string& key, const std::string& why) {
  throw Error(errc::kConfig, "key '" + key + "': " + why);
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_channels.empty()) fail("feature_channels", "needs at least one layer");
  for (const std::size_t c : feature_channels) {
    if (c == 0) fail("feature_channels", "channel counts must be positive");
  }
  if (max_disp < 2) fail("max_disp", "must be at least 2");
  if (aggregation_channels == 0) fail("aggregation_channels", "must be positive");
  if (cenet_channels == 0) fail("cenet_channels", "must be positive");
  if (num_supervised_outputs < 1 || num_supervised_outputs > 3) fail("num_supervised_outputs", "must be 1, 2 or 3");
  if (cost_mode == CostMode::kConcatAggregate && aggregation_blocks == 0) {
    fail("aggregation_blocks", "concat_aggregate needs at least one aggregation block");
  }
  if (num_supervised_outputs > std::max<std::size_t>(aggregation_blocks, 1)) {
    fail("num_supervised_outputs", "cannot exceed aggregation_blocks");
  }
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) fail("bn_momentum", "must lie in [0, 1]");
  if (!(bn_eps > 0.0)) fail("bn_eps", "must be positive");
  if (!(alpha >= 0.0)) fail("alpha", "must be >= 0");
  if (!(s >= 0.0)) fail("s", "must be >= 0");
  if (!(eps > 0.0)) fail("eps", "must be positive");
  if (!(uniform_sigma > 0.0)) fail("uniform_sigma", "must be positive");
  if (!(lambda_regression >= 0.0)) fail("lambda_regression", "must be >= 0");
  if (!(lambda_confidence >= 0.0)) fail("lambda_confidence", "must be >= 0");
  if (!(lr >= 0.0)) fail("lr", "must be >= 0");
  if (!(decay >= 0.0 && decay < 1.0)) fail("decay", "must lie in [0, 1)");
  if (!(eps_opt > 0.0)) fail("eps_opt", "must be positive");
  if (batch_size == 0) fail("batch_size", "must be positive");
}

bool apply_model_key(ModelConfig& cfg, const std::string& key, const std::string& value) {
  for (const KeySpec& spec : key_specs()) {
    if (spec.name == key) {
      spec.set(cfg, value);
      return true;
    }
  }
  return false;
}

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const KeySpec& spec : key_specs()) out.push_back(spec.name);
    return out;
  }();
  return keys;
}

std::string to_config_text(const ModelConfig& cfg) {
  std::string out;
  for (const KeySpec& spec : key_specs()) out += spec.name + "=" + spec.get(cfg) + "\n";
  return out;
}

std::vector<KeyValueLine> parse_key_value_lines(const std::string& text) {
  std::vector<KeyValueLine> out;
  std::set<std::string> seen;
  std::stringstream ss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(errc::kConfig, "line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    KeyValueLine kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (kv.key.empty()) throw Error(errc::kConfig, "line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(kv.key).second) {
      throw Error(errc::kConfig, "line " + std::to_string(line_no) + ": key '" + kv.key + "' repeated");
    }
    out.push_back(std::move(kv));
  }
  return out;
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig cfg;
  for (const KeyValueLine& kv : parse_key_value_lines(text)) {
    try {
      if (!apply_model_key(cfg, kv.key, kv.value)) {
        throw Error(errc::kConfig, "unknown key '" + kv.key + "'");
      }
    } catch (const Error& e) {
      throw Error(errc::kConfig, "line " + std::to_string(kv.line) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace acf
