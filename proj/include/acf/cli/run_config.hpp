#ifndef ACF_CLI_RUN_CONFIG_HPP_
#define ACF_CLI_RUN_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "acf/model/config.hpp"

namespace acf {

/**
 * Text configuration for a run: every model key plus the evaluation keys
 * below. One `key=value` per line, `#` comments, unknown keys rejected.
 */
struct RunConfig {
  ModelConfig model;
  double lr_check_threshold = 1.0;  // px, left-right consistency for OCC/NOC
  std::uint64_t sparsify_seed = 1;  // shuffle seed of the random sparsification curve

  void validate() const;
};

RunConfig parse_run_config(const std::string& text);

// All keys with their resolved values, model keys first.
std::string to_run_config_text(const RunConfig& cfg);

struct KeyDoc {
  std::string key;
  std::string default_value;
  std::string meaning;
};

// Every accepted key with its default and a one-line description.
std::vector<KeyDoc> run_config_documentation();

}  // namespace acf

#endif  // ACF_CLI_RUN_CONFIG_HPP_
