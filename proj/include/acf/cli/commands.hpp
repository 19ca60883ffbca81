#ifndef ACF_CLI_COMMANDS_HPP_
#define ACF_CLI_COMMANDS_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace acf {

/**
 * Entry point of the `acfstereo` tool. `args` excludes the program name.
 * Returns the process exit code: 0 on success, 1 for a runtime error and
 * 2 for a usage error. Errors are printed to `err` as one line
 * `ERROR <code>: <message>`.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace acf

#endif  // ACF_CLI_COMMANDS_HPP_
