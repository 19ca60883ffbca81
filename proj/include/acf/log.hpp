#ifndef ACF_LOG_HPP_
#define ACF_LOG_HPP_

#include <iostream>
#include <string_view>

namespace acf {

inline void log_warning(std::string_view message) { std::cerr << "WARN: " << message << '\n'; }

inline void log_info(std::string_view message) { std::cerr << message << '\n'; }

}  // namespace acf

#endif  // ACF_LOG_HPP_
