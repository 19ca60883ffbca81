#ifndef ACF_ERROR_HPP_
#define ACF_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace acf {

// Machine-readable error codes. The CLI prints them as `ERROR <code>: ...`.
namespace errc {
inline constexpr const char* kShape = "shape";
inline constexpr const char* kDomain = "domain";
inline constexpr const char* kIo = "io";
inline constexpr const char* kFormat = "format";
inline constexpr const char* kConfig = "config";
inline constexpr const char* kTraining = "training";
inline constexpr const char* kUsage = "usage";
}  // namespace errc

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace acf

#endif  // ACF_ERROR_HPP_
