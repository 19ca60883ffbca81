#ifndef ACF_TESTS_SUPPORT_HPP_
#define ACF_TESTS_SUPPORT_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "acf/mask.hpp"
#include "acf/numerics/rng.hpp"
#include "acf/numerics/tensor.hpp"

namespace acf::test {

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline Mask random_mask(std::size_t h, std::size_t w, Rng& rng, double keep = 0.7) {
  Mask m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < keep);
  if (m.count() == 0) m.set(0, true);
  return m;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / ("acf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
  return file_bytes(a) == file_bytes(b);
}

}  // namespace acf::test

#endif  // ACF_TESTS_SUPPORT_HPP_
