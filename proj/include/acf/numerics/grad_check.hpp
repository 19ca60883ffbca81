#ifndef ACF_NUMERICS_GRAD_CHECK_HPP_
#define ACF_NUMERICS_GRAD_CHECK_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include "acf/numerics/tensor.hpp"

namespace acf {

// Scalar function of a tensor. When `grad` is non-null the function writes its
// analytic gradient there (same shape as x).
using ScalarFunction = std::function<double(const Tensor<double>& x, Tensor<double>* grad)>;

struct GradCheckOptions {
  double h = 1e-5;
  // Coordinates known to sit on a non-differentiable point; skipped and flagged.
  std::function<bool(std::size_t)> is_kink;
  // A coordinate whose central differences at h and h/2 disagree by more than
  // this (relative) lies within h of a kink and is skipped and flagged.
  // Zero disables detection.
  double kink_tolerance = 1e-7;
  // Subset of coordinates to check; empty means all.
  std::vector<std::size_t> coordinates;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::vector<std::size_t> skipped;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
GradCheckResult grad_check(const ScalarFunction& f, const Tensor<double>& x, const GradCheckOptions& options = {});

}  // namespace acf

#endif  // ACF_NUMERICS_GRAD_CHECK_HPP_
