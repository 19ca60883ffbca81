#include "acf/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace acf {

GradCheckResult grad_check(const ScalarFunction& f, const Tensor<double>& x, const GradCheckOptions& options) {
  Tensor<double> analytic(x.shape());
  f(x, &analytic);

  std::vector<std::size_t> coords = options.coordinates;
  if (coords.empty()) {
    coords.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) coords[i] = i;
  }

  Tensor<double> probe = x;
  auto central = [&](std::size_t i, double h) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe, nullptr);
    probe[i] = saved - h;
    const double down = f(probe, nullptr);
    probe[i] = saved;
    return (up - down) / (2.0 * h);
  };

  GradCheckResult result;
  for (const std::size_t i : coords) {
    if (options.is_kink && options.is_kink(i)) {
      result.skipped.push_back(i);
      continue;
    }
    const double numeric = central(i, options.h);
    if (options.kink_tolerance > 0.0) {
      const double half = central(i, options.h / 2.0);
      if (std::abs(numeric - half) > options.kink_tolerance * std::max(1.0, std::abs(numeric))) {
        result.skipped.push_back(i);
        continue;
      }
    }
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    ++result.checked;
    if (err > result.max_rel_error || !std::isfinite(err)) {
      result.max_rel_error = std::isfinite(err) ? err : HUGE_VAL;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace acf
