#ifndef ACF_NUMERICS_OPTIMIZER_HPP_
#define ACF_NUMERICS_OPTIMIZER_HPP_

#include <cstdint>

#include "acf/numerics/tensor.hpp"

namespace acf {

struct RmsPropSettings {
  double lr = 1e-3;
  double decay = 0.9;
  double eps_opt = 1e-8;
};

template <typename Real>
struct OptimizerState {
  Tensor<Real> accumulator;  // running mean of squared gradients
  std::uint64_t steps = 0;

  OptimizerState() = default;
  explicit OptimizerState(const Shape& shape) : accumulator(shape) {}
};

// accumulator <- decay * accumulator + (1 - decay) * grad^2
// param       <- param - lr * grad / (sqrt(accumulator) + eps_opt)
//
// Throws (leaving param and state untouched) on a non-finite gradient or
// out-of-range settings.
template <typename Real>
void rmsprop_step(Tensor<Real>& param, const Tensor<Real>& grad, OptimizerState<Real>& state,
                  const RmsPropSettings& settings);

// Same, reading the gradient from the parameter's own buffer.
template <typename Real>
void rmsprop_step(Tensor<Real>& param, OptimizerState<Real>& state, const RmsPropSettings& settings);

}  // namespace acf

#endif  // ACF_NUMERICS_OPTIMIZER_HPP_
