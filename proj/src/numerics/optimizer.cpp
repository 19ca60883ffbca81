#include "acf/numerics/optimizer.hpp"

#include <cmath>

namespace acf {
namespace {

template <typename Real>
void apply(Tensor<Real>& param, std::span<const Real> grad, OptimizerState<Real>& state,
           const RmsPropSettings& s) {
  if (!(s.lr >= 0.0) || !(s.decay >= 0.0 && s.decay < 1.0) || !(s.eps_opt > 0.0)) {
    throw Error(errc::kDomain, "rmsprop: require lr >= 0, 0 <= decay < 1, eps_opt > 0");
  }
  if (grad.size() != param.size()) {
    throw Error(errc::kShape, "rmsprop: gradient has " + std::to_string(grad.size()) +
                                  " values, parameter has " + std::to_string(param.size()));
  }
  if (state.accumulator.shape() != param.shape()) state.accumulator = Tensor<Real>(param.shape());
  for (const Real g : grad) {
    if (!std::isfinite(g)) throw Error(errc::kTraining, "rmsprop: non-finite gradient, step rejected");
  }
  const Real lr = static_cast<Real>(s.lr);
  const Real decay = static_cast<Real>(s.decay);
  const Real eps = static_cast<Real>(s.eps_opt);
  Real* acc = state.accumulator.data();
  Real* p = param.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    acc[i] = decay * acc[i] + (Real(1) - decay) * grad[i] * grad[i];
    p[i] -= lr * grad[i] / (std::sqrt(acc[i]) + eps);
  }
  ++state.steps;
}

}  // namespace

template <typename Real>
void rmsprop_step(Tensor<Real>& param, const Tensor<Real>& grad, OptimizerState<Real>& state,
                  const RmsPropSettings& settings) {
  apply(param, grad.values(), state, settings);
}

template <typename Real>
void rmsprop_step(Tensor<Real>& param, OptimizerState<Real>& state, const RmsPropSettings& settings) {
  const std::span<Real> grad = param.grad();
  apply(param, std::span<const Real>(grad.data(), grad.size()), state, settings);
}

template void rmsprop_step(Tensor<float>&, const Tensor<float>&, OptimizerState<float>&, const RmsPropSettings&);
template void rmsprop_step(Tensor<double>&, const Tensor<double>&, OptimizerState<double>&, const RmsPropSettings&);
template void rmsprop_step(Tensor<float>&, OptimizerState<float>&, const RmsPropSettings&);
template void rmsprop_step(Tensor<double>&, OptimizerState<double>&, const RmsPropSettings&);

}  // namespace acf
