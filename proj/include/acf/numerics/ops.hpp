#ifndef ACF_NUMERICS_OPS_HPP_
#define ACF_NUMERICS_OPS_HPP_

#include <cstddef>
#include <vector>

#include "acf/numerics/tensor.hpp"

namespace acf {

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/**
 * Same-size 2D cross-correlation with zero padding.
 *
 * `input` is H x W x Cin, or H x W x Cin x B where the innermost B axis holds
 * independent images sharing the kernel (used to run one 2D filter over every
 * disparity slice of a cost volume; an H x W x D volume is H x W x 1 x D). `kernel` is k x k x Cin x Cout with k odd, `bias`
 * is Cout, and `padding` must equal (k - 1) / 2.
 */
template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                    std::size_t padding);

template <typename Real>
struct Conv2dGrads {
  Tensor<Real> input;
  Tensor<Real> kernel;
  Tensor<Real> bias;
};

// Gradients of conv2d given dL/d(output). Set `need_input` to false to skip
// the input gradient (first layer of a network).
template <typename Real>
Conv2dGrads<Real> conv2d_backward(const Tensor<Real>& input, const Tensor<Real>& kernel,
                                  const Tensor<Real>& grad_output, std::size_t padding,
                                  bool need_input = true);

// ---------------------------------------------------------------------------
// Batch normalization over the spatial extent, per channel.
// ---------------------------------------------------------------------------

enum class NormMode { kTrain, kEval };

template <typename Real>
struct BatchNormStats {
  std::vector<Real> running_mean;
  std::vector<Real> running_var;

  BatchNormStats() = default;
  explicit BatchNormStats(std::size_t channels)
      : running_mean(channels, Real(0)), running_var(channels, Real(1)) {}
};

template <typename Real>
struct BatchNormCache {
  Tensor<Real> normalized;   // x_hat, H x W x C
  std::vector<Real> inv_std; // per channel
  NormMode mode = NormMode::kTrain;
};

/**
 * y = gamma * (x - mean) / sqrt(var + eps_bn) + beta, per channel of an
 * H x W x C input.
 *
 * Train mode uses the biased statistics of this input and updates `stats`
 * with `momentum` (running variance uses the unbiased estimate). Eval mode
 * reads `stats`. `cache` may be null when no backward pass follows.
 */
template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& input, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        NormMode mode, BatchNormStats<Real>& stats, Real momentum, Real eps_bn,
                        BatchNormCache<Real>* cache);

template <typename Real>
struct BatchNormGrads {
  Tensor<Real> input;
  Tensor<Real> gamma;
  Tensor<Real> beta;
};

template <typename Real>
BatchNormGrads<Real> batch_norm_backward(const BatchNormCache<Real>& cache, const Tensor<Real>& gamma,
                                         const Tensor<Real>& grad_output);

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x);

// Uses the forward input; the derivative at exactly 0 is taken as 0.
template <typename Real>
Tensor<Real> relu_backward(const Tensor<Real>& input, const Tensor<Real>& grad_output);

template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& x);

// Uses the forward output s: ds/dx = s (1 - s).
template <typename Real>
Tensor<Real> sigmoid_backward(const Tensor<Real>& output, const Tensor<Real>& grad_output);

}  // namespace acf

#endif  // ACF_NUMERICS_OPS_HPP_
