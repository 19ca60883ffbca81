#ifndef ACF_SUPERVISION_HPP_
#define ACF_SUPERVISION_HPP_

#include <cstddef>

#include "acf/cost_volume.hpp"
#include "acf/mask.hpp"
#include "acf/numerics/tensor.hpp"

namespace acf {

// Per-pixel matching confidence f in [0, 1], H x W.
template <typename Real>
struct ConfidenceMap {
  Tensor<Real> f;
};

// Per-pixel target temperature sigma in [eps, s + eps], H x W.
template <typename Real>
struct VarianceMap {
  Tensor<Real> sigma;
};

// Ground-truth distribution over disparities, H x W x D. Pixels outside
// `valid` hold an all-zero slice and are ignored by every loss.
template <typename Real>
struct UnimodalTargetVolume {
  Tensor<Real> target;
  Mask valid;
};

struct LossBreakdown {
  double stereo_focal = 0.0;
  double regression = 0.0;
  double confidence = 0.0;
  double total = 0.0;
};

// sigma = s * (1 - f) + eps. Throws unless s >= 0 and eps > 0.
template <typename Real>
VarianceMap<Real> confidence_to_variance(const ConfidenceMap<Real>& confidence, double s, double eps);

// dL/df = -s * dL/dsigma.
template <typename Real>
Tensor<Real> confidence_to_variance_backward(const Tensor<Real>& grad_sigma, double s);

/**
 * Unimodal target P(d) = softmax_d(-|d - dgt| / sigma) for every valid pixel.
 *
 * Throws if a valid pixel has dgt outside [0, D-1] or a valid sigma below
 * `sigma_floor` (itself required to be positive).
 */
template <typename Real>
UnimodalTargetVolume<Real> unimodal_target(const DisparityMap<Real>& dgt, const VarianceMap<Real>& sigma,
                                           std::size_t max_disp, const Mask& valid, double sigma_floor);

// dL/dsigma (H x W) from dL/dP (H x W x D).
template <typename Real>
Tensor<Real> unimodal_target_backward(const UnimodalTargetVolume<Real>& target, const DisparityMap<Real>& dgt,
                                      const VarianceMap<Real>& sigma, const Tensor<Real>& grad_target);

template <typename Real>
struct FocalLossResult {
  double loss = 0.0;
  Tensor<Real> grad_costs;   // dL/dcost, H x W x D
  Tensor<Real> grad_target;  // dL/dP; empty unless requested
};

/**
 * Stereo focal loss: mean over valid pixels of
 *   sum_d (1 - P(d))^-alpha * (-P(d) * log P_hat(d)),
 * with P_hat = softmax(-cost) evaluated in log-sum-exp form and 1 - P clamped
 * below at 1e-6. alpha = 0 is plain cross entropy.
 */
template <typename Real>
FocalLossResult<Real> stereo_focal_loss(const UnimodalTargetVolume<Real>& target, const CostVolume<Real>& costs,
                                        double alpha, bool need_target_grad);

template <typename Real>
struct RegressionLossResult {
  double loss = 0.0;
  Tensor<Real> grad_disparity;  // dL/d(d_hat), H x W
};

// Mean smooth-L1(dgt - d_hat) over valid pixels; an empty valid set gives 0
// and a warning.
template <typename Real>
RegressionLossResult<Real> smooth_l1_regression_loss(const DisparityMap<Real>& dhat, const DisparityMap<Real>& dgt,
                                                     const Mask& valid);

template <typename Real>
struct ConfidenceLossResult {
  double loss = 0.0;
  Tensor<Real> grad_confidence;  // dL/df, H x W
};

// Mean -log f over valid pixels, f clamped below at 1e-12.
template <typename Real>
ConfidenceLossResult<Real> confidence_loss(const ConfidenceMap<Real>& confidence, const Mask& valid);

struct LossWeights {
  double lambda_regression = 1.0;
  double lambda_confidence = 8.0;
};

// total = stereo_focal + lambda_regression * regression + lambda_confidence * confidence.
LossBreakdown total_loss(double stereo_focal, double regression, double confidence, const LossWeights& weights);

// Scalar helpers shared with the loss kernels.
double smooth_l1(double x);
double smooth_l1_derivative(double x);

}  // namespace acf

#endif  // ACF_SUPERVISION_HPP_
