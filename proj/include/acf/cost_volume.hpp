#ifndef ACF_COST_VOLUME_HPP_
#define ACF_COST_VOLUME_HPP_

#include <cstddef>
#include <string>

#include "acf/numerics/tensor.hpp"

namespace acf {

enum class CostMode { kAbsoluteDifference, kConcatAggregate };

std::string to_string(CostMode mode);
CostMode parse_cost_mode(const std::string& text);

// H x W x D matching costs; slice d compares left (x, y) with right (x - d, y).
template <typename Real>
struct CostVolume {
  Tensor<Real> costs;
  std::size_t max_disp = 0;

  std::size_t height() const { return costs.dim(0); }
  std::size_t width() const { return costs.dim(1); }
};

// Per-pixel softmax of -cost over the disparity axis.
template <typename Real>
struct ProbabilityVolume {
  Tensor<Real> probs;

  std::size_t max_disp() const { return probs.dim(2); }
};

// H x W disparities in pixels.
template <typename Real>
struct DisparityMap {
  Tensor<Real> disparity;
};

/**
 * Absolute-difference cost volume: cost(y, x, d) is the channel mean of
 * |left(y, x) - right(y, x - d)|. Slices with x - d < 0 have no
 * correspondence and take the largest in-frame cost of their pixel, so they
 * never win the softmax while gradients stay finite.
 *
 * Throws on mismatched feature shapes, D < 2 or D > W.
 */
template <typename Real>
CostVolume<Real> build_cost_volume(const Tensor<Real>& left_feat, const Tensor<Real>& right_feat,
                                   std::size_t max_disp);

template <typename Real>
struct FeatureGrads {
  Tensor<Real> left;
  Tensor<Real> right;
};

// Gradient of build_cost_volume, routing out-of-frame slices through the fill.
template <typename Real>
FeatureGrads<Real> build_cost_volume_backward(const Tensor<Real>& left_feat, const Tensor<Real>& right_feat,
                                              const CostVolume<Real>& cv, const Tensor<Real>& grad_costs);

// H x W x 2C x D volume of [left(y, x), right(y, x - d)] with zeros out of frame.
template <typename Real>
Tensor<Real> build_concat_volume(const Tensor<Real>& left_feat, const Tensor<Real>& right_feat,
                                 std::size_t max_disp);

template <typename Real>
FeatureGrads<Real> build_concat_volume_backward(const Tensor<Real>& grad_volume, std::size_t channels);

// Replaces every out-of-frame slice (d > x) with the pixel's largest in-frame cost.
template <typename Real>
void fill_out_of_frame(Tensor<Real>& costs);

// Folds out-of-frame gradients onto the in-frame slice that supplied the fill
// value (first maximum). `filled` is the forward output of fill_out_of_frame.
template <typename Real>
Tensor<Real> fill_out_of_frame_backward(const Tensor<Real>& filled, const Tensor<Real>& grad);

// Stabilized softmax over -cost (costs shifted by the per-pixel minimum).
template <typename Real>
ProbabilityVolume<Real> cost_to_probability(const CostVolume<Real>& cv);

// dL/dcost from dL/dprob.
template <typename Real>
Tensor<Real> cost_to_probability_backward(const ProbabilityVolume<Real>& pv, const Tensor<Real>& grad_probs);

// log softmax(-cost) via shifted log-sum-exp; never takes the log of a probability.
template <typename Real>
Tensor<Real> log_probability(const CostVolume<Real>& cv);

// dL/dcost from dL/dlogprob; `pv` is the matching probability volume.
template <typename Real>
Tensor<Real> log_probability_backward(const ProbabilityVolume<Real>& pv, const Tensor<Real>& grad_log_probs);

// d_hat = sum_d d * P(d) per pixel.
template <typename Real>
DisparityMap<Real> soft_argmin(const ProbabilityVolume<Real>& pv);

// dL/dprob from dL/d(d_hat): grad(y, x, d) = d * g(y, x).
template <typename Real>
Tensor<Real> soft_argmin_backward(const Tensor<Real>& grad_disparity, std::size_t max_disp);

}  // namespace acf

#endif  // ACF_COST_VOLUME_HPP_
