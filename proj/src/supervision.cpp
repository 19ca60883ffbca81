#include "acf/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "acf/log.hpp"

namespace acf {
namespace {

constexpr double kFocalClamp = 1e-6;
constexpr double kConfidenceClamp = 1e-12;

void require_mask(const Mask& mask, std::size_t height, std::size_t width, const char* what) {
  if (mask.height() != height || mask.width() != width) {
    throw Error(errc::kShape, std::string(what) + ": mask is " + std::to_string(mask.height()) + "x" +
                                  std::to_string(mask.width()) + ", expected " + std::to_string(height) + "x" +
                                  std::to_string(width));
  }
}

}  // namespace

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

// At |x| = 1 both branches have slope +-1.
double smooth_l1_derivative(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

template <typename Real>
VarianceMap<Real> confidence_to_variance(const ConfidenceMap<Real>& confidence, double s, double eps) {
  if (!(eps > 0.0)) throw Error(errc::kDomain, "confidence_to_variance: eps must be > 0 (got " + std::to_string(eps) + ")");
  if (!(s >= 0.0)) throw Error(errc::kDomain, "confidence_to_variance: s must be >= 0 (got " + std::to_string(s) + ")");
  require_rank(confidence.f, 2, "confidence map");
  VarianceMap<Real> out{Tensor<Real>(confidence.f.shape())};
  for (std::size_t i = 0; i < confidence.f.size(); ++i) {
    out.sigma[i] = static_cast<Real>(s * (1.0 - static_cast<double>(confidence.f[i])) + eps);
  }
  return out;
}

template <typename Real>
Tensor<Real> confidence_to_variance_backward(const Tensor<Real>& grad_sigma, double s) {
  Tensor<Real> out(grad_sigma.shape());
  for (std::size_t i = 0; i < grad_sigma.size(); ++i) out[i] = static_cast<Real>(-s) * grad_sigma[i];
  return out;
}

template <typename Real>
UnimodalTargetVolume<Real> unimodal_target(const DisparityMap<Real>& dgt, const VarianceMap<Real>& sigma,
                                           std::size_t max_disp, const Mask& valid, double sigma_floor) {
  require_rank(dgt.disparity, 2, "ground-truth disparity");
  require_shape(sigma.sigma, dgt.disparity.shape(), "variance map");
  const std::size_t H = dgt.disparity.dim(0), W = dgt.disparity.dim(1), D = max_disp;
  require_mask(valid, H, W, "unimodal_target");
  if (D < 2) throw Error(errc::kDomain, "unimodal_target: D must be at least 2");
  if (!(sigma_floor > 0.0)) throw Error(errc::kDomain, "unimodal_target: sigma floor must be positive");

  UnimodalTargetVolume<Real> out{Tensor<Real>(Shape{H, W, D}), valid};
  std::vector<double> z(D);
  for (std::size_t p = 0; p < H * W; ++p) {
    if (!valid[p]) continue;
    const double g = dgt.disparity[p];
    const double s = sigma.sigma[p];
    if (!(g >= 0.0 && g <= static_cast<double>(D - 1))) {
      std::ostringstream os;
      os << "unimodal_target: valid pixel " << p << " has dgt " << g << " outside [0, " << D - 1 << "]";
      throw Error(errc::kDomain, os.str());
    }
    if (!(s >= sigma_floor)) {
      std::ostringstream os;
      os << "unimodal_target: sigma " << s << " at pixel " << p << " is below the floor " << sigma_floor;
      throw Error(errc::kDomain, os.str());
    }
    // The largest logit is at the bin nearest dgt; exp(z - zmax) <= 1.
    double zmax = -HUGE_VAL;
    for (std::size_t d = 0; d < D; ++d) {
      z[d] = -std::abs(static_cast<double>(d) - g) / s;
      zmax = std::max(zmax, z[d]);
    }
    double sum = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      z[d] = std::exp(z[d] - zmax);
      sum += z[d];
    }
    Real* t = out.target.data() + p * D;
    for (std::size_t d = 0; d < D; ++d) t[d] = static_cast<Real>(z[d] / sum);
  }
  return out;
}

template <typename Real>
Tensor<Real> unimodal_target_backward(const UnimodalTargetVolume<Real>& target, const DisparityMap<Real>& dgt,
                                      const VarianceMap<Real>& sigma, const Tensor<Real>& grad_target) {
  require_shape(grad_target, target.target.shape(), "target gradient");
  const std::size_t H = target.target.dim(0), W = target.target.dim(1), D = target.target.dim(2);
  Tensor<Real> out(Shape{H, W});
  for (std::size_t p = 0; p < H * W; ++p) {
    if (!target.valid[p]) continue;
    const Real* P = target.target.data() + p * D;
    const Real* G = grad_target.data() + p * D;
    double dot = 0.0;
    for (std::size_t d = 0; d < D; ++d) dot += static_cast<double>(G[d]) * P[d];
    const double g = dgt.disparity[p];
    const double s = sigma.sigma[p];
    double acc = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      acc += P[d] * (G[d] - dot) * std::abs(static_cast<double>(d) - g);
    }
    out[p] = static_cast<Real>(acc / (s * s));
  }
  return out;
}

template <typename Real>
FocalLossResult<Real> stereo_focal_loss(const UnimodalTargetVolume<Real>& target, const CostVolume<Real>& costs,
                                        double alpha, bool need_target_grad) {
  if (!(alpha >= 0.0)) throw Error(errc::kDomain, "stereo_focal_loss: alpha must be >= 0");
  require_shape(costs.costs, target.target.shape(), "stereo_focal_loss costs");
  const std::size_t H = costs.costs.dim(0), W = costs.costs.dim(1), D = costs.costs.dim(2);
  require_mask(target.valid, H, W, "stereo_focal_loss");

  FocalLossResult<Real> result;
  const std::size_t n = target.valid.count();
  Tensor<Real> grad_log(costs.costs.shape());
  if (need_target_grad) result.grad_target = Tensor<Real>(costs.costs.shape());
  if (n == 0) {
    log_warning("stereo_focal_loss: no valid pixels; loss is 0");
    result.grad_costs = Tensor<Real>(costs.costs.shape());
    return result;
  }

  const Tensor<Real> log_q = log_probability(costs);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t p = 0; p < H * W; ++p) {
    if (!target.valid[p]) continue;
    const Real* P = target.target.data() + p * D;
    const Real* lq = log_q.data() + p * D;
    Real* gl = grad_log.data() + p * D;
    for (std::size_t d = 0; d < D; ++d) {
      const double prob = P[d];
      const double one_minus = 1.0 - prob;
      const double base = std::max(one_minus, kFocalClamp);
      const double weight = std::pow(base, -alpha);
      const double ce = -prob * lq[d];
      loss += weight * ce;
      gl[d] = static_cast<Real>(-weight * prob * inv_n);
      if (need_target_grad) {
        const double dweight = one_minus > kFocalClamp ? alpha * std::pow(base, -alpha - 1.0) : 0.0;
        result.grad_target.data()[p * D + d] =
            static_cast<Real>((dweight * ce - weight * static_cast<double>(lq[d])) * inv_n);
      }
    }
  }
  result.loss = loss * inv_n;
  const ProbabilityVolume<Real> pv = cost_to_probability(costs);
  result.grad_costs = log_probability_backward(pv, grad_log);
  return result;
}

template <typename Real>
RegressionLossResult<Real> smooth_l1_regression_loss(const DisparityMap<Real>& dhat, const DisparityMap<Real>& dgt,
                                                     const Mask& valid) {
  require_rank(dhat.disparity, 2, "predicted disparity");
  require_shape(dgt.disparity, dhat.disparity.shape(), "ground-truth disparity");
  require_mask(valid, dhat.disparity.dim(0), dhat.disparity.dim(1), "smooth_l1_regression_loss");
  RegressionLossResult<Real> result{0.0, Tensor<Real>(dhat.disparity.shape())};
  const std::size_t n = valid.count();
  if (n == 0) {
    log_warning("smooth_l1_regression_loss: no valid pixels; loss is 0");
    return result;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t p = 0; p < valid.size(); ++p) {
    if (!valid[p]) continue;
    const double err = static_cast<double>(dgt.disparity[p]) - dhat.disparity[p];
    loss += smooth_l1(err);
    result.grad_disparity[p] = static_cast<Real>(-smooth_l1_derivative(err) * inv_n);
  }
  result.loss = loss * inv_n;
  return result;
}

template <typename Real>
ConfidenceLossResult<Real> confidence_loss(const ConfidenceMap<Real>& confidence, const Mask& valid) {
  require_rank(confidence.f, 2, "confidence map");
  require_mask(valid, confidence.f.dim(0), confidence.f.dim(1), "confidence_loss");
  ConfidenceLossResult<Real> result{0.0, Tensor<Real>(confidence.f.shape())};
  const std::size_t n = valid.count();
  if (n == 0) return result;
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t p = 0; p < valid.size(); ++p) {
    if (!valid[p]) continue;
    const double f = confidence.f[p];
    if (f > kConfidenceClamp) {
      loss -= std::log(f);
      result.grad_confidence[p] = static_cast<Real>(-inv_n / f);
    } else {
      loss -= std::log(kConfidenceClamp);
    }
  }
  result.loss = loss * inv_n;
  return result;
}

LossBreakdown total_loss(double stereo_focal, double regression, double confidence, const LossWeights& weights) {
  if (!(weights.lambda_regression >= 0.0) || !(weights.lambda_confidence >= 0.0)) {
    throw Error(errc::kDomain, "total_loss: loss weights must be non-negative");
  }
  LossBreakdown out;
  out.stereo_focal = stereo_focal;
  out.regression = regression;
  out.confidence = confidence;
  out.total = stereo_focal + weights.lambda_regression * regression + weights.lambda_confidence * confidence;
  return out;
}

#define ACF_INSTANTIATE_SUPERVISION(Real)                                                                        \
  template VarianceMap<Real> confidence_to_variance(const ConfidenceMap<Real>&, double, double);                \
  template Tensor<Real> confidence_to_variance_backward(const Tensor<Real>&, double);                            \
  template UnimodalTargetVolume<Real> unimodal_target(const DisparityMap<Real>&, const VarianceMap<Real>&,       \
                                                      std::size_t, const Mask&, double);                         \
  template Tensor<Real> unimodal_target_backward(const UnimodalTargetVolume<Real>&, const DisparityMap<Real>&,   \
                                                 const VarianceMap<Real>&, const Tensor<Real>&);                 \
  template FocalLossResult<Real> stereo_focal_loss(const UnimodalTargetVolume<Real>&, const CostVolume<Real>&,   \
                                                   double, bool);                                                \
  template RegressionLossResult<Real> smooth_l1_regression_loss(const DisparityMap<Real>&,                       \
                                                                const DisparityMap<Real>&, const Mask&);         \
  template ConfidenceLossResult<Real> confidence_loss(const ConfidenceMap<Real>&, const Mask&);

ACF_INSTANTIATE_SUPERVISION(float)
ACF_INSTANTIATE_SUPERVISION(double)

}  // namespace acf
