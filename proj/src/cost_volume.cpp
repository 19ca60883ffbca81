#include "acf/cost_volume.hpp"

#include <algorithm>
#include <cmath>

namespace acf {

std::string to_string(CostMode mode) {
  return mode == CostMode::kAbsoluteDifference ? "absolute_difference" : "concat_aggregate";
}

CostMode parse_cost_mode(const std::string& text) {
  if (text == "absolute_difference") return CostMode::kAbsoluteDifference;
  if (text == "concat_aggregate") return CostMode::kConcatAggregate;
  throw Error(errc::kConfig, "unknown cost mode '" + text + "' (absolute_difference|concat_aggregate)");
}

namespace {

template <typename Real>
void check_features(const Tensor<Real>& left, const Tensor<Real>& right, std::size_t max_disp) {
  require_rank(left, 3, "left features");
  require_shape(right, left.shape(), "right features");
  if (max_disp < 2) throw Error(errc::kDomain, "max disparity D must be at least 2");
  if (max_disp > left.dim(1)) {
    throw Error(errc::kDomain, "max disparity D = " + std::to_string(max_disp) + " exceeds image width W = " +
                                   std::to_string(left.dim(1)));
  }
}

template <typename Real>
void check_volume(const Tensor<Real>& t, const std::string& what) {
  require_rank(t, 3, what);
  if (t.dim(2) < 2) throw Error(errc::kDomain, what + ": disparity axis must hold at least 2 slices");
}

}  // namespace

template <typename Real>
void fill_out_of_frame(Tensor<Real>& costs) {
  check_volume(costs, "cost volume");
  const std::size_t H = costs.dim(0), W = costs.dim(1), D = costs.dim(2);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x + 1 < D && x < W; ++x) {
      Real* c = &costs.at(y, x, 0);
      const Real top = *std::max_element(c, c + x + 1);
      std::fill(c + x + 1, c + D, top);
    }
  }
}

template <typename Real>
Tensor<Real> fill_out_of_frame_backward(const Tensor<Real>& filled, const Tensor<Real>& grad) {
  check_volume(filled, "cost volume");
  require_shape(grad, filled.shape(), "cost volume gradient");
  Tensor<Real> out = grad;
  const std::size_t H = filled.dim(0), W = filled.dim(1), D = filled.dim(2);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x + 1 < D && x < W; ++x) {
      const Real* c = &filled.at(y, x, 0);
      const std::size_t arg = static_cast<std::size_t>(std::max_element(c, c + x + 1) - c);
      Real* g = &out.at(y, x, 0);
      Real folded = 0;
      for (std::size_t d = x + 1; d < D; ++d) {
        folded += g[d];
        g[d] = 0;
      }
      g[arg] += folded;
    }
  }
  return out;
}

template <typename Real>
CostVolume<Real> build_cost_volume(const Tensor<Real>& left_feat, const Tensor<Real>& right_feat,
                                   std::size_t max_disp) {
  check_features(left_feat, right_feat, max_disp);
  const std::size_t H = left_feat.dim(0), W = left_feat.dim(1), C = left_feat.dim(2);
  CostVolume<Real> cv{Tensor<Real>(Shape{H, W, max_disp}), max_disp};
  const Real channels = static_cast<Real>(C);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const Real* l = &left_feat.at(y, x, 0);
      Real* out = &cv.costs.at(y, x, 0);
      const std::size_t in_frame = std::min(max_disp, x + 1);
      for (std::size_t d = 0; d < in_frame; ++d) {
        const Real* r = &right_feat.at(y, x - d, 0);
        Real sum = 0;
        for (std::size_t c = 0; c < C; ++c) sum += std::abs(l[c] - r[c]);
        out[d] = sum / channels;
      }
    }
  }
  fill_out_of_frame(cv.costs);
  return cv;
}

template <typename Real>
FeatureGrads<Real> build_cost_volume_backward(const Tensor<Real>& left_feat, const Tensor<Real>& right_feat,
                                              const CostVolume<Real>& cv, const Tensor<Real>& grad_costs) {
  check_features(left_feat, right_feat, cv.max_disp);
  const std::size_t H = left_feat.dim(0), W = left_feat.dim(1), C = left_feat.dim(2), D = cv.max_disp;
  require_shape(cv.costs, Shape{H, W, D}, "cost volume");
  const Tensor<Real> grad = fill_out_of_frame_backward(cv.costs, grad_costs);

  FeatureGrads<Real> out{Tensor<Real>(left_feat.shape()), Tensor<Real>(right_feat.shape())};
  const Real inv_c = Real(1) / static_cast<Real>(C);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const Real* l = &left_feat.at(y, x, 0);
      Real* gl = &out.left.at(y, x, 0);
      const std::size_t in_frame = std::min(D, x + 1);
      for (std::size_t d = 0; d < in_frame; ++d) {
        const Real g = grad.at(y, x, d) * inv_c;
        if (g == Real(0)) continue;
        const Real* r = &right_feat.at(y, x - d, 0);
        Real* gr = &out.right.at(y, x - d, 0);
        for (std::size_t c = 0; c < C; ++c) {
          const Real diff = l[c] - r[c];
          const Real s = diff > Real(0) ? g : (diff < Real(0) ? -g : Real(0));
          gl[c] += s;
          gr[c] -= s;
        }
      }
    }
  }
  return out;
}

template <typename Real>
Tensor<Real> build_concat_volume(const Tensor<Real>& left_feat, const Tensor<Real>& right_feat,
                                 std::size_t max_disp) {
  check_features(left_feat, right_feat, max_disp);
  const std::size_t H = left_feat.dim(0), W = left_feat.dim(1), C = left_feat.dim(2);
  const std::size_t D = max_disp;
  Tensor<Real> vol(Shape{H, W, 2 * C, D});
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        Real* vl = &vol.at(y, x, c, 0);
        Real* vr = &vol.at(y, x, C + c, 0);
        const Real l = left_feat.at(y, x, c);
        for (std::size_t d = 0; d < D; ++d) {
          vl[d] = l;
          if (d <= x) vr[d] = right_feat.at(y, x - d, c);
        }
      }
    }
  }
  return vol;
}

template <typename Real>
FeatureGrads<Real> build_concat_volume_backward(const Tensor<Real>& grad_volume, std::size_t channels) {
  require_rank(grad_volume, 4, "concat volume gradient");
  const std::size_t H = grad_volume.dim(0), W = grad_volume.dim(1), D = grad_volume.dim(3), C = channels;
  if (grad_volume.dim(2) != 2 * C) {
    throw Error(errc::kShape, "concat volume gradient: dim 2 = " + std::to_string(grad_volume.dim(2)) +
                                  ", expected 2C = " + std::to_string(2 * C));
  }
  FeatureGrads<Real> out{Tensor<Real>(Shape{H, W, C}), Tensor<Real>(Shape{H, W, C})};
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        const Real* gl = &grad_volume.at(y, x, c, 0);
        const Real* gr = &grad_volume.at(y, x, C + c, 0);
        Real sum = 0;
        for (std::size_t d = 0; d < D; ++d) sum += gl[d];
        out.left.at(y, x, c) += sum;
        for (std::size_t d = 0; d <= x && d < D; ++d) out.right.at(y, x - d, c) += gr[d];
      }
    }
  }
  return out;
}

template <typename Real>
ProbabilityVolume<Real> cost_to_probability(const CostVolume<Real>& cv) {
  check_volume(cv.costs, "cost volume");
  const std::size_t D = cv.costs.dim(2);
  const std::size_t pixels = cv.costs.size() / D;
  ProbabilityVolume<Real> pv{Tensor<Real>(cv.costs.shape())};
  for (std::size_t p = 0; p < pixels; ++p) {
    const Real* c = cv.costs.data() + p * D;
    Real* out = pv.probs.data() + p * D;
    const Real lowest = *std::min_element(c, c + D);
    Real sum = 0;
    for (std::size_t d = 0; d < D; ++d) {
      out[d] = std::exp(lowest - c[d]);
      sum += out[d];
    }
    const Real inv = Real(1) / sum;
    for (std::size_t d = 0; d < D; ++d) out[d] *= inv;
  }
  return pv;
}

template <typename Real>
Tensor<Real> cost_to_probability_backward(const ProbabilityVolume<Real>& pv, const Tensor<Real>& grad_probs) {
  require_shape(grad_probs, pv.probs.shape(), "probability gradient");
  const std::size_t D = pv.probs.dim(2);
  const std::size_t pixels = pv.probs.size() / D;
  Tensor<Real> out(pv.probs.shape());
  for (std::size_t p = 0; p < pixels; ++p) {
    const Real* P = pv.probs.data() + p * D;
    const Real* g = grad_probs.data() + p * D;
    Real dot = 0;
    for (std::size_t d = 0; d < D; ++d) dot += g[d] * P[d];
    Real* o = out.data() + p * D;
    for (std::size_t d = 0; d < D; ++d) o[d] = -P[d] * (g[d] - dot);
  }
  return out;
}

template <typename Real>
Tensor<Real> log_probability(const CostVolume<Real>& cv) {
  check_volume(cv.costs, "cost volume");
  const std::size_t D = cv.costs.dim(2);
  const std::size_t pixels = cv.costs.size() / D;
  Tensor<Real> out(cv.costs.shape());
  for (std::size_t p = 0; p < pixels; ++p) {
    const Real* c = cv.costs.data() + p * D;
    const Real lowest = *std::min_element(c, c + D);
    Real sum = 0;
    for (std::size_t d = 0; d < D; ++d) sum += std::exp(lowest - c[d]);
    const Real log_norm = std::log(sum);
    Real* o = out.data() + p * D;
    for (std::size_t d = 0; d < D; ++d) o[d] = (lowest - c[d]) - log_norm;
  }
  return out;
}

template <typename Real>
Tensor<Real> log_probability_backward(const ProbabilityVolume<Real>& pv, const Tensor<Real>& grad_log_probs) {
  require_shape(grad_log_probs, pv.probs.shape(), "log-probability gradient");
  const std::size_t D = pv.probs.dim(2);
  const std::size_t pixels = pv.probs.size() / D;
  Tensor<Real> out(pv.probs.shape());
  for (std::size_t p = 0; p < pixels; ++p) {
    const Real* P = pv.probs.data() + p * D;
    const Real* g = grad_log_probs.data() + p * D;
    Real total = 0;
    for (std::size_t d = 0; d < D; ++d) total += g[d];
    Real* o = out.data() + p * D;
    for (std::size_t d = 0; d < D; ++d) o[d] = -(g[d] - P[d] * total);
  }
  return out;
}

template <typename Real>
DisparityMap<Real> soft_argmin(const ProbabilityVolume<Real>& pv) {
  check_volume(pv.probs, "probability volume");
  const std::size_t H = pv.probs.dim(0), W = pv.probs.dim(1), D = pv.probs.dim(2);
  DisparityMap<Real> out{Tensor<Real>(Shape{H, W})};
  for (std::size_t p = 0; p < H * W; ++p) {
    const Real* P = pv.probs.data() + p * D;
    Real sum = 0;
    for (std::size_t d = 1; d < D; ++d) sum += static_cast<Real>(d) * P[d];
    out.disparity[p] = std::clamp(sum, Real(0), static_cast<Real>(D - 1));
  }
  return out;
}

template <typename Real>
Tensor<Real> soft_argmin_backward(const Tensor<Real>& grad_disparity, std::size_t max_disp) {
  require_rank(grad_disparity, 2, "disparity gradient");
  const std::size_t H = grad_disparity.dim(0), W = grad_disparity.dim(1);
  Tensor<Real> out(Shape{H, W, max_disp});
  for (std::size_t p = 0; p < H * W; ++p) {
    Real* o = out.data() + p * max_disp;
    for (std::size_t d = 0; d < max_disp; ++d) o[d] = static_cast<Real>(d) * grad_disparity[p];
  }
  return out;
}

#define ACF_INSTANTIATE_COST_VOLUME(Real)                                                                    \
  template void fill_out_of_frame(Tensor<Real>&);                                                            \
  template Tensor<Real> fill_out_of_frame_backward(const Tensor<Real>&, const Tensor<Real>&);                \
  template CostVolume<Real> build_cost_volume(const Tensor<Real>&, const Tensor<Real>&, std::size_t);        \
  template FeatureGrads<Real> build_cost_volume_backward(const Tensor<Real>&, const Tensor<Real>&,           \
                                                         const CostVolume<Real>&, const Tensor<Real>&);      \
  template Tensor<Real> build_concat_volume(const Tensor<Real>&, const Tensor<Real>&, std::size_t);          \
  template FeatureGrads<Real> build_concat_volume_backward(const Tensor<Real>&, std::size_t);                \
  template ProbabilityVolume<Real> cost_to_probability(const CostVolume<Real>&);                             \
  template Tensor<Real> cost_to_probability_backward(const ProbabilityVolume<Real>&, const Tensor<Real>&);   \
  template Tensor<Real> log_probability(const CostVolume<Real>&);                                            \
  template Tensor<Real> log_probability_backward(const ProbabilityVolume<Real>&, const Tensor<Real>&);       \
  template DisparityMap<Real> soft_argmin(const ProbabilityVolume<Real>&);                                   \
  template Tensor<Real> soft_argmin_backward(const Tensor<Real>&, std::size_t);

ACF_INSTANTIATE_COST_VOLUME(float)
ACF_INSTANTIATE_COST_VOLUME(double)

}  // namespace acf
