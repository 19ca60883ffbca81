#ifndef ACF_DATA_STEREO_SAMPLE_HPP_
#define ACF_DATA_STEREO_SAMPLE_HPP_

#include "acf/mask.hpp"
#include "acf/numerics/tensor.hpp"

namespace acf {

// A rectified grayscale stereo pair with exact ground truth.
struct StereoSample {
  Tensor<double> left;        // H x W x 1, values in [0, 1]
  Tensor<double> right;       // H x W x 1
  Tensor<double> dgt;         // H x W left-view disparity in pixels
  Mask valid;                 // dgt known, in [0, D-1], and x - dgt inside the frame
  Mask occluded;              // left pixels with no visible match in the right view
  Tensor<double> dgt_right;   // H x W right-view disparity; empty when unknown

  std::size_t height() const { return left.dim(0); }
  std::size_t width() const { return left.dim(1); }
};

}  // namespace acf

#endif  // ACF_DATA_STEREO_SAMPLE_HPP_
