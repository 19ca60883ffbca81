#ifndef ACF_DATA_STEREOGRAM_HPP_
#define ACF_DATA_STEREOGRAM_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "acf/data/stereo_sample.hpp"

namespace acf {

struct DisparityRange {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const DisparityRange&, const DisparityRange&) = default;
};

enum class ShapeKind { kBackground, kRectangle, kEllipse };

/**
 * One planar surface of the scene, described in left-image coordinates.
 * Disparity is d0 + gx * (x - cx) + gy * (y - cy); the background covers the
 * whole plane. Rectangles and ellipses cover |x - cx| <= rx + 1/2 (resp. the
 * ellipse with those half axes) so integer pixel tests and continuous tests
 * agree.
 */
struct Surface {
  ShapeKind kind = ShapeKind::kBackground;
  double cx = 0.0, cy = 0.0;
  double rx = 0.0, ry = 0.0;
  double d0 = 0.0, gx = 0.0, gy = 0.0;

  double disparity(double x, double y) const { return d0 + gx * (x - cx) + gy * (y - cy); }
  bool contains(double x, double y) const;
  // Left-image x whose right-view position in row y is xr.
  double source_x(double xr, double y) const;
};

struct StereogramParams {
  std::size_t height = 64;
  std::size_t width = 96;
  std::size_t max_disp = 32;
  std::size_t num_shapes = 4;
  // Empty ranges pick defaults from max_disp (see resolved()).
  std::optional<DisparityRange> background;
  std::optional<DisparityRange> shapes;
  // Slanted planes with real-valued disparity; the right view is resampled
  // with linear interpolation.
  bool slant = false;

  // Background [max(1, D/8), max(1, D/4)], shapes [D/4, 3D/4], clamped into [0, D-1].
  StereogramParams resolved() const;
  // Throws Error(domain) for an infeasible geometry.
  void validate() const;
};

struct Stereogram {
  StereoSample sample;
  std::vector<Surface> surfaces;  // background first, then shapes in stacking order
};

/**
 * Random-dot stereo pair with exact ground truth.
 *
 * Each surface carries its own 50% binary dot texture, blurred by a 3x3 box
 * filter and quantized to 1/255 steps. A left pixel shows the covering
 * surface with the largest disparity (later shapes win ties); right pixel xr
 * shows the nearest surface whose left-image point x satisfies
 * x - d(x) = xr. A left pixel is occluded when x - d leaves the frame or a
 * different surface is visible at x - d in the right view. Pixels with
 * x - d < 0 are also invalid.
 */
Stereogram generate_stereogram(const StereogramParams& params, std::uint64_t seed);

// Renders an explicit scene; textures are drawn from `seed`.
Stereogram render_scene(const StereogramParams& params, const std::vector<Surface>& surfaces, std::uint64_t seed);

// Fraction of all H x W pixels marked occluded.
double occluded_fraction(const StereoSample& sample);

// Derived seed for sample `index` of a dataset.
std::uint64_t sample_seed(std::uint64_t dataset_seed, std::uint64_t index);

// Validity rule applied to stored ground truth: finite, within [0, D-1], and
// with x - d inside the frame.
Mask validity_from_disparity(const Tensor<double>& dgt, std::size_t max_disp);

}  // namespace acf

#endif  // ACF_DATA_STEREOGRAM_HPP_
