#ifndef ACF_EVALUATION_HPP_
#define ACF_EVALUATION_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acf/mask.hpp"
#include "acf/numerics/tensor.hpp"

namespace acf {

enum class Split { kAll, kOcc, kNoc };

std::string to_string(Split split);
Split parse_split(const std::string& text);
// Comma-separated list such as "all,occ,noc".
std::vector<Split> parse_splits(const std::string& text);

// Mean |pred - gt| over the mask. Throws Error(domain) on an empty mask.
double end_point_error(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask);

// Percentage of masked pixels with |pred - gt| > k (strict).
double k_pixel_error(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask, double k);

// Percentage of masked pixels with |pred - gt| > max(3, 0.05 gt) (strict).
double d1_outlier_rate(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask);

struct OcclusionSplit {
  Mask occ;
  Mask noc;
};

/**
 * Left-right consistency. A pixel is occluded when x - dL leaves the frame or
 * |dL - dR(round(x - dL))| > threshold. Both sets are restricted to `valid`
 * (all pixels when omitted).
 */
OcclusionSplit occlusion_split(const Tensor<double>& left_disp, const Tensor<double>& right_disp, double threshold,
                               const Mask* valid = nullptr);

inline constexpr std::array<int, 4> kPixelThresholds = {2, 3, 4, 5};

struct MetricReport {
  Split split = Split::kAll;
  double epe = 0.0;
  std::array<double, 4> kpe{};  // percent, for k = 2, 3, 4, 5
  double d1 = 0.0;              // percent
  std::size_t pixels = 0;
};

// Pixel-weighted metrics pooled over many maps.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(Split split = Split::kAll) : split_(split) {}

  void add(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask);
  // Throws Error(domain) when no pixel was added.
  MetricReport report() const;
  std::size_t pixels() const { return pixels_; }

 private:
  Split split_;
  double abs_sum_ = 0.0;
  std::array<std::size_t, 4> over_k_{};
  std::size_t d1_ = 0;
  std::size_t pixels_ = 0;
};

MetricReport evaluate(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask,
                      Split split = Split::kAll);

struct SparsificationCurve {
  std::vector<double> fractions;
  std::vector<double> model;
  std::vector<double> oracle;
  std::vector<double> random;
};

// start:stop:step with stop included when it lands on the grid. Every value
// must lie in [0, 1). Throws Error(usage) when step <= 0.
std::vector<double> parse_fractions(const std::string& text);
std::vector<double> default_fractions();

/**
 * Normalized EPE after removing the floor(fraction * N) pixels ranked highest
 * by uncertainty (model), by true error (oracle) or by a seeded shuffle
 * (random). Ties in uncertainty and error fall back to pixel order. If every
 * error is zero all curves are 1.
 */
SparsificationCurve sparsification(std::span<const double> uncertainty, std::span<const double> abs_error,
                                   const std::vector<double>& fractions, std::uint64_t seed);

SparsificationCurve sparsification(const Tensor<double>& variance, const Tensor<double>& abs_error, const Mask& mask,
                                   const std::vector<double>& fractions, std::uint64_t seed);

// Smallest fraction whose curve value is at most `level`; empty when never.
std::optional<double> first_fraction_at_or_below(const std::vector<double>& fractions,
                                                 const std::vector<double>& curve, double level);

}  // namespace acf

#endif  // ACF_EVALUATION_HPP_
