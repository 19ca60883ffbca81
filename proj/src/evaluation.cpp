#include "acf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acf/error.hpp"
#include "acf/numerics/rng.hpp"

namespace acf {
namespace {

void check_maps(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask) {
  require_rank(gt, 2, "ground-truth disparity");
  require_shape(pred, gt.shape(), "predicted disparity");
  if (mask.height() != gt.dim(0) || mask.width() != gt.dim(1)) {
    throw Error(errc::kShape, "mask is " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                                  ", disparity is " + shape_string(gt.shape()));
  }
}

void require_pixels(std::size_t n, const char* metric) {
  if (n == 0) throw Error(errc::kDomain, std::string(metric) + ": empty mask");
}

double d1_threshold(double gt) { return std::max(3.0, 0.05 * gt); }

double percent(std::size_t count, std::size_t total) {
  return 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

// Mean error left after dropping the first `removed` entries of `order`.
// Remaining errors are always summed in ascending-value order, so a kept set
// that is elementwise no larger than another never sums larger in floating
// point either.
std::vector<double> curve_for(const std::vector<std::size_t>& order, const std::vector<double>& sorted_error,
                              const std::vector<std::size_t>& rank, const std::vector<std::size_t>& removed,
                              double full) {
  const std::size_t n = order.size();
  std::vector<double> out;
  out.reserve(removed.size());
  std::vector<std::uint8_t> kept(n);
  for (const std::size_t r : removed) {
    if (full == 0.0) {
      out.push_back(1.0);
      continue;
    }
    std::fill(kept.begin(), kept.end(), 0);
    for (std::size_t i = r; i < n; ++i) kept[rank[order[i]]] = 1;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (kept[k]) sum += sorted_error[k];
    }
    out.push_back(sum / static_cast<double>(n - r) / full);
  }
  return out;
}

std::vector<std::size_t> descending_order(std::span<const double> key) {
  std::vector<std::size_t> order(key.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return order;
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::kAll:
      return "all";
    case Split::kOcc:
      return "occ";
    case Split::kNoc:
      return "noc";
  }
  return "?";
}

Split parse_split(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "all") return Split::kAll;
  if (lower == "occ") return Split::kOcc;
  if (lower == "noc") return Split::kNoc;
  throw Error(errc::kUsage, "unknown split '" + text + "' (expected all, occ or noc)");
}

std::vector<Split> parse_splits(const std::string& text) {
  std::vector<Split> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const Split s = parse_split(item);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

double end_point_error(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask) {
  check_maps(pred, gt, mask);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    sum += std::abs(pred[i] - gt[i]);
    ++n;
  }
  require_pixels(n, "end-point error");
  return sum / static_cast<double>(n);
}

double k_pixel_error(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask, double k) {
  if (!(k > 0.0)) throw Error(errc::kDomain, "k-pixel error: k must be positive");
  check_maps(pred, gt, mask);
  std::size_t over = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    if (std::abs(pred[i] - gt[i]) > k) ++over;
    ++n;
  }
  require_pixels(n, "k-pixel error");
  return percent(over, n);
}

double d1_outlier_rate(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask) {
  check_maps(pred, gt, mask);
  std::size_t over = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    if (gt[i] < 0.0) throw Error(errc::kDomain, "D1: negative ground truth at index " + std::to_string(i));
    if (std::abs(pred[i] - gt[i]) > d1_threshold(gt[i])) ++over;
    ++n;
  }
  require_pixels(n, "D1 outlier rate");
  return percent(over, n);
}

OcclusionSplit occlusion_split(const Tensor<double>& left_disp, const Tensor<double>& right_disp, double threshold,
                               const Mask* valid) {
  if (!(threshold > 0.0)) throw Error(errc::kDomain, "consistency threshold must be positive");
  require_rank(left_disp, 2, "left disparity");
  require_shape(right_disp, left_disp.shape(), "right disparity");
  const std::size_t height = left_disp.dim(0);
  const std::size_t width = left_disp.dim(1);
  if (valid && (valid->height() != height || valid->width() != width)) {
    throw Error(errc::kShape, "validity mask does not match the disparity size");
  }
  OcclusionSplit out{Mask(height, width), Mask(height, width)};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (valid && !(*valid)(y, x)) continue;
      const double dl = left_disp.at(y, x);
      const double xr = std::round(static_cast<double>(x) - dl);
      bool occluded = true;
      if (std::isfinite(xr) && xr >= 0.0 && xr <= static_cast<double>(width - 1)) {
        const double dr = right_disp.at(y, static_cast<std::size_t>(xr));
        occluded = !(std::abs(dl - dr) <= threshold);
      }
      out.occ.set(y, x, occluded);
      out.noc.set(y, x, !occluded);
    }
  }
  return out;
}

void MetricAccumulator::add(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask) {
  check_maps(pred, gt, mask);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    const double e = std::abs(pred[i] - gt[i]);
    abs_sum_ += e;
    for (std::size_t k = 0; k < kPixelThresholds.size(); ++k) {
      if (e > kPixelThresholds[k]) ++over_k_[k];
    }
    if (gt[i] < 0.0) throw Error(errc::kDomain, "D1: negative ground truth at index " + std::to_string(i));
    if (e > d1_threshold(gt[i])) ++d1_;
    ++pixels_;
  }
}

MetricReport MetricAccumulator::report() const {
  require_pixels(pixels_, ("metrics for split " + to_string(split_)).c_str());
  MetricReport r;
  r.split = split_;
  r.pixels = pixels_;
  r.epe = abs_sum_ / static_cast<double>(pixels_);
  for (std::size_t k = 0; k < kPixelThresholds.size(); ++k) r.kpe[k] = percent(over_k_[k], pixels_);
  r.d1 = percent(d1_, pixels_);
  return r;
}

MetricReport evaluate(const Tensor<double>& pred, const Tensor<double>& gt, const Mask& mask, Split split) {
  MetricAccumulator acc(split);
  acc.add(pred, gt, mask);
  return acc.report();
}

std::vector<double> parse_fractions(const std::string& text) {
  const std::size_t a = text.find(':');
  const std::size_t b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (b == std::string::npos) throw Error(errc::kUsage, "fractions must be start:stop:step, got '" + text + "'");
  double v[3];
  const std::string parts[3] = {text.substr(0, a), text.substr(a + 1, b - a - 1), text.substr(b + 1)};
  for (int i = 0; i < 3; ++i) {
    std::size_t used = 0;
    try {
      v[i] = std::stod(parts[i], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != parts[i].size() || !std::isfinite(v[i])) {
      throw Error(errc::kUsage, "fractions: malformed number '" + parts[i] + "'");
    }
  }
  const double start = v[0], stop = v[1], step = v[2];
  if (!(step > 0.0)) throw Error(errc::kUsage, "fractions: step must be positive");
  if (!(start >= 0.0 && stop < 1.0 && start <= stop)) {
    throw Error(errc::kUsage, "fractions: need 0 <= start <= stop < 1");
  }
  const std::size_t n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Snap to the decimal grid so 0.07 prints and compares as 0.07.
    out.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
  }
  return out;
}

std::vector<double> default_fractions() { return parse_fractions("0:0.95:0.01"); }

SparsificationCurve sparsification(std::span<const double> uncertainty, std::span<const double> abs_error,
                                   const std::vector<double>& fractions, std::uint64_t seed) {
  if (uncertainty.size() != abs_error.size()) {
    throw Error(errc::kShape, "sparsification: " + std::to_string(uncertainty.size()) + " uncertainties vs " +
                                  std::to_string(abs_error.size()) + " errors");
  }
  const std::size_t n = abs_error.size();
  if (n == 0) throw Error(errc::kDomain, "sparsification: no pixels");
  std::vector<std::size_t> removed;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double f = fractions[i];
    if (!(f >= 0.0 && f < 1.0)) throw Error(errc::kDomain, "sparsification: fraction outside [0, 1)");
    if (i > 0 && f < fractions[i - 1]) throw Error(errc::kDomain, "sparsification: fractions must be sorted");
    const std::size_t r = static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    if (r >= n) {
      throw Error(errc::kDomain, "sparsification: fraction " + std::to_string(f) + " leaves no pixels");
    }
    removed.push_back(r);
  }
  std::vector<std::size_t> ascending(n);
  std::iota(ascending.begin(), ascending.end(), std::size_t{0});
  std::stable_sort(ascending.begin(), ascending.end(),
                   [&](std::size_t a, std::size_t b) { return abs_error[a] < abs_error[b]; });
  std::vector<double> sorted_error(n);
  std::vector<std::size_t> rank(n);
  for (std::size_t k = 0; k < n; ++k) {
    sorted_error[k] = abs_error[ascending[k]];
    rank[ascending[k]] = k;
  }
  const double full = std::accumulate(sorted_error.begin(), sorted_error.end(), 0.0) / static_cast<double>(n);

  std::vector<std::size_t> random_order(n);
  std::iota(random_order.begin(), random_order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(random_order);

  SparsificationCurve c;
  c.fractions = fractions;
  c.model = curve_for(descending_order(uncertainty), sorted_error, rank, removed, full);
  c.oracle = curve_for(descending_order(abs_error), sorted_error, rank, removed, full);
  c.random = curve_for(random_order, sorted_error, rank, removed, full);
  return c;
}

SparsificationCurve sparsification(const Tensor<double>& variance, const Tensor<double>& abs_error, const Mask& mask,
                                   const std::vector<double>& fractions, std::uint64_t seed) {
  check_maps(variance, abs_error, mask);
  std::vector<double> u;
  std::vector<double> e;
  for (std::size_t i = 0; i < abs_error.size(); ++i) {
    if (!mask[i]) continue;
    u.push_back(variance[i]);
    e.push_back(abs_error[i]);
  }
  return sparsification(u, e, fractions, seed);
}

std::optional<double> first_fraction_at_or_below(const std::vector<double>& fractions,
                                                 const std::vector<double>& curve, double level) {
  for (std::size_t i = 0; i < fractions.size() && i < curve.size(); ++i) {
    if (curve[i] <= level) return fractions[i];
  }
  return std::nullopt;
}

}  // namespace acf
