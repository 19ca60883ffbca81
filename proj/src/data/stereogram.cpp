#include "acf/data/stereogram.hpp"

#include <algorithm>
#include <cmath>

#include "acf/error.hpp"
#include "acf/numerics/rng.hpp"

namespace acf {
namespace {

constexpr std::size_t kTextureMargin = 4;
constexpr double kBackgroundSlope = 0.03;
constexpr double kShapeSlope = 0.1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string range_text(const DisparityRange& r) {
  return "[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]";
}

// Blurred, quantized dot texture addressed by left-image x plus a margin.
class Texture {
 public:
  Texture(std::size_t height, std::size_t width, Rng& rng) : height_(height), width_(width), values_(height * width) {
    const std::size_t gh = height + 2;
    const std::size_t gw = width + 2;
    std::vector<std::uint8_t> dots(gh * gw);
    std::uint64_t word = 0;
    int left = 0;
    for (std::uint8_t& dot : dots) {
      if (left == 0) {
        word = rng.bits();
        left = 64;
      }
      dot = static_cast<std::uint8_t>(word & 1U);
      word >>= 1;
      --left;
    }
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        int sum = 0;
        for (std::size_t dy = 0; dy < 3; ++dy) {
          for (std::size_t dx = 0; dx < 3; ++dx) sum += dots[(y + dy) * gw + x + dx];
        }
        values_[y * width + x] = std::round(255.0 * sum / 9.0) / 255.0;
      }
    }
  }

  // Linear interpolation along x; exact at integer positions.
  double sample(std::size_t y, double x) const {
    const double u = std::clamp(x + static_cast<double>(kTextureMargin), 0.0, static_cast<double>(width_ - 1));
    const std::size_t x0 = static_cast<std::size_t>(std::floor(u));
    const double t = u - static_cast<double>(x0);
    const double a = values_[y * width_ + x0];
    if (t == 0.0 || x0 + 1 >= width_) return a;
    const double b = values_[y * width_ + x0 + 1];
    return a + t * (b - a);
  }

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> values_;
};

struct Visible {
  std::size_t surface = 0;
  double x = 0.0;
  double disparity = 0.0;
};

// Nearest surface seen at right-view position xr in row y.
Visible visible_in_right(const std::vector<Surface>& surfaces, double xr, double y) {
  Visible best;
  bool found = false;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const double x = surfaces[i].source_x(xr, y);
    if (!surfaces[i].contains(x, y)) continue;
    const double d = surfaces[i].disparity(x, y);
    if (!found || d >= best.disparity) {
      best = Visible{i, x, d};
      found = true;
    }
  }
  if (!found) throw Error(errc::kDomain, "scene has no background surface");
  return best;
}

// Shrinks slopes so the plane stays inside [lo, hi] over a box of half extents ex, ey.
void fit_slopes(Surface& s, double ex, double ey, const DisparityRange& range) {
  const double dev = std::abs(s.gx) * ex + std::abs(s.gy) * ey;
  const double margin = std::min(s.d0 - range.lo, range.hi - s.d0);
  if (dev > margin) {
    const double k = dev > 0.0 ? std::max(margin, 0.0) / dev : 0.0;
    s.gx *= k;
    s.gy *= k;
  }
}

}  // namespace

bool Surface::contains(double x, double y) const {
  switch (kind) {
    case ShapeKind::kBackground:
      return true;
    case ShapeKind::kRectangle:
      return x >= cx - rx - 0.5 && x < cx + rx + 0.5 && y >= cy - ry - 0.5 && y < cy + ry + 0.5;
    case ShapeKind::kEllipse: {
      const double u = (x - cx) / (rx + 0.5);
      const double v = (y - cy) / (ry + 0.5);
      return u * u + v * v <= 1.0;
    }
  }
  return false;
}

double Surface::source_x(double xr, double y) const {
  // x - (d0 + gx (x - cx) + gy (y - cy)) = xr
  return (xr + d0 - gx * cx + gy * (y - cy)) / (1.0 - gx);
}

StereogramParams StereogramParams::resolved() const {
  StereogramParams p = *this;
  const double top = max_disp >= 1 ? static_cast<double>(max_disp - 1) : 0.0;
  const double d = static_cast<double>(max_disp);
  if (!p.background) p.background = DisparityRange{std::min(std::max(1.0, std::floor(d / 8.0)), top), std::min(std::max(1.0, std::floor(d / 4.0)), top)};
  if (!p.shapes) p.shapes = DisparityRange{std::min(std::max(std::floor(d / 4.0), p.background->hi), top), std::min(std::max(std::floor(3.0 * d / 4.0), p.background->hi), top)};
  return p;
}

void StereogramParams::validate() const {
  if (height == 0 || width == 0) throw Error(errc::kDomain, "stereogram size must be non-zero");
  if (max_disp < 2) throw Error(errc::kDomain, "max disparity D must be at least 2");
  if (max_disp > width) {
    throw Error(errc::kDomain, "max disparity D=" + std::to_string(max_disp) + " exceeds image width W=" +
                                   std::to_string(width));
  }
  const StereogramParams p = resolved();
  const double top = static_cast<double>(max_disp - 1);
  for (const auto& [name, r] : {std::pair{"background", *p.background}, std::pair{"shape", *p.shapes}}) {
    if (!(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= top)) {
      throw Error(errc::kDomain, std::string(name) + " disparity range " + range_text(r) + " is not inside [0, " +
                                     std::to_string(max_disp - 1) + "]");
    }
  }
  if (p.shapes->lo < p.background->hi) {
    throw Error(errc::kDomain, "shape disparity range " + range_text(*p.shapes) +
                                   " must not start below the background range " + range_text(*p.background));
  }
  if (!slant && (std::floor(p.background->hi) < std::ceil(p.background->lo) ||
                 std::floor(p.shapes->hi) < std::ceil(p.shapes->lo))) {
    throw Error(errc::kDomain, "integer disparity mode needs an integer inside every disparity range");
  }
}

Stereogram generate_stereogram(const StereogramParams& params, std::uint64_t seed) {
  params.validate();
  const StereogramParams p = params.resolved();
  const DisparityRange bg = *p.background;
  const DisparityRange fg = *p.shapes;
  const double w = static_cast<double>(p.width);
  const double h = static_cast<double>(p.height);
  Rng rng(seed);

  auto draw_disparity = [&](const DisparityRange& r) {
    if (p.slant) return rng.uniform(r.lo, r.hi);
    return static_cast<double>(
        rng.between(static_cast<long long>(std::ceil(r.lo)), static_cast<long long>(std::floor(r.hi))));
  };

  std::vector<Surface> surfaces;
  Surface background;
  background.cx = (w - 1.0) / 2.0;
  background.cy = (h - 1.0) / 2.0;
  background.d0 = draw_disparity(bg);
  if (p.slant) {
    background.gx = rng.uniform(-kBackgroundSlope, kBackgroundSlope);
    background.gy = rng.uniform(-kBackgroundSlope, kBackgroundSlope);
    fit_slopes(background, (w - 1.0) / 2.0, (h - 1.0) / 2.0, bg);
  }
  surfaces.push_back(background);

  const long long rx_lo = std::max<long long>(1, static_cast<long long>(p.width / 16));
  const long long rx_hi = std::max<long long>(rx_lo, static_cast<long long>(p.width / 6));
  const long long ry_lo = std::max<long long>(1, static_cast<long long>(p.height / 16));
  const long long ry_hi = std::max<long long>(ry_lo, static_cast<long long>(p.height / 6));
  for (std::size_t i = 0; i < p.num_shapes; ++i) {
    Surface s;
    s.kind = rng.below(2) == 0 ? ShapeKind::kRectangle : ShapeKind::kEllipse;
    s.cx = static_cast<double>(rng.between(0, static_cast<long long>(p.width) - 1));
    s.cy = static_cast<double>(rng.between(0, static_cast<long long>(p.height) - 1));
    s.rx = static_cast<double>(rng.between(rx_lo, rx_hi));
    s.ry = static_cast<double>(rng.between(ry_lo, ry_hi));
    s.d0 = draw_disparity(fg);
    if (p.slant) {
      s.gx = rng.uniform(-kShapeSlope, kShapeSlope);
      s.gy = rng.uniform(-kShapeSlope, kShapeSlope);
      fit_slopes(s, s.rx + 0.5, s.ry + 0.5, fg);
    }
    surfaces.push_back(s);
  }
  return render_scene(p, surfaces, rng.bits());
}

Stereogram render_scene(const StereogramParams& params, const std::vector<Surface>& surfaces, std::uint64_t seed) {
  const std::size_t height = params.height;
  const std::size_t width = params.width;
  if (height == 0 || width == 0) throw Error(errc::kDomain, "stereogram size must be non-zero");
  if (surfaces.empty() || surfaces.front().kind != ShapeKind::kBackground) {
    throw Error(errc::kDomain, "scene must start with a background surface");
  }
  Rng rng(seed);
  const std::size_t texture_width = width + params.max_disp + 2 * kTextureMargin;
  std::vector<Texture> textures;
  textures.reserve(surfaces.size());
  for (std::size_t i = 0; i < surfaces.size(); ++i) textures.emplace_back(height, texture_width, rng);

  Stereogram out;
  out.surfaces = surfaces;
  StereoSample& s = out.sample;
  s.left = Tensor<double>(Shape{height, width, 1});
  s.right = Tensor<double>(Shape{height, width, 1});
  s.dgt = Tensor<double>(Shape{height, width});
  s.dgt_right = Tensor<double>(Shape{height, width});
  s.occluded = Mask(height, width);

  for (std::size_t y = 0; y < height; ++y) {
    const double yd = static_cast<double>(y);
    for (std::size_t x = 0; x < width; ++x) {
      const double xd = static_cast<double>(x);
      std::size_t shown = 0;
      double d = surfaces[0].disparity(xd, yd);
      for (std::size_t i = 1; i < surfaces.size(); ++i) {
        if (!surfaces[i].contains(xd, yd)) continue;
        const double di = surfaces[i].disparity(xd, yd);
        if (di >= d) {
          shown = i;
          d = di;
        }
      }
      // Stored disparities are float32 so they survive PFM round trips.
      d = static_cast<double>(static_cast<float>(d));
      s.left.at(y, x, 0) = textures[shown].sample(y, xd);
      s.dgt.at(y, x) = d;
      const double xr = xd - d;
      const bool occluded = xr < 0.0 || visible_in_right(surfaces, xr, yd).surface != shown;
      s.occluded.set(y, x, occluded);

      const Visible v = visible_in_right(surfaces, xd, yd);
      s.right.at(y, x, 0) = textures[v.surface].sample(y, v.x);
      s.dgt_right.at(y, x) = static_cast<double>(static_cast<float>(v.disparity));
    }
  }
  s.valid = validity_from_disparity(s.dgt, params.max_disp);
  return out;
}

double occluded_fraction(const StereoSample& sample) {
  const std::size_t total = sample.occluded.size();
  return total == 0 ? 0.0 : static_cast<double>(sample.occluded.count()) / static_cast<double>(total);
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, std::uint64_t index) {
  return splitmix64(splitmix64(dataset_seed) ^ (index + 1) * 0xD1B54A32D192ED03ULL);
}

Mask validity_from_disparity(const Tensor<double>& dgt, std::size_t max_disp) {
  require_rank(dgt, 2, "disparity map");
  const std::size_t height = dgt.dim(0);
  const std::size_t width = dgt.dim(1);
  const double top = static_cast<double>(max_disp) - 1.0;
  Mask valid(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double d = dgt.at(y, x);
      valid.set(y, x, std::isfinite(d) && d >= 0.0 && d <= top && static_cast<double>(x) - d >= 0.0);
    }
  }
  return valid;
}

}  // namespace acf
