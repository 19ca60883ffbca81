#ifndef ACF_MASK_HPP_
#define ACF_MASK_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "acf/error.hpp"

namespace acf {

// H x W boolean pixel set.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t height, std::size_t width, bool value = false)
      : height_(height), width_(width), bits_(height * width, value ? 1 : 0) {}

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  bool operator()(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }
  void set(std::size_t y, std::size_t x, bool value) { bits_[y * width_ + x] = value ? 1 : 0; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  Mask operator&(const Mask& other) const { return combine(other, [](bool a, bool b) { return a && b; }); }
  Mask operator|(const Mask& other) const { return combine(other, [](bool a, bool b) { return a || b; }); }
  // Pixels of *this that are not in `other`.
  Mask minus(const Mask& other) const { return combine(other, [](bool a, bool b) { return a && !b; }); }
  Mask operator~() const {
    Mask out(height_, width_);
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] ? 0 : 1;
    return out;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  template <typename Op>
  Mask combine(const Mask& other, Op op) const {
    if (other.height_ != height_ || other.width_ != width_) {
      throw Error(errc::kShape, "mask size mismatch: " + std::to_string(height_) + "x" + std::to_string(width_) +
                                    " vs " + std::to_string(other.height_) + "x" + std::to_string(other.width_));
    }
    Mask out(height_, width_);
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = op(bits_[i] != 0, other.bits_[i] != 0) ? 1 : 0;
    return out;
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace acf

#endif  // ACF_MASK_HPP_
