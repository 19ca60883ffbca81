#ifndef ACF_NUMERICS_TENSOR_HPP_
#define ACF_NUMERICS_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "acf/error.hpp"

namespace acf {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/**
 * Dense row-major tensor with an optional gradient buffer of identical size.
 *
 * Image-like tensors are laid out H x W x C (channels innermost); cost volumes
 * are H x W x D with the disparity axis innermost.
 */
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<Real> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) {
      throw Error(errc::kShape, "tensor of shape " + shape_string(shape_) + " needs " +
                                    std::to_string(shape_size(shape_)) + " values, got " +
                                    std::to_string(values_.size()));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  Real* data() noexcept { return values_.data(); }
  const Real* data() const noexcept { return values_.data(); }
  std::span<Real> values() noexcept { return values_; }
  std::span<const Real> values() const noexcept { return values_; }

  Real& operator[](std::size_t i) { return values_[i]; }
  const Real& operator[](std::size_t i) const { return values_[i]; }

  Real& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  const Real& at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  Real& at(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const Real& at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Real& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return values_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const Real& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return values_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  void fill(Real value) { std::fill(values_.begin(), values_.end(), value); }

  // Same data, new shape with the same element count.
  Tensor reshaped(Shape shape) const& {
    Tensor out(std::move(shape), values_);
    return out;
  }
  Tensor reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(values_)); }

  bool has_grad() const noexcept { return grad_.has_value(); }
  // Allocates a zeroed gradient buffer if none is present.
  std::span<Real> grad() {
    if (!grad_) grad_.emplace(values_.size(), Real(0));
    return *grad_;
  }
  std::span<const Real> grad() const {
    if (!grad_) throw Error(errc::kDomain, "tensor has no gradient buffer");
    return *grad_;
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), Real(0));
    else grad_.emplace(values_.size(), Real(0));
  }
  void drop_grad() { grad_.reset(); }

  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(values_.begin(), values_.end());
    return Tensor<Other>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<Real> values_;
  std::optional<std::vector<Real>> grad_;
};

// Throws a shape error naming `what` unless `t` has exactly `expected`.
template <typename Real>
void require_shape(const Tensor<Real>& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw Error(errc::kShape, what + ": expected shape " + shape_string(expected) + ", got " +
                                  shape_string(t.shape()));
  }
}

template <typename Real>
void require_rank(const Tensor<Real>& t, std::size_t rank, const std::string& what) {
  if (t.rank() != rank) {
    throw Error(errc::kShape, what + ": expected rank " + std::to_string(rank) + ", got shape " +
                                  shape_string(t.shape()));
  }
}

}  // namespace acf

#endif  // ACF_NUMERICS_TENSOR_HPP_
