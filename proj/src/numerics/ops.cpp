#include "acf/numerics/ops.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

namespace acf {
namespace {

struct ConvGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t batch = 1;
  std::size_t cin = 0;
  std::size_t cout = 0;
  std::size_t k = 0;
};

template <typename Real>
ConvGeometry conv_geometry(const Tensor<Real>& input, const Tensor<Real>& kernel, std::size_t padding) {
  if (input.rank() != 3 && input.rank() != 4) {
    throw Error(errc::kShape, "conv2d: input must be HxWxC or HxWxCxB, got " + shape_string(input.shape()));
  }
  require_rank(kernel, 4, "conv2d kernel");
  ConvGeometry g;
  g.height = input.dim(0);
  g.width = input.dim(1);
  g.batch = input.rank() == 4 ? input.dim(3) : 1;
  g.cin = input.dim(2);
  g.k = kernel.dim(0);
  g.cout = kernel.dim(3);
  if (kernel.dim(1) != g.k) {
    throw Error(errc::kShape, "conv2d: kernel dim 1 (width) = " + std::to_string(kernel.dim(1)) +
                                  " differs from dim 0 (height) = " + std::to_string(g.k));
  }
  if (g.k % 2 == 0) {
    throw Error(errc::kShape, "conv2d: kernel size " + std::to_string(g.k) + " must be odd");
  }
  if (kernel.dim(2) != g.cin) {
    throw Error(errc::kShape, "conv2d: kernel dim 2 (input channels) = " + std::to_string(kernel.dim(2)) +
                                  " but input has " + std::to_string(g.cin) + " channels");
  }
  if (padding != (g.k - 1) / 2) {
    throw Error(errc::kShape, "conv2d: padding " + std::to_string(padding) + " must equal (k-1)/2 = " +
                                  std::to_string((g.k - 1) / 2));
  }
  return g;
}

template <typename Real>
Shape with_channels(const Shape& shape, std::size_t channels) {
  Shape out = shape;
  out[2] = channels;
  return out;
}

// Rank-4 tensors are H x W x C x B with the batch axis innermost. Both
// layouts accumulate in fixed blocks of kLanes values so the inner loops map
// onto vector registers.
constexpr std::size_t kLanes = 16;

template <typename Real>
struct LaneBlock {
  typedef Real type __attribute__((vector_size(kLanes * sizeof(Real))));
};
template <typename Real>
using Vec = typename LaneBlock<Real>::type;

template <typename Real>
Vec<Real> load(const Real* p) {
  Vec<Real> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

// out = bias + correlation of `in` with `w` (k x k x cin x cout), rank 3.
template <typename Real>
void correlate_pixels(const ConvGeometry& g, const Real* in, const Real* w, const Real* bias, Real* out) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((g.k - 1) / 2);
  const std::size_t cout_p = round_up(g.cout, kLanes);
  // Weights padded to whole lane blocks along Cout.
  std::vector<Real> wp(g.k * g.k * g.cin * cout_p, Real(0));
  for (std::size_t r = 0; r < g.k * g.k * g.cin; ++r) {
    std::copy(w + r * g.cout, w + (r + 1) * g.cout, wp.begin() + static_cast<std::ptrdiff_t>(r * cout_p));
  }
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      Real* op = out + static_cast<std::size_t>(y * W + x) * g.cout;
      for (std::size_t c0 = 0; c0 < g.cout; c0 += kLanes) {
        Vec<Real> acc = {};
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const std::ptrdiff_t iy = y + static_cast<std::ptrdiff_t>(ky) - pad;
          if (iy < 0 || iy >= H) continue;
          for (std::size_t kx = 0; kx < g.k; ++kx) {
            const std::ptrdiff_t ix = x + static_cast<std::ptrdiff_t>(kx) - pad;
            if (ix < 0 || ix >= W) continue;
            const Real* ip = in + static_cast<std::size_t>(iy * W + ix) * g.cin;
            const Real* wk = wp.data() + (ky * g.k + kx) * g.cin * cout_p + c0;
            for (std::size_t ci = 0; ci < g.cin; ++ci) acc += ip[ci] * load(wk + ci * cout_p);
          }
        }
        const std::size_t n = std::min(kLanes, g.cout - c0);
        for (std::size_t j = 0; j < n; ++j) op[c0 + j] = acc[j] + (bias ? bias[c0 + j] : Real(0));
      }
    }
  }
}

// Rank-4 correlation: every batch slice filtered with the same kernel.
// Accumulators for all output channels of a pixel stay in a small scratch
// block; whole lane blocks of the batch axis are vectorized and any
// remainder runs scalar.
template <typename Real>
void correlate_batched(const ConvGeometry& g, const Real* in, const Real* w, const Real* bias, Real* out) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((g.k - 1) / 2);
  const std::size_t B = g.batch;
  const std::size_t blocks = B / kLanes;
  const std::size_t tail = B - blocks * kLanes;
  std::vector<Vec<Real>> acc(g.cout * blocks);
  std::vector<Real> rest(g.cout * tail);
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        const Real b = bias ? bias[co] : Real(0);
        for (std::size_t c = 0; c < blocks; ++c) acc[co * blocks + c] = Vec<Real>{} + b;
        for (std::size_t t = 0; t < tail; ++t) rest[co * tail + t] = b;
      }
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const std::ptrdiff_t iy = y + static_cast<std::ptrdiff_t>(ky) - pad;
        if (iy < 0 || iy >= H) continue;
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const std::ptrdiff_t ix = x + static_cast<std::ptrdiff_t>(kx) - pad;
          if (ix < 0 || ix >= W) continue;
          const Real* ip = in + static_cast<std::size_t>(iy * W + ix) * g.cin * B;
          const Real* wk = w + (ky * g.k + kx) * g.cin * g.cout;
          for (std::size_t ci = 0; ci < g.cin; ++ci) {
            const Real* src = ip + ci * B;
            const Real* wr = wk + ci * g.cout;
            for (std::size_t c = 0; c < blocks; ++c) {
              const Vec<Real> v = load(src + c * kLanes);
              for (std::size_t co = 0; co < g.cout; ++co) acc[co * blocks + c] += wr[co] * v;
            }
            for (std::size_t t = 0; t < tail; ++t) {
              const Real v = src[blocks * kLanes + t];
              for (std::size_t co = 0; co < g.cout; ++co) rest[co * tail + t] += wr[co] * v;
            }
          }
        }
      }
      Real* op = out + static_cast<std::size_t>(y * W + x) * g.cout * B;
      for (std::size_t co = 0; co < g.cout; ++co) {
        std::memcpy(op + co * B, &acc[co * blocks], blocks * sizeof(Vec<Real>));
        for (std::size_t t = 0; t < tail; ++t) op[co * B + blocks * kLanes + t] = rest[co * tail + t];
      }
    }
  }
}

template <typename Real>
void correlate(const ConvGeometry& g, const Real* in, const Real* w, const Real* bias, Real* out, bool batched) {
  if (batched) {
    correlate_batched(g, in, w, bias, out);
  } else {
    correlate_pixels(g, in, w, bias, out);
  }
}

// dL/dkernel and dL/dbias, accumulated into gw and gb.
template <typename Real>
void kernel_gradient(const ConvGeometry& g, const Real* in, const Real* go, Real* gw, Real* gb, bool batched) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((g.k - 1) / 2);
  const std::size_t B = batched ? g.batch : 1;
  const std::size_t pixels = g.height * g.width;

  for (std::size_t co = 0; co < g.cout; ++co) {
    Real sum = 0;
    for (std::size_t p = 0; p < pixels; ++p) {
      const Real* gp = go + (p * g.cout + co) * B;
      for (std::size_t b = 0; b < B; ++b) sum += gp[b];
    }
    gb[co] += sum;
  }

  if (!batched) {
    // Per pixel, every (tap, ci) row of the kernel gradient gains
    // in(tap, ci) * grad_out(pixel, :), accumulated in lane blocks.
    const std::size_t cblocks = round_up(g.cout, kLanes) / kLanes;
    const std::size_t cout_p = cblocks * kLanes;
    std::vector<Real> gop(pixels * cout_p, Real(0));
    for (std::size_t p = 0; p < pixels; ++p) {
      std::copy(go + p * g.cout, go + (p + 1) * g.cout, gop.begin() + static_cast<std::ptrdiff_t>(p * cout_p));
    }
    std::vector<Vec<Real>> acc(g.k * g.k * g.cin * cblocks);
    for (std::ptrdiff_t y = 0; y < H; ++y) {
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        const Real* gr = gop.data() + static_cast<std::size_t>(y * W + x) * cout_p;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const std::ptrdiff_t iy = y + static_cast<std::ptrdiff_t>(ky) - pad;
          if (iy < 0 || iy >= H) continue;
          for (std::size_t kx = 0; kx < g.k; ++kx) {
            const std::ptrdiff_t ix = x + static_cast<std::ptrdiff_t>(kx) - pad;
            if (ix < 0 || ix >= W) continue;
            const Real* ip = in + static_cast<std::size_t>(iy * W + ix) * g.cin;
            Vec<Real>* a = acc.data() + (ky * g.k + kx) * g.cin * cblocks;
            for (std::size_t c = 0; c < cblocks; ++c) {
              const Vec<Real> gv = load(gr + c * kLanes);
              for (std::size_t ci = 0; ci < g.cin; ++ci) a[ci * cblocks + c] += ip[ci] * gv;
            }
          }
        }
      }
    }
    for (std::size_t r = 0; r < g.k * g.k * g.cin; ++r) {
      for (std::size_t co = 0; co < g.cout; ++co) gw[r * g.cout + co] += acc[r * cblocks + co / kLanes][co % kLanes];
    }
    return;
  }

  const std::size_t blocks = B / kLanes;
  const std::size_t rows = g.k * g.k * g.cin * g.cout;
  std::vector<Vec<Real>> acc(rows);
  std::vector<Real> rest(rows, Real(0));
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      const Real* gp = go + static_cast<std::size_t>(y * W + x) * g.cout * B;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const std::ptrdiff_t iy = y + static_cast<std::ptrdiff_t>(ky) - pad;
        if (iy < 0 || iy >= H) continue;
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const std::ptrdiff_t ix = x + static_cast<std::ptrdiff_t>(kx) - pad;
          if (ix < 0 || ix >= W) continue;
          const Real* ip = in + static_cast<std::size_t>(iy * W + ix) * g.cin * B;
          const std::size_t base = (ky * g.k + kx) * g.cin * g.cout;
          for (std::size_t ci = 0; ci < g.cin; ++ci) {
            const Real* src = ip + ci * B;
            for (std::size_t c = 0; c < blocks; ++c) {
              const Vec<Real> v = load(src + c * kLanes);
              for (std::size_t co = 0; co < g.cout; ++co) {
                acc[base + ci * g.cout + co] += v * load(gp + co * B + c * kLanes);
              }
            }
            for (std::size_t t = blocks * kLanes; t < B; ++t) {
              for (std::size_t co = 0; co < g.cout; ++co) rest[base + ci * g.cout + co] += src[t] * gp[co * B + t];
            }
          }
        }
      }
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    Real sum = rest[r];
    for (std::size_t j = 0; j < kLanes; ++j) sum += acc[r][j];
    gw[r] += sum;
  }

}

}  // namespace

template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& input, const Tensor<Real>& kernel, const Tensor<Real>& bias,
                    std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, kernel, padding);
  require_shape(bias, Shape{g.cout}, "conv2d bias");
  Tensor<Real> out(with_channels<Real>(input.shape(), g.cout));
  correlate(g, input.data(), kernel.data(), bias.data(), out.data(), input.rank() == 4);
  return out;
}

template <typename Real>
Conv2dGrads<Real> conv2d_backward(const Tensor<Real>& input, const Tensor<Real>& kernel,
                                  const Tensor<Real>& grad_output, std::size_t padding, bool need_input) {
  const ConvGeometry g = conv_geometry(input, kernel, padding);
  require_shape(grad_output, with_channels<Real>(input.shape(), g.cout), "conv2d grad_output");
  const bool batched = input.rank() == 4;

  Conv2dGrads<Real> grads;
  grads.kernel = Tensor<Real>(kernel.shape());
  grads.bias = Tensor<Real>(Shape{g.cout});
  kernel_gradient(g, input.data(), grad_output.data(), grads.kernel.data(), grads.bias.data(), batched);

  if (need_input) {
    // The input gradient is a same-size correlation of grad_output with the
    // spatially flipped kernel, input and output channels swapped.
    grads.input = Tensor<Real>(input.shape());
    std::vector<Real> flipped(kernel.size());
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const std::size_t src = ((g.k - 1 - ky) * g.k + (g.k - 1 - kx)) * g.cin * g.cout;
        const std::size_t dst = (ky * g.k + kx) * g.cout * g.cin;
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          for (std::size_t co = 0; co < g.cout; ++co) flipped[dst + co * g.cin + ci] = kernel[src + ci * g.cout + co];
        }
      }
    }
    ConvGeometry t = g;
    std::swap(t.cin, t.cout);
    correlate<Real>(t, grad_output.data(), flipped.data(), nullptr, grads.input.data(), batched);
  }
  return grads;
}

template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& input, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        NormMode mode, BatchNormStats<Real>& stats, Real momentum, Real eps_bn,
                        BatchNormCache<Real>* cache) {
  require_rank(input, 3, "batch_norm input");
  const std::size_t channels = input.dim(2);
  const std::size_t count = input.dim(0) * input.dim(1);
  if (count == 0) throw Error(errc::kShape, "batch_norm: zero-size spatial extent " + shape_string(input.shape()));
  if (!(eps_bn > Real(0))) throw Error(errc::kDomain, "batch_norm: eps_bn must be positive");
  require_shape(gamma, Shape{channels}, "batch_norm gamma");
  require_shape(beta, Shape{channels}, "batch_norm beta");
  if (stats.running_mean.size() != channels || stats.running_var.size() != channels) {
    throw Error(errc::kShape, "batch_norm: running statistics sized for " +
                                  std::to_string(stats.running_mean.size()) + " channels, input has " +
                                  std::to_string(channels));
  }

  std::vector<Real> mean(channels);
  std::vector<Real> inv_std(channels);
  if (mode == NormMode::kTrain) {
    std::vector<double> sum(channels, 0.0);
    for (std::size_t p = 0; p < count; ++p) {
      for (std::size_t c = 0; c < channels; ++c) sum[c] += input[p * channels + c];
    }
    std::vector<double> sq(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) sum[c] /= static_cast<double>(count);
    for (std::size_t p = 0; p < count; ++p) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = input[p * channels + c] - sum[c];
        sq[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < channels; ++c) {
      const double var = sq[c] / static_cast<double>(count);
      const double unbiased = count > 1 ? sq[c] / static_cast<double>(count - 1) : var;
      mean[c] = static_cast<Real>(sum[c]);
      inv_std[c] = static_cast<Real>(1.0 / std::sqrt(var + static_cast<double>(eps_bn)));
      stats.running_mean[c] = (Real(1) - momentum) * stats.running_mean[c] + momentum * mean[c];
      stats.running_var[c] = (Real(1) - momentum) * stats.running_var[c] + momentum * static_cast<Real>(unbiased);
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = stats.running_mean[c];
      inv_std[c] = Real(1) / std::sqrt(stats.running_var[c] + eps_bn);
    }
  }

  Tensor<Real> normalized(input.shape());
  Tensor<Real> out(input.shape());
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      normalized[i] = (input[i] - mean[c]) * inv_std[c];
      out[i] = gamma[c] * normalized[i] + beta[c];
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return out;
}

template <typename Real>
BatchNormGrads<Real> batch_norm_backward(const BatchNormCache<Real>& cache, const Tensor<Real>& gamma,
                                         const Tensor<Real>& grad_output) {
  const Tensor<Real>& xhat = cache.normalized;
  require_shape(grad_output, xhat.shape(), "batch_norm grad_output");
  const std::size_t channels = xhat.dim(2);
  const std::size_t count = xhat.dim(0) * xhat.dim(1);

  BatchNormGrads<Real> grads{Tensor<Real>(xhat.shape()), Tensor<Real>(Shape{channels}),
                             Tensor<Real>(Shape{channels})};
  std::vector<double> sum_g(channels, 0.0);
  std::vector<double> sum_gx(channels, 0.0);
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      sum_g[c] += grad_output[i];
      sum_gx[c] += static_cast<double>(grad_output[i]) * xhat[i];
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    grads.beta[c] = static_cast<Real>(sum_g[c]);
    grads.gamma[c] = static_cast<Real>(sum_gx[c]);
  }

  const double n = static_cast<double>(count);
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      const double scale = static_cast<double>(gamma[c]) * cache.inv_std[c];
      if (cache.mode == NormMode::kTrain) {
        grads.input[i] = static_cast<Real>(
            scale * (grad_output[i] - sum_g[c] / n - xhat[i] * sum_gx[c] / n));
      } else {
        grads.input[i] = static_cast<Real>(scale * grad_output[i]);
      }
    }
  }
  return grads;
}

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x) {
  Tensor<Real> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > Real(0) ? x[i] : Real(0);
  return out;
}

template <typename Real>
Tensor<Real> relu_backward(const Tensor<Real>& input, const Tensor<Real>& grad_output) {
  require_shape(grad_output, input.shape(), "relu grad_output");
  Tensor<Real> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > Real(0) ? grad_output[i] : Real(0);
  return out;
}

template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& x) {
  constexpr Real kLow = std::numeric_limits<Real>::min();
  const Real kHigh = std::nextafter(Real(1), Real(0));
  Tensor<Real> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real v = x[i];
    Real s;
    if (v >= Real(0)) {
      s = Real(1) / (Real(1) + std::exp(-v));
    } else {
      const Real e = std::exp(v);
      s = e / (Real(1) + e);
    }
    // Saturation would otherwise round to exactly 0 or 1.
    out[i] = std::clamp(s, kLow, kHigh);
  }
  return out;
}

template <typename Real>
Tensor<Real> sigmoid_backward(const Tensor<Real>& output, const Tensor<Real>& grad_output) {
  require_shape(grad_output, output.shape(), "sigmoid grad_output");
  Tensor<Real> out(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    out[i] = grad_output[i] * output[i] * (Real(1) - output[i]);
  }
  return out;
}

#define ACF_INSTANTIATE_OPS(Real)                                                                        \
  template Tensor<Real> conv2d(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&,            \
                               std::size_t);                                                             \
  template Conv2dGrads<Real> conv2d_backward(const Tensor<Real>&, const Tensor<Real>&,                   \
                                             const Tensor<Real>&, std::size_t, bool);                    \
  template Tensor<Real> batch_norm(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&,        \
                                   NormMode, BatchNormStats<Real>&, Real, Real, BatchNormCache<Real>*);  \
  template BatchNormGrads<Real> batch_norm_backward(const BatchNormCache<Real>&, const Tensor<Real>&,    \
                                                    const Tensor<Real>&);                                \
  template Tensor<Real> relu(const Tensor<Real>&);                                                       \
  template Tensor<Real> relu_backward(const Tensor<Real>&, const Tensor<Real>&);                         \
  template Tensor<Real> sigmoid(const Tensor<Real>&);                                                    \
  template Tensor<Real> sigmoid_backward(const Tensor<Real>&, const Tensor<Real>&);

ACF_INSTANTIATE_OPS(float)
ACF_INSTANTIATE_OPS(double)

}  // namespace acf
