#include "acf/model/predictor.hpp"

namespace acf {
namespace {

template <typename Real>
Prediction run(Network<Real>& net, const Tensor<double>& left, const Tensor<double>& right) {
  const NetworkOutput<Real> out = net.forward(left.cast<Real>(), right.cast<Real>(), NormMode::kEval);
  return Prediction{out.costs.costs.template cast<double>(), out.probs.probs.template cast<double>(),
                    out.disparity.disparity.template cast<double>(), out.confidence.f.template cast<double>(),
                    out.variance.sigma.template cast<double>()};
}

template <typename Real>
std::unique_ptr<Network<Real>> build(const Checkpoint& ckpt) {
  auto net = std::make_unique<Network<Real>>(ckpt.config);
  restore_checkpoint(*net, ckpt);
  return net;
}

}  // namespace

StereoModel::StereoModel(const Checkpoint& ckpt) : config_(ckpt.config) {
  if (config_.precision == Precision::kFloat64) net_ = build<double>(ckpt);
  else net_ = build<float>(ckpt);
}

StereoModel StereoModel::load(const std::filesystem::path& path) { return StereoModel(load_checkpoint(path)); }

Prediction StereoModel::predict(const Tensor<double>& left, const Tensor<double>& right) {
  return std::visit([&](auto& net) { return run(*net, left, right); }, net_);
}

Tensor<double> StereoModel::predict_right_view(const Tensor<double>& left, const Tensor<double>& right) {
  const Prediction p = predict(mirror_horizontal(right), mirror_horizontal(left));
  return mirror_horizontal(p.disparity);
}

Tensor<double> mirror_horizontal(const Tensor<double>& t) {
  if (t.rank() != 2 && t.rank() != 3) throw Error(errc::kShape, "mirror_horizontal: expected H x W (x C)");
  const std::size_t H = t.dim(0), W = t.dim(1), C = t.rank() == 3 ? t.dim(2) : 1;
  Tensor<double> out(t.shape());
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) out[(y * W + (W - 1 - x)) * C + c] = t[(y * W + x) * C + c];
    }
  }
  return out;
}

}  // namespace acf
