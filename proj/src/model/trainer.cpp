#include "acf/model/trainer.hpp"

#include <cmath>
#include <numeric>

#include "acf/numerics/rng.hpp"

namespace acf {
namespace {

template <typename Real>
struct PreparedSample {
  Tensor<Real> left;
  Tensor<Real> right;
  DisparityMap<Real> dgt;
  Mask valid;
};

template <typename Real>
std::vector<PreparedSample<Real>> prepare(const std::vector<StereoSample>& samples, std::size_t max_disp) {
  std::vector<PreparedSample<Real>> out;
  out.reserve(samples.size());
  for (const StereoSample& s : samples) {
    Mask valid = supervised_mask(s, max_disp);
    Tensor<Real> dgt = s.dgt.cast<Real>();
    // Unsupervised pixels may hold any value; keep them finite and in range.
    for (std::size_t p = 0; p < dgt.size(); ++p) {
      if (!valid[p]) dgt[p] = Real(0);
    }
    out.push_back({s.left.cast<Real>(), s.right.cast<Real>(), DisparityMap<Real>{std::move(dgt)}, std::move(valid)});
  }
  return out;
}

template <typename Real>
double validation_epe(Network<Real>& net, const std::vector<PreparedSample<Real>>& samples) {
  double err = 0.0;
  std::size_t count = 0;
  for (const PreparedSample<Real>& s : samples) {
    const NetworkOutput<Real> out = net.forward(s.left, s.right, NormMode::kEval);
    for (std::size_t p = 0; p < s.valid.size(); ++p) {
      if (!s.valid[p]) continue;
      err += std::abs(static_cast<double>(out.disparity.disparity[p]) - s.dgt.disparity[p]);
      ++count;
    }
  }
  return count ? err / static_cast<double>(count) : 0.0;
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.stereo_focal) && std::isfinite(l.regression) && std::isfinite(l.confidence) &&
         std::isfinite(l.total);
}

template <typename Real>
TrainResult train_impl(const std::vector<StereoSample>& dataset, const ModelConfig& cfg,
                       const std::vector<StereoSample>& validation, const EpochCallback& on_epoch) {
  Network<Real> net(cfg);
  const std::vector<PreparedSample<Real>> train_set = prepare<Real>(dataset, cfg.max_disp);
  const std::vector<PreparedSample<Real>> val_set = prepare<Real>(validation, cfg.max_disp);
  const RmsPropSettings rms{cfg.lr, cfg.decay, cfg.eps_opt};
  // Shuffling draws from its own stream so it is independent of initialization.
  Rng order_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t batch_index = 0;

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    LossBreakdown sum;
    double err_sum = 0.0, conf_sum = 0.0;
    std::size_t pixel_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      net.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const PreparedSample<Real>& s = train_set[order[i]];
        SampleStats stats;
        const LossBreakdown parts = net.accumulate_gradients(s.left, s.right, s.dgt, s.valid, scale, &stats);
        if (!finite(parts)) {
          throw Error(errc::kTraining, "non-finite loss in batch " + std::to_string(batch_index) + " (epoch " +
                                           std::to_string(epoch) + ")");
        }
        sum.stereo_focal += parts.stereo_focal;
        sum.regression += parts.regression;
        sum.confidence += parts.confidence;
        sum.total += parts.total;
        err_sum += stats.epe * static_cast<double>(stats.valid_pixels);
        conf_sum += stats.mean_confidence * static_cast<double>(stats.valid_pixels);
        pixel_sum += stats.valid_pixels;
      }
      for (Parameter<Real>* p : net.parameters()) {
        try {
          rmsprop_step(p->value, p->state, rms);
        } catch (const Error& e) {
          throw Error(errc::kTraining, std::string(e.what()) + " for '" + p->name + "' in batch " +
                                           std::to_string(batch_index));
        }
      }
    }
    const double n = train_set.empty() ? 1.0 : static_cast<double>(train_set.size());
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = LossBreakdown{sum.stereo_focal / n, sum.regression / n, sum.confidence / n, sum.total / n};
    const double pixels = pixel_sum ? static_cast<double>(pixel_sum) : 1.0;
    entry.mean_confidence = conf_sum / pixels;
    entry.val_epe = val_set.empty() ? err_sum / pixels : validation_epe(net, val_set);
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.checkpoint = make_checkpoint(net, cfg.epochs);
  return result;
}

}  // namespace

Mask supervised_mask(const StereoSample& sample, std::size_t max_disp) {
  Mask out = sample.valid;
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double d = sample.dgt[p];
    if (!(d >= 0.0 && d <= static_cast<double>(max_disp - 1))) out.set(p, false);
  }
  return out;
}

TrainResult train(const std::vector<StereoSample>& dataset, const ModelConfig& cfg,
                  const std::vector<StereoSample>& validation, const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.empty()) throw Error(errc::kTraining, "training needs a non-empty dataset");
  if (cfg.precision == Precision::kFloat64) return train_impl<double>(dataset, cfg, validation, on_epoch);
  return train_impl<float>(dataset, cfg, validation, on_epoch);
}

}  // namespace acf
