#ifndef ACF_MODEL_TRAINER_HPP_
#define ACF_MODEL_TRAINER_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include "acf/data/stereo_sample.hpp"
#include "acf/model/checkpoint.hpp"
#include "acf/model/config.hpp"
#include "acf/supervision.hpp"

namespace acf {

struct EpochLog {
  std::size_t epoch = 0;       // 1-based
  LossBreakdown loss;          // mean over the epoch's samples
  double val_epe = 0.0;        // validation EPE, or the running training EPE without a validation set
  double mean_confidence = 0.0;  // mean f over valid training pixels (adaptive mode)
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/**
 * RMSprop over seeded shuffled mini-batches for cfg.epochs epochs.
 *
 * Pixels are supervised only where the sample is valid and its disparity lies
 * in [0, max_disp - 1]. Deterministic for a given config and dataset. Throws
 * Error(training) naming the batch on a non-finite loss or gradient.
 */
TrainResult train(const std::vector<StereoSample>& dataset, const ModelConfig& cfg,
                  const std::vector<StereoSample>& validation = {}, const EpochCallback& on_epoch = {});

// Valid pixels whose disparity also fits the configured range.
Mask supervised_mask(const StereoSample& sample, std::size_t max_disp);

}  // namespace acf

#endif  // ACF_MODEL_TRAINER_HPP_
