#ifndef ACF_CLI_PIPELINE_HPP_
#define ACF_CLI_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "acf/data/stereo_sample.hpp"
#include "acf/evaluation.hpp"
#include "acf/model/predictor.hpp"
#include "acf/model/trainer.hpp"

namespace acf {

// Where the OCC/NOC split comes from.
enum class OccSource {
  kGroundTruth,  // left-right check on the left and right ground-truth maps
  kStored,       // the dataset's occlusion masks
  kModel,        // left-right check on predicted left and mirrored-pair right maps
};

std::string to_string(OccSource source);
OccSource parse_occ_source(const std::string& text);

/**
 * OCC and NOC masks of one sample, both inside its valid set. Ground truth
 * without a right-view map falls back to the stored mask with a warning.
 * `pred_left` and `pred_right` are needed only for OccSource::kModel.
 */
OcclusionSplit sample_split(const StereoSample& sample, OccSource source, double threshold,
                            const Tensor<double>* pred_left = nullptr, const Tensor<double>* pred_right = nullptr);

// Pixel-pooled metrics over a dataset, one report per requested split.
std::vector<MetricReport> evaluate_dataset(const std::vector<StereoSample>& samples,
                                           const std::vector<Tensor<double>>& disparities,
                                           const std::vector<Split>& splits, OccSource source, double threshold,
                                           const std::vector<Tensor<double>>* right_disparities = nullptr);

// Sparsification over all valid pixels of all samples, pooled.
SparsificationCurve sparsify_dataset(const std::vector<StereoSample>& samples,
                                     const std::vector<Tensor<double>>& disparities,
                                     const std::vector<Tensor<double>>& variances,
                                     const std::vector<double>& fractions, std::uint64_t seed);

// Share of masked pixels with |pred - gt| <= tolerance.
double fraction_within(const std::vector<StereoSample>& samples, const std::vector<Tensor<double>>& disparities,
                       const std::vector<Mask>& masks, double tolerance);

// Columns epoch,L_SF,L_reg,L_conf,total,val_epe.
std::string loss_csv(const std::vector<EpochLog>& log);

}  // namespace acf

#endif  // ACF_CLI_PIPELINE_HPP_
