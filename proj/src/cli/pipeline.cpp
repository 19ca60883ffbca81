#include "acf/cli/pipeline.hpp"

#include <cmath>

#include "acf/error.hpp"
#include "acf/log.hpp"
#include "acf/report.hpp"

namespace acf {

std::string to_string(OccSource source) {
  switch (source) {
    case OccSource::kGroundTruth:
      return "gt";
    case OccSource::kStored:
      return "stored";
    case OccSource::kModel:
      return "model";
  }
  return "?";
}

OccSource parse_occ_source(const std::string& text) {
  if (text == "gt") return OccSource::kGroundTruth;
  if (text == "stored") return OccSource::kStored;
  if (text == "model") return OccSource::kModel;
  throw Error(errc::kUsage, "unknown occlusion source '" + text + "' (expected gt, stored or model)");
}

OcclusionSplit sample_split(const StereoSample& sample, OccSource source, double threshold,
                            const Tensor<double>* pred_left, const Tensor<double>* pred_right) {
  const Mask& valid = sample.valid;
  switch (source) {
    case OccSource::kGroundTruth:
      if (!sample.dgt_right.empty()) return occlusion_split(sample.dgt, sample.dgt_right, threshold, &valid);
      log_warning("no right-view ground truth; using the stored occlusion mask");
      [[fallthrough]];
    case OccSource::kStored: {
      const Mask occ = valid & sample.occluded;
      return OcclusionSplit{occ, valid.minus(occ)};
    }
    case OccSource::kModel:
      if (!pred_left || !pred_right) {
        throw Error(errc::kUsage, "model-based occlusion split needs left and right predictions");
      }
      return occlusion_split(*pred_left, *pred_right, threshold, &valid);
  }
  throw Error(errc::kUsage, "unknown occlusion source");
}

std::vector<MetricReport> evaluate_dataset(const std::vector<StereoSample>& samples,
                                           const std::vector<Tensor<double>>& disparities,
                                           const std::vector<Split>& splits, OccSource source, double threshold,
                                           const std::vector<Tensor<double>>* right_disparities) {
  if (disparities.size() != samples.size()) {
    throw Error(errc::kShape, std::to_string(disparities.size()) + " predictions for " +
                                  std::to_string(samples.size()) + " samples");
  }
  if (source == OccSource::kModel && (!right_disparities || right_disparities->size() != samples.size())) {
    throw Error(errc::kUsage, "model-based occlusion split needs a right-view prediction per sample");
  }
  std::vector<MetricAccumulator> acc;
  for (const Split s : splits) acc.emplace_back(s);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const StereoSample& s = samples[i];
    const OcclusionSplit split =
        sample_split(s, source, threshold, &disparities[i],
                     source == OccSource::kModel ? &(*right_disparities)[i] : nullptr);
    for (std::size_t k = 0; k < splits.size(); ++k) {
      const Mask& mask = splits[k] == Split::kAll ? s.valid : splits[k] == Split::kOcc ? split.occ : split.noc;
      acc[k].add(disparities[i], s.dgt, mask);
    }
  }
  std::vector<MetricReport> reports;
  for (const MetricAccumulator& a : acc) reports.push_back(a.report());
  return reports;
}

SparsificationCurve sparsify_dataset(const std::vector<StereoSample>& samples,
                                     const std::vector<Tensor<double>>& disparities,
                                     const std::vector<Tensor<double>>& variances,
                                     const std::vector<double>& fractions, std::uint64_t seed) {
  if (disparities.size() != samples.size() || variances.size() != samples.size()) {
    throw Error(errc::kShape, "sparsification needs one prediction and one variance map per sample");
  }
  std::vector<double> uncertainty;
  std::vector<double> error;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const StereoSample& s = samples[i];
    require_shape(disparities[i], s.dgt.shape(), "predicted disparity");
    require_shape(variances[i], s.dgt.shape(), "variance map");
    for (std::size_t p = 0; p < s.valid.size(); ++p) {
      if (!s.valid[p]) continue;
      uncertainty.push_back(variances[i][p]);
      error.push_back(std::abs(disparities[i][p] - s.dgt[p]));
    }
  }
  return sparsification(uncertainty, error, fractions, seed);
}

double fraction_within(const std::vector<StereoSample>& samples, const std::vector<Tensor<double>>& disparities,
                       const std::vector<Mask>& masks, double tolerance) {
  std::size_t hit = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t p = 0; p < masks[i].size(); ++p) {
      if (!masks[i][p]) continue;
      ++total;
      if (std::abs(disparities[i][p] - samples[i].dgt[p]) <= tolerance) ++hit;
    }
  }
  if (total == 0) throw Error(errc::kDomain, "no pixels to score");
  return static_cast<double>(hit) / static_cast<double>(total);
}

std::string loss_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,L_SF,L_reg,L_conf,total,val_epe\n";
  for (const EpochLog& e : log) {
    out += std::to_string(e.epoch) + "," + format_fixed6(e.loss.stereo_focal) + "," +
           format_fixed6(e.loss.regression) + "," + format_fixed6(e.loss.confidence) + "," +
           format_fixed6(e.loss.total) + "," + format_fixed6(e.val_epe) + "\n";
  }
  return out;
}

}  // namespace acf
