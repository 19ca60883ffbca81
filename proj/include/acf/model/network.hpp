#ifndef ACF_MODEL_NETWORK_HPP_
#define ACF_MODEL_NETWORK_HPP_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "acf/cost_volume.hpp"
#include "acf/mask.hpp"
#include "acf/model/config.hpp"
#include "acf/numerics/ops.hpp"
#include "acf/numerics/optimizer.hpp"
#include "acf/numerics/rng.hpp"
#include "acf/supervision.hpp"

namespace acf {

// Trainable tensor; the gradient accumulates in value.grad().
template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  OptimizerState<Real> state;
};

template <typename Real>
struct ConvLayer {
  Parameter<Real> kernel;  // k x k x Cin x Cout
  Parameter<Real> bias;    // Cout

  ConvLayer() = default;
  // Kaiming fan-in normal kernel, zero bias.
  ConvLayer(const std::string& name, std::size_t k, std::size_t cin, std::size_t cout, Rng& rng);

  std::size_t padding() const { return (kernel.value.dim(0) - 1) / 2; }
  Tensor<Real> forward(const Tensor<Real>& input) const;
  // Adds parameter gradients; returns dL/dinput when requested (else empty).
  Tensor<Real> backward(const Tensor<Real>& input, const Tensor<Real>& grad_output, bool need_input);
};

/// Siamese feature tower: 3x3 conv layers at full resolution, ReLU between
/// layers and none after the last, so features may be signed.
template <typename Real>
class FeatureExtractor {
 public:
  struct Cache {
    std::vector<Tensor<Real>> inputs;  // input of each conv
    std::vector<Tensor<Real>> pre;     // output of each conv before ReLU
  };

  FeatureExtractor() = default;
  FeatureExtractor(const std::vector<std::size_t>& channels, Rng& rng);

  Tensor<Real> forward(const Tensor<Real>& image, Cache* cache) const;
  void backward(const Cache& cache, const Tensor<Real>& grad_features);

  std::size_t out_channels() const { return layers_.back().kernel.value.dim(3); }
  std::vector<ConvLayer<Real>>& layers() { return layers_; }
  const std::vector<ConvLayer<Real>>& layers() const { return layers_; }

 private:
  std::vector<ConvLayer<Real>> layers_;
};

/// Cost aggregation applied independently to every disparity slice with
/// shared 2D weights. Each block is conv3x3 -> ReLU -> conv3x3; on a cost
/// volume input the block is residual (output = input + branch). For the
/// concatenated-feature input the first block maps 2C channels to one cost.
/// Every block output has its out-of-frame slices refilled.
template <typename Real>
class CostAggregator {
 public:
  struct BlockCache {
    Tensor<Real> input;   // H x W x Cin x D
    Tensor<Real> hidden;  // conv_a output before ReLU
    Tensor<Real> active;  // after ReLU
    Tensor<Real> output;  // H x W x D, filled
  };
  struct Cache {
    std::vector<BlockCache> blocks;
  };

  CostAggregator() = default;
  CostAggregator(std::size_t blocks, std::size_t hidden, std::size_t first_in_channels, bool first_residual,
                 Rng& rng);

  // `input` is H x W x D (cost volume) or H x W x 2C x D (concat volume).
  // Returns every block's H x W x D output.
  std::vector<Tensor<Real>> forward(const Tensor<Real>& input, Cache* cache) const;

  // `grad_outputs[b]` is dL/d(output b), possibly empty for zero. Returns
  // dL/dinput shaped like the forward input.
  Tensor<Real> backward(const Cache& cache, std::vector<Tensor<Real>> grad_outputs);

  // Zeroes every residual branch's output conv so residual blocks are identities.
  void set_identity();

  std::size_t blocks() const { return conv_a_.size(); }
  std::vector<ConvLayer<Real>>& conv_a() { return conv_a_; }
  std::vector<ConvLayer<Real>>& conv_b() { return conv_b_; }

 private:
  std::vector<ConvLayer<Real>> conv_a_;
  std::vector<ConvLayer<Real>> conv_b_;
  bool first_residual_ = true;
};

/// Confidence head over a cost volume seen as a D-channel image:
/// conv3x3 -> batch norm -> ReLU -> conv1x1 -> sigmoid.
template <typename Real>
class ConfidenceNet {
 public:
  struct Cache {
    Tensor<Real> input;
    Tensor<Real> conv_out;
    BatchNormCache<Real> bn;
    Tensor<Real> bn_out;
    Tensor<Real> active;
    Tensor<Real> f;  // H x W x 1
  };

  ConfidenceNet() = default;
  ConfidenceNet(std::size_t max_disp, std::size_t hidden, double bn_momentum, double bn_eps, Rng& rng);

  ConfidenceMap<Real> forward(const Tensor<Real>& costs, NormMode mode, Cache* cache);
  // Adds parameter gradients; returns dL/dcosts.
  Tensor<Real> backward(const Cache& cache, const Tensor<Real>& grad_f);

  ConvLayer<Real>& conv3() { return conv3_; }
  ConvLayer<Real>& conv1() { return conv1_; }
  Parameter<Real>& gamma() { return gamma_; }
  Parameter<Real>& beta() { return beta_; }
  BatchNormStats<Real>& stats() { return stats_; }

 private:
  ConvLayer<Real> conv3_;
  Parameter<Real> gamma_;
  Parameter<Real> beta_;
  BatchNormStats<Real> stats_;
  ConvLayer<Real> conv1_;
  Real momentum_ = Real(0.1);
  Real eps_bn_ = Real(1e-5);
};

template <typename Real>
struct NetworkOutput {
  CostVolume<Real> costs;  // final aggregated volume
  ProbabilityVolume<Real> probs;
  DisparityMap<Real> disparity;
  ConfidenceMap<Real> confidence;
  VarianceMap<Real> variance;
};

// Per-sample diagnostics gathered during a training step.
struct SampleStats {
  double epe = 0.0;              // final output, valid pixels
  double mean_confidence = 0.0;  // valid pixels; 0 unless adaptive
  std::size_t valid_pixels = 0;
};

/**
 * The full differentiable pipeline: shared feature tower, cost volume,
 * aggregation, confidence head, soft argmin, and the three-part loss.
 */
template <typename Real>
class Network {
 public:
  explicit Network(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  // Inference. Eval mode reads the batch-norm running statistics.
  NetworkOutput<Real> forward(const Tensor<Real>& left, const Tensor<Real>& right, NormMode mode = NormMode::kEval);

  /**
   * Training forward + backward for one sample. Adds grad_scale * dL/dθ to
   * every parameter gradient buffer and returns the unscaled loss terms.
   * Valid pixels must carry dgt in [0, D-1].
   */
  LossBreakdown accumulate_gradients(const Tensor<Real>& left, const Tensor<Real>& right,
                                     const DisparityMap<Real>& dgt, const Mask& valid, double grad_scale,
                                     SampleStats* stats = nullptr);

  std::vector<Parameter<Real>*> parameters();
  std::vector<const Parameter<Real>*> parameters() const;
  // Non-trainable state (batch-norm running statistics) by name.
  std::vector<std::pair<std::string, std::vector<Real>*>> buffers();
  void zero_grad();

  FeatureExtractor<Real>& features() { return features_; }
  CostAggregator<Real>& aggregator() { return aggregator_; }
  ConfidenceNet<Real>& cenet() { return cenet_; }

 private:
  ModelConfig cfg_;
  FeatureExtractor<Real> features_;
  CostAggregator<Real> aggregator_;
  ConfidenceNet<Real> cenet_;
};

}  // namespace acf

#endif  // ACF_MODEL_NETWORK_HPP_
