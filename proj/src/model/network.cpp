#include "acf/model/network.hpp"

#include <cmath>

namespace acf {
namespace {

template <typename Real>
void add_into(std::span<Real> dst, const Tensor<Real>& src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

template <typename Real>
void add_into(Tensor<Real>& dst, const Tensor<Real>& src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

template <typename Real>
Tensor<Real> scaled(const Tensor<Real>& t, double factor) {
  Tensor<Real> out(t.shape());
  const Real f = static_cast<Real>(factor);
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i] * f;
  return out;
}

template <typename Real>
Parameter<Real> make_parameter(std::string name, Shape shape) {
  Parameter<Real> p{std::move(name), Tensor<Real>(shape), OptimizerState<Real>(shape)};
  p.value.zero_grad();
  return p;
}

}  // namespace

template <typename Real>
ConvLayer<Real>::ConvLayer(const std::string& name, std::size_t k, std::size_t cin, std::size_t cout, Rng& rng)
    : kernel(make_parameter<Real>(name + ".kernel", Shape{k, k, cin, cout})),
      bias(make_parameter<Real>(name + ".bias", Shape{cout})) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(k * k * cin));
  for (std::size_t i = 0; i < kernel.value.size(); ++i) kernel.value[i] = static_cast<Real>(stddev * rng.normal());
}

template <typename Real>
Tensor<Real> ConvLayer<Real>::forward(const Tensor<Real>& input) const {
  return conv2d(input, kernel.value, bias.value, padding());
}

template <typename Real>
Tensor<Real> ConvLayer<Real>::backward(const Tensor<Real>& input, const Tensor<Real>& grad_output, bool need_input) {
  Conv2dGrads<Real> g = conv2d_backward(input, kernel.value, grad_output, padding(), need_input);
  add_into(kernel.value.grad(), g.kernel);
  add_into(bias.value.grad(), g.bias);
  return std::move(g.input);
}

// ---------------------------------------------------------------------------

template <typename Real>
FeatureExtractor<Real>::FeatureExtractor(const std::vector<std::size_t>& channels, Rng& rng) {
  std::size_t cin = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    layers_.emplace_back("feature." + std::to_string(i), 3, cin, channels[i], rng);
    cin = channels[i];
  }
}

template <typename Real>
Tensor<Real> FeatureExtractor<Real>::forward(const Tensor<Real>& image, Cache* cache) const {
  require_rank(image, 3, "feature extractor input");
  if (image.dim(2) != 1) throw Error(errc::kShape, "feature extractor: input must have 1 channel");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Tensor<Real> x = image;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Tensor<Real> z = layers_[i].forward(x);
    const bool last = i + 1 == layers_.size();
    Tensor<Real> next = last ? z : relu(z);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(std::move(z));
    }
    x = std::move(next);
  }
  return x;
}

template <typename Real>
void FeatureExtractor<Real>::backward(const Cache& cache, const Tensor<Real>& grad_features) {
  Tensor<Real> g = grad_features;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 != layers_.size()) g = relu_backward(cache.pre[i], g);
    g = layers_[i].backward(cache.inputs[i], g, i > 0);
  }
}

// ---------------------------------------------------------------------------

template <typename Real>
CostAggregator<Real>::CostAggregator(std::size_t blocks, std::size_t hidden, std::size_t first_in_channels,
                                     bool first_residual, Rng& rng)
    : first_residual_(first_residual) {
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t cin = b == 0 ? first_in_channels : 1;
    const std::string name = "aggregation." + std::to_string(b);
    conv_a_.emplace_back(name + ".a", 3, cin, hidden, rng);
    conv_b_.emplace_back(name + ".b", 3, hidden, 1, rng);
  }
}

template <typename Real>
std::vector<Tensor<Real>> CostAggregator<Real>::forward(const Tensor<Real>& input, Cache* cache) const {
  if (input.rank() != 3 && input.rank() != 4) {
    throw Error(errc::kShape, "aggregation input must be HxWxD or HxWx2CxD, got " + shape_string(input.shape()));
  }
  const std::size_t H = input.dim(0), W = input.dim(1), D = input.rank() == 3 ? input.dim(2) : input.dim(3);
  if (cache) cache->blocks.clear();
  std::vector<Tensor<Real>> outputs;
  for (std::size_t b = 0; b < conv_a_.size(); ++b) {
    Tensor<Real> in4 = b == 0 ? (input.rank() == 3 ? input.reshaped(Shape{H, W, 1, D}) : input)
                              : outputs.back().reshaped(Shape{H, W, 1, D});
    Tensor<Real> hidden = conv_a_[b].forward(in4);
    Tensor<Real> active = relu(hidden);
    Tensor<Real> out = conv_b_[b].forward(active).reshaped(Shape{H, W, D});
    if (b > 0 || first_residual_) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += in4[i];
    }
    fill_out_of_frame(out);
    if (cache) cache->blocks.push_back({std::move(in4), std::move(hidden), std::move(active), out});
    outputs.push_back(std::move(out));
  }
  return outputs;
}

template <typename Real>
Tensor<Real> CostAggregator<Real>::backward(const Cache& cache, std::vector<Tensor<Real>> grad_outputs) {
  grad_outputs.resize(conv_a_.size());
  Tensor<Real> carry;
  for (std::size_t b = conv_a_.size(); b-- > 0;) {
    const BlockCache& bc = cache.blocks[b];
    Tensor<Real> g = std::move(grad_outputs[b]);
    if (g.empty()) g = Tensor<Real>(bc.output.shape());
    if (!carry.empty()) add_into(g, carry);
    g = fill_out_of_frame_backward(bc.output, g);
    const std::size_t H = g.dim(0), W = g.dim(1), D = g.dim(2);
    Tensor<Real> g4 = std::move(g).reshaped(Shape{H, W, 1, D});
    Tensor<Real> ga = conv_b_[b].backward(bc.active, g4, true);
    Tensor<Real> gh = relu_backward(bc.hidden, ga);
    Tensor<Real> gin = conv_a_[b].backward(bc.input, gh, true);
    if (b > 0 || first_residual_) add_into(gin, g4);
    const bool cost_input = b > 0 || first_residual_;
    carry = cost_input ? std::move(gin).reshaped(Shape{H, W, D}) : std::move(gin);
  }
  return carry;
}

template <typename Real>
void CostAggregator<Real>::set_identity() {
  for (std::size_t b = 0; b < conv_b_.size(); ++b) {
    if (b == 0 && !first_residual_) continue;
    conv_b_[b].kernel.value.fill(Real(0));
    conv_b_[b].bias.value.fill(Real(0));
  }
}

// ---------------------------------------------------------------------------

template <typename Real>
ConfidenceNet<Real>::ConfidenceNet(std::size_t max_disp, std::size_t hidden, double bn_momentum, double bn_eps,
                                   Rng& rng)
    : conv3_("cenet.conv3", 3, max_disp, hidden, rng),
      gamma_(make_parameter<Real>("cenet.bn.gamma", Shape{hidden})),
      beta_(make_parameter<Real>("cenet.bn.beta", Shape{hidden})),
      stats_(hidden),
      conv1_("cenet.conv1", 1, hidden, 1, rng),
      momentum_(static_cast<Real>(bn_momentum)),
      eps_bn_(static_cast<Real>(bn_eps)) {
  gamma_.value.fill(Real(1));
}

template <typename Real>
ConfidenceMap<Real> ConfidenceNet<Real>::forward(const Tensor<Real>& costs, NormMode mode, Cache* cache) {
  require_rank(costs, 3, "confidence head input");
  const std::size_t H = costs.dim(0), W = costs.dim(1);
  Tensor<Real> conv_out = conv3_.forward(costs);
  BatchNormCache<Real> bn_cache;
  Tensor<Real> bn_out = batch_norm(conv_out, gamma_.value, beta_.value, mode, stats_, momentum_, eps_bn_,
                                   cache ? &bn_cache : nullptr);
  Tensor<Real> active = relu(bn_out);
  Tensor<Real> f = sigmoid(conv1_.forward(active));
  ConfidenceMap<Real> out{f.reshaped(Shape{H, W})};
  if (cache) {
    cache->input = costs;
    cache->conv_out = std::move(conv_out);
    cache->bn = std::move(bn_cache);
    cache->bn_out = std::move(bn_out);
    cache->active = std::move(active);
    cache->f = std::move(f);
  }
  return out;
}

template <typename Real>
Tensor<Real> ConfidenceNet<Real>::backward(const Cache& cache, const Tensor<Real>& grad_f) {
  const Tensor<Real> g_f = grad_f.reshaped(cache.f.shape());
  Tensor<Real> g = sigmoid_backward(cache.f, g_f);
  g = conv1_.backward(cache.active, g, true);
  g = relu_backward(cache.bn_out, g);
  BatchNormGrads<Real> bn = batch_norm_backward(cache.bn, gamma_.value, g);
  add_into(gamma_.value.grad(), bn.gamma);
  add_into(beta_.value.grad(), bn.beta);
  return conv3_.backward(cache.input, bn.input, true);
}

// ---------------------------------------------------------------------------

template <typename Real>
Network<Real>::Network(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  features_ = FeatureExtractor<Real>(cfg_.feature_channels, rng);
  const bool concat = cfg_.cost_mode == CostMode::kConcatAggregate;
  const std::size_t first_in = concat ? 2 * features_.out_channels() : 1;
  aggregator_ = CostAggregator<Real>(cfg_.aggregation_blocks, cfg_.aggregation_channels, first_in, !concat, rng);
  cenet_ = ConfidenceNet<Real>(cfg_.max_disp, cfg_.cenet_channels, cfg_.bn_momentum, cfg_.bn_eps, rng);
}

namespace {

template <typename Real>
struct VolumeForward {
  Tensor<Real> left_feat;
  Tensor<Real> right_feat;
  CostVolume<Real> raw;         // absolute-difference mode only
  Tensor<Real> aggregation_in;  // what the aggregator saw
  std::vector<Tensor<Real>> outputs;
};

template <typename Real>
VarianceMap<Real> constant_variance(std::size_t H, std::size_t W, double sigma) {
  return VarianceMap<Real>{Tensor<Real>(Shape{H, W}, static_cast<Real>(sigma))};
}

}  // namespace

template <typename Real>
NetworkOutput<Real> Network<Real>::forward(const Tensor<Real>& left, const Tensor<Real>& right, NormMode mode) {
  require_shape(right, left.shape(), "right image");
  const std::size_t H = left.dim(0), W = left.dim(1), D = cfg_.max_disp;
  const Tensor<Real> fl = features_.forward(left, nullptr);
  const Tensor<Real> fr = features_.forward(right, nullptr);
  Tensor<Real> final_costs;
  if (cfg_.cost_mode == CostMode::kAbsoluteDifference) {
    CostVolume<Real> raw = build_cost_volume(fl, fr, D);
    final_costs = aggregator_.blocks() ? aggregator_.forward(raw.costs, nullptr).back() : std::move(raw.costs);
  } else {
    final_costs = aggregator_.forward(build_concat_volume(fl, fr, D), nullptr).back();
  }

  NetworkOutput<Real> out;
  out.costs = CostVolume<Real>{std::move(final_costs), D};
  out.probs = cost_to_probability(out.costs);
  out.disparity = soft_argmin(out.probs);
  out.confidence = cenet_.forward(out.costs.costs, mode, nullptr);
  out.variance = cfg_.mode == TrainingMode::kAdaptive ? confidence_to_variance(out.confidence, cfg_.s, cfg_.eps)
                                                      : constant_variance<Real>(H, W, cfg_.uniform_sigma);
  return out;
}

template <typename Real>
LossBreakdown Network<Real>::accumulate_gradients(const Tensor<Real>& left, const Tensor<Real>& right,
                                                  const DisparityMap<Real>& dgt, const Mask& valid,
                                                  double grad_scale, SampleStats* stats) {
  require_shape(right, left.shape(), "right image");
  const std::size_t H = left.dim(0), W = left.dim(1), D = cfg_.max_disp;
  const bool adaptive = cfg_.mode == TrainingMode::kAdaptive;
  const bool focal = cfg_.mode != TrainingMode::kRegressionOnly;
  const bool concat = cfg_.cost_mode == CostMode::kConcatAggregate;

  typename FeatureExtractor<Real>::Cache left_cache, right_cache;
  typename CostAggregator<Real>::Cache agg_cache;
  typename ConfidenceNet<Real>::Cache cenet_cache;

  // Forward.
  const Tensor<Real> fl = features_.forward(left, &left_cache);
  const Tensor<Real> fr = features_.forward(right, &right_cache);
  CostVolume<Real> raw;
  std::vector<Tensor<Real>> outputs;
  if (!concat) {
    raw = build_cost_volume(fl, fr, D);
    if (aggregator_.blocks()) outputs = aggregator_.forward(raw.costs, &agg_cache);
    else outputs.push_back(raw.costs);
  } else {
    outputs = aggregator_.forward(build_concat_volume(fl, fr, D), &agg_cache);
  }
  const std::size_t n_out = cfg_.num_supervised_outputs;
  const std::size_t first_supervised = outputs.size() - n_out;
  const double per_output = 1.0 / static_cast<double>(n_out);

  ConfidenceMap<Real> confidence;
  VarianceMap<Real> variance;
  if (adaptive) {
    confidence = cenet_.forward(outputs.back(), NormMode::kTrain, &cenet_cache);
    variance = confidence_to_variance(confidence, cfg_.s, cfg_.eps);
  } else {
    variance = constant_variance<Real>(H, W, cfg_.uniform_sigma);
  }

  UnimodalTargetVolume<Real> target;
  if (focal) target = unimodal_target(dgt, variance, D, valid, std::min(cfg_.eps, cfg_.uniform_sigma) * (1.0 - 1e-6));
  const bool target_grad = adaptive && !cfg_.detach_target;

  // Losses on each supervised output, with gradients w.r.t. its costs.
  double sf_sum = 0.0, reg_sum = 0.0;
  std::vector<Tensor<Real>> grad_outputs(outputs.size());
  Tensor<Real> grad_target;
  if (target_grad) grad_target = Tensor<Real>(Shape{H, W, D});
  DisparityMap<Real> final_disparity;
  for (std::size_t k = first_supervised; k < outputs.size(); ++k) {
    const CostVolume<Real> cv{outputs[k], D};
    const ProbabilityVolume<Real> pv = cost_to_probability(cv);
    DisparityMap<Real> dhat = soft_argmin(pv);
    const RegressionLossResult<Real> reg = smooth_l1_regression_loss(dhat, dgt, valid);
    reg_sum += reg.loss;
    const double reg_seed = grad_scale * cfg_.lambda_regression * per_output;
    Tensor<Real> g = cost_to_probability_backward(
        pv, soft_argmin_backward(scaled(reg.grad_disparity, reg_seed), D));
    if (focal) {
      const FocalLossResult<Real> sf = stereo_focal_loss(target, cv, cfg_.alpha, target_grad);
      sf_sum += sf.loss;
      const double sf_seed = grad_scale * per_output;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<Real>(sf_seed) * sf.grad_costs[i];
      if (target_grad) {
        for (std::size_t i = 0; i < grad_target.size(); ++i) {
          grad_target[i] += static_cast<Real>(sf_seed) * sf.grad_target[i];
        }
      }
    }
    grad_outputs[k] = std::move(g);
    if (k + 1 == outputs.size()) final_disparity = std::move(dhat);
  }

  double conf_loss = 0.0;
  if (adaptive) {
    const ConfidenceLossResult<Real> cl = confidence_loss(confidence, valid);
    conf_loss = cl.loss;
    Tensor<Real> grad_f = scaled(cl.grad_confidence, grad_scale * cfg_.lambda_confidence);
    if (target_grad) {
      const Tensor<Real> grad_sigma = unimodal_target_backward(target, dgt, variance, grad_target);
      add_into(grad_f, confidence_to_variance_backward(grad_sigma, cfg_.s));
    }
    const Tensor<Real> grad_costs = cenet_.backward(cenet_cache, grad_f);
    if (grad_outputs.back().empty()) grad_outputs.back() = grad_costs;
    else add_into(grad_outputs.back(), grad_costs);
  }

  // Backward through aggregation, cost volume and the shared feature tower.
  FeatureGrads<Real> feature_grads;
  if (!concat) {
    const Tensor<Real> grad_raw =
        aggregator_.blocks() ? aggregator_.backward(agg_cache, std::move(grad_outputs)) : grad_outputs.back();
    feature_grads = build_cost_volume_backward(fl, fr, raw, grad_raw);
  } else {
    const Tensor<Real> grad_vol = aggregator_.backward(agg_cache, std::move(grad_outputs));
    feature_grads = build_concat_volume_backward(grad_vol, features_.out_channels());
  }
  features_.backward(left_cache, feature_grads.left);
  features_.backward(right_cache, feature_grads.right);

  LossBreakdown parts;
  if (cfg_.mode == TrainingMode::kRegressionOnly) {
    parts = total_loss(0.0, reg_sum * per_output, 0.0, LossWeights{cfg_.lambda_regression, 0.0});
  } else {
    parts = total_loss(sf_sum * per_output, reg_sum * per_output, adaptive ? conf_loss : 0.0,
                       LossWeights{cfg_.lambda_regression, adaptive ? cfg_.lambda_confidence : 0.0});
  }

  if (stats) {
    stats->valid_pixels = valid.count();
    double err = 0.0, conf = 0.0;
    for (std::size_t p = 0; p < valid.size(); ++p) {
      if (!valid[p]) continue;
      err += std::abs(static_cast<double>(final_disparity.disparity[p]) - dgt.disparity[p]);
      if (adaptive) conf += confidence.f[p];
    }
    const double n = stats->valid_pixels ? static_cast<double>(stats->valid_pixels) : 1.0;
    stats->epe = err / n;
    stats->mean_confidence = conf / n;
  }
  return parts;
}

template <typename Real>
std::vector<Parameter<Real>*> Network<Real>::parameters() {
  std::vector<Parameter<Real>*> out;
  for (auto& layer : features_.layers()) {
    out.push_back(&layer.kernel);
    out.push_back(&layer.bias);
  }
  for (std::size_t b = 0; b < aggregator_.blocks(); ++b) {
    out.push_back(&aggregator_.conv_a()[b].kernel);
    out.push_back(&aggregator_.conv_a()[b].bias);
    out.push_back(&aggregator_.conv_b()[b].kernel);
    out.push_back(&aggregator_.conv_b()[b].bias);
  }
  out.push_back(&cenet_.conv3().kernel);
  out.push_back(&cenet_.conv3().bias);
  out.push_back(&cenet_.gamma());
  out.push_back(&cenet_.beta());
  out.push_back(&cenet_.conv1().kernel);
  out.push_back(&cenet_.conv1().bias);
  return out;
}

template <typename Real>
std::vector<const Parameter<Real>*> Network<Real>::parameters() const {
  std::vector<const Parameter<Real>*> out;
  for (Parameter<Real>* p : const_cast<Network*>(this)->parameters()) out.push_back(p);
  return out;
}

template <typename Real>
std::vector<std::pair<std::string, std::vector<Real>*>> Network<Real>::buffers() {
  return {{"cenet.bn.running_mean", &cenet_.stats().running_mean},
          {"cenet.bn.running_var", &cenet_.stats().running_var}};
}

template <typename Real>
void Network<Real>::zero_grad() {
  for (Parameter<Real>* p : parameters()) p->value.zero_grad();
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;
template class FeatureExtractor<float>;
template class FeatureExtractor<double>;
template class CostAggregator<float>;
template class CostAggregator<double>;
template class ConfidenceNet<float>;
template class ConfidenceNet<double>;
template class Network<float>;
template class Network<double>;

}  // namespace acf
