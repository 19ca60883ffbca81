#ifndef ACF_MODEL_PREDICTOR_HPP_
#define ACF_MODEL_PREDICTOR_HPP_

#include <filesystem>
#include <memory>
#include <variant>

#include "acf/model/checkpoint.hpp"
#include "acf/model/network.hpp"

namespace acf {

// Inference outputs, converted to float64.
struct Prediction {
  Tensor<double> costs;       // H x W x D final cost volume
  Tensor<double> probs;       // H x W x D
  Tensor<double> disparity;   // H x W
  Tensor<double> confidence;  // H x W
  Tensor<double> variance;    // H x W
};

// A trained network at the precision recorded in its config.
class StereoModel {
 public:
  explicit StereoModel(const Checkpoint& ckpt);
  static StereoModel load(const std::filesystem::path& path);

  const ModelConfig& config() const { return config_; }

  // Eval-mode forward pass.
  Prediction predict(const Tensor<double>& left, const Tensor<double>& right);

  // Right-view disparity estimated by running the left-view network on the
  // horizontally mirrored, swapped pair. An approximation: the network never
  // saw mirrored pairs during training.
  Tensor<double> predict_right_view(const Tensor<double>& left, const Tensor<double>& right);

 private:
  ModelConfig config_;
  std::variant<std::unique_ptr<Network<float>>, std::unique_ptr<Network<double>>> net_;
};

// Flips an H x W (x C) tensor left-right.
Tensor<double> mirror_horizontal(const Tensor<double>& t);

}  // namespace acf

#endif  // ACF_MODEL_PREDICTOR_HPP_
