#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "wsct/grid.hpp"
#include "wsct/heatmap.hpp"
#include "wsct/nn/graph.hpp"
#include "wsct/nn/params.hpp"

namespace wsct {

// Channel widths of the co-detection network.
struct CoDetectArch {
  int encoder1 = 8;   // full resolution, first input-encoder block
  int encoder2 = 16;  // half resolution, second block
  int base = 16;      // common network; doubles per level
  int decoder2 = 16;  // half-resolution output-decoder block
  int decoder1 = 8;   // full-resolution output-decoder block
};

// Two weight-shared input-encoders feeding a three-level common U-Net, and two
// output-decoders (one per frame) with skip connections from the matching
// input-encoder. Hidden units are rectifiers; outputs are logistic.
template <typename T>
class CoDetectNetT {
 public:
  static constexpr int kDownsample = 16;

  struct Nodes {
    nn::NodeId input_t = -1;
    nn::NodeId input_t1 = -1;
    nn::NodeId features_t = -1;  // input-encoder outputs
    nn::NodeId features_t1 = -1;
    nn::NodeId output_t = -1;
    nn::NodeId output_t1 = -1;
  };

  explicit CoDetectNetT(const CoDetectArch& arch = {}, std::uint64_t seed = 0);

  // Records the full forward pass of (I_t, I_t1) on `graph`.
  Nodes build(nn::Graph<T>& graph, nn::Tensor<T> image_t, nn::Tensor<T> image_t1) const;

  // Input-encoder alone; returns {full-res skip, half-res skip, encoded}.
  std::array<nn::NodeId, 3> encode(nn::Graph<T>& graph, nn::NodeId image) const;

  const CoDetectArch& arch() const { return arch_; }
  nn::ParamStore<T>& params() { return params_; }
  const nn::ParamStore<T>& params() const { return params_; }

 private:
  nn::NodeId decode(nn::Graph<T>& graph, nn::NodeId common, const std::array<nn::NodeId, 3>& skips,
                    const std::array<nn::ConvLayer, 3>& layers) const;

  CoDetectArch arch_;
  nn::ParamStore<T> params_;
  nn::ConvLayer enc1_, enc2_;
  nn::ConvLayer com1_, com2_, com3_, com_up2_, com_up1_;
  std::array<nn::ConvLayer, 3> dec_t_, dec_t1_;
};

extern template class CoDetectNetT<float>;
extern template class CoDetectNetT<double>;

using CoDetectParams = CoDetectNetT<float>;

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 40;
  int batch_size = 4;
  std::uint64_t seed = 0;
  double sigma = 6.0;
  bool augment = true;

  void validate() const;  // throws ConfigError
};

struct TrainReport {
  double initial_loss = 0.0;  // dataset average before the first step
  double final_loss = 0.0;    // dataset average after the last step
  std::vector<double> epoch_losses;
};

// One training pair with its point labels.
struct CoDetectSample {
  Image image_t;
  Image image_t1;
  std::vector<Point2> points_t;
  std::vector<Point2> points_t1;
};

nn::Tensor<float> to_tensor(const Image& image);
Image to_image(const nn::Tensor<float>& tensor, int channel = 0);

// Throws InputError on shape mismatch or size not divisible by 16.
std::pair<LikelihoodMap, LikelihoodMap> codetect_forward(const CoDetectParams& params,
                                                         const Image& image_t,
                                                         const Image& image_t1);

// MSE(L_t - Lhat_t) + MSE(L_t1 - Lhat_t1), each averaged over pixels.
double codetect_loss(const Image& l_t, const Image& l_t1, const Image& lhat_t,
                     const Image& lhat_t1);

// Throws TrainingError on an empty dataset or a non-finite loss.
CoDetectParams train_codetect(const std::vector<CoDetectSample>& dataset, const TrainConfig& cfg,
                              const CoDetectArch& arch = {}, TrainReport* report = nullptr);

// Local maxima (3x3) strictly above `peak_threshold`, strongest first, with
// weaker peaks closer than `min_distance` to a kept one suppressed.
std::vector<Point2> detect_peaks(const Image& map, double peak_threshold, double min_distance);

nn::Checkpoint codetect_checkpoint(const CoDetectParams& params);
CoDetectParams codetect_from_checkpoint(const nn::Checkpoint& ckpt);

}  // namespace wsct
