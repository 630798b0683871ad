#pragma once

#include <cstdint>
#include <vector>

#include "wsct/codetect.hpp"
#include "wsct/pseudo.hpp"
#include "wsct/tracks.hpp"

namespace wsct {

struct TrackArch {
  int width = 8;  // first level; doubles per level, four levels
  double motion_scale = 30.0;  // decodes the motion channels back to pixels
};

// U-Net over the stacked pair (I_t, I_t1) with a logistic position head and
// a bounded (tanh) two-channel motion head.
template <typename T>
class TrackNetT {
 public:
  static constexpr int kDownsample = 8;

  struct Nodes {
    nn::NodeId input = -1;
    nn::NodeId position = -1;
    nn::NodeId motion = -1;  // channel 0: x, channel 1: y
  };

  explicit TrackNetT(const TrackArch& arch = {}, std::uint64_t seed = 0);

  Nodes build(nn::Graph<T>& graph, const Image& image_t, const Image& image_t1) const;

  const TrackArch& arch() const { return arch_; }
  nn::ParamStore<T>& params() { return params_; }
  const nn::ParamStore<T>& params() const { return params_; }

 private:
  TrackArch arch_;
  nn::ParamStore<T> params_;
  nn::ConvLayer down1_, down2_, down3_, bottleneck_, up3_, up2_, up1_, position_head_, motion_head_;
};

extern template class TrackNetT<float>;
extern template class TrackNetT<double>;

using TrackParams = TrackNetT<float>;

struct TrackTrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
};

// Uses learning_rate, epochs, batch_size, seed and augment from `cfg`.
// Throws TrainingError on an empty set or a non-finite loss.
TrackParams train_tracknet(const std::vector<PseudoSample>& samples, const TrainConfig& cfg,
                           const TrackArch& arch = {}, TrackTrainReport* report = nullptr);

MotionPositionMap tracknet_forward(const TrackParams& params, const Image& image_t,
                                   const Image& image_t1);

// Average masked loss over a sample set.
double tracknet_loss(const TrackParams& params, const std::vector<PseudoSample>& samples);

struct PairDetection {
  Point2 position_t1;
  Point2 predicted_t;  // where the cell sat in frame t
};

// Position-channel peaks at t+1, each with the displacement averaged over
// its 3x3 neighborhood and scaled back to pixels.
std::vector<PairDetection> infer_pair(const TrackParams& params, const Image& image_t,
                                      const Image& image_t1, double peak_threshold,
                                      double min_distance);

// pairwise[t] holds the detections of frame t+1 from pair (t, t+1); `initial`
// holds frame 0. Greedy gated one-to-one linking on predicted positions; a
// detection left over whose nearest gated track was already continued splits
// that track into two children.
TrackSet link_tracks(const std::vector<Point2>& initial,
                     const std::vector<std::vector<PairDetection>>& pairwise, double gate_radius);

// Runs infer_pair over consecutive frames (frame 0 from the pair (I_0, I_0))
// and links the result.
TrackSet track_sequence(const TrackParams& params, const std::vector<Image>& frames,
                        double peak_threshold, double min_distance, double gate_radius);

nn::Checkpoint tracknet_checkpoint(const TrackParams& params);
TrackParams tracknet_from_checkpoint(const nn::Checkpoint& ckpt);

}  // namespace wsct
