#pragma once

#include <utility>
#include <vector>

#include "wsct/assignment.hpp"
#include "wsct/codetect.hpp"
#include "wsct/grid.hpp"
#include "wsct/heatmap.hpp"

namespace wsct {

struct BfPropConfig {
  double th = 0.01;           // relevance threshold for keeping input pixels
  double th_conf = 0.5;       // low-confidence association threshold
  double radius = 18.0;       // r: cell region and matching window radius
  double sigma = 6.0;         // Gaussian used for matching templates
  double peak_threshold = 0.3;
  double min_distance = 6.0;

  void validate() const;  // throws ConfigError
};

// S(c): pixels within `radius` of the (t+1) cell center.
struct TargetRegion {
  int cell_index = 0;
  Point2 center;
  double radius = 0.0;
  std::vector<int> pixels;  // row-major linear indices

  static TargetRegion make(int cell_index, Point2 center, double radius, int height, int width);
};

struct RelevancePair {
  int cell_index = 0;
  Image g_t;
  Image g_t1;
};

struct MaskedImagePair {
  int cell_index = 0;
  Image image_t;
  Image image_t1;
};

struct AssociationPair {
  int cell_index = 0;       // detection at t+1 (anchor)
  int detection_index = 0;  // detection at t
  double cost = 0.0;
  double confidence = 0.0;
};

struct AssociationSet {
  int frame_index = 0;  // t
  std::vector<Point2> detections_t;
  std::vector<Point2> cells_t1;
  std::vector<AssociationPair> pairs;
  Mask gamma;  // 1 on pixels of unassociated cells' regions at t+1

  const AssociationPair* pair_for_cell(int cell_index) const;
};

// L_t1 inside S(cell), zero elsewhere. Throws InputError if `cell` lies
// outside the map.
LikelihoodMap init_target_map(const LikelihoodMap& l_t1, Point2 cell, double radius);

// Guided backpropagation over one forward tape of the co-detection network.
// The tape is recorded once per frame pair; each call back-propagates a
// different target from the t+1 output to both input images.
template <typename T>
class GuidedBackprop {
 public:
  GuidedBackprop(const CoDetectNetT<T>& net, const Image& image_t, const Image& image_t1);

  // Raw input-space signals (g0_t, g0_t1) for a t+1 output-side target.
  std::pair<nn::Tensor<T>, nn::Tensor<T>> propagate(const nn::Tensor<T>& target,
                                                    nn::BackwardMode mode = nn::BackwardMode::kGuided);
  RelevancePair relevance(int cell_index, const Image& target);

  nn::Graph<T>& graph() { return graph_; }
  const typename CoDetectNetT<T>::Nodes& nodes() const { return nodes_; }

 private:
  nn::Graph<T> graph_;
  typename CoDetectNetT<T>::Nodes nodes_;
};

extern template class GuidedBackprop<float>;
extern template class GuidedBackprop<double>;

// Convenience wrapper: one forward pass plus one guided backward pass.
RelevancePair guided_backprop(const CoDetectParams& params, const Image& image_t,
                              const Image& image_t1, const LikelihoodMap& target, int cell_index = 0);

// Per pixel and frame, keeps the clamped relevance of the single cell with the
// largest clamped value (ties to the lowest index); all others become 0.
// Throws InputError on an empty list or mismatched shapes.
std::vector<RelevancePair> max_projection(const std::vector<RelevancePair>& raw);

// Divides every map by the largest positive value over all cells and both
// frames, so th compares against a [0,1] scale whatever the network's gain.
// All-nonpositive input is left as is.
void normalize_relevance(std::vector<RelevancePair>& raw);

// Original pixel where relevance > th, background surface elsewhere.
MaskedImagePair make_masked_images(const Image& image_t, const Image& image_t1,
                                   const RelevancePair& relevance, const BackgroundModel& bg_t,
                                   const BackgroundModel& bg_t1, double th);

// t-side co-detection output for the masked pair.
LikelihoodMap forward_propagate(const CoDetectParams& params, const MaskedImagePair& masked);

// cost(i, j): MSE between response i and a unit Gaussian at detection j over
// the radius window around detection j.
CostMatrix matching_costs(const std::vector<Image>& responses, const std::vector<Point2>& detections_t,
                          double sigma, double radius);

// One-to-one assignment of t+1 cells (responses) to t detections. A cell may
// stay unmatched at the cost an all-zero response would incur.
AssociationSet match_one_by_one(const std::vector<Image>& responses,
                                const std::vector<Point2>& detections_t, double sigma, double radius);

// Drops pairs with confidence < th_conf and adds S of every cell left without a
// pair to gamma. `regions` must cover every cell index in use.
AssociationSet filter_low_confidence(const AssociationSet& assoc, double th_conf,
                                     const std::vector<TargetRegion>& regions, int height, int width);

// Full backward-and-forward propagation for one frame pair.
AssociationSet mine_associations(const CoDetectParams& params, const Image& image_t,
                                 const Image& image_t1, const BfPropConfig& cfg);

}  // namespace wsct
