#pragma once

#include "wsct/bfprop.hpp"
#include "wsct/grid.hpp"

namespace wsct {

// Position channel for frame t+1 plus the scaled displacement from each t+1
// cell back to its t position.
struct MotionPositionMap {
  Image position;
  Image motion_x;
  Image motion_y;

  MotionPositionMap() = default;
  MotionPositionMap(int height, int width)
      : position(height, width, 0.0f), motion_x(height, width, 0.0f), motion_y(height, width, 0.0f) {}
  int height() const { return position.height(); }
  int width() const { return position.width(); }
};

struct PseudoSample {
  Image image_t;
  Image image_t1;
  MotionPositionMap target;
  Mask ignore_mask;  // 1 where the loss is ignored
};

struct LossReport {
  double total = 0.0;
  double masked_fraction = 0.0;  // share of pixels ignored
};

struct PseudoConfig {
  double sigma = 6.0;
  double radius = 18.0;
  double motion_scale = 30.0;

  void validate() const;  // throws ConfigError
};

// Motion is supervised only where the position target exceeds this.
inline constexpr double kMotionSupportLevel = 0.05;

// Position target from matched t+1 cells only. Within radius of a matched
// cell the motion target is (pos_t - pos_t1) / motion_scale (norm clamped to
// 1); overlapping disks go to the nearer cell, ties to the lower cell index.
// The ignore mask is gamma minus every pixel owned by a matched cell.
PseudoSample build_pseudo_sample(const AssociationSet& assoc, const Image& image_t,
                                 const Image& image_t1, const PseudoConfig& cfg);

// Per non-ignored pixel: (dpos)^2 + [target_pos > 0.05] * ((dmx)^2 + (dmy)^2) / 2,
// averaged over non-ignored pixels. When `grad` is non-null it receives the
// derivative of `total` with respect to each prediction channel.
LossReport masked_loss(const MotionPositionMap& pred, const PseudoSample& sample,
                       MotionPositionMap* grad = nullptr);

}  // namespace wsct
