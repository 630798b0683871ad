#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wsct/grid.hpp"
#include "wsct/tracks.hpp"

namespace wsct {

enum class IntensityProfile { kBlob, kRing };

struct SimConfig {
  int height = 128;
  int width = 128;
  int n_frames = 20;
  int initial_cells = 15;
  double motion_sigma = 1.5;   // random-walk step scale, px/frame
  double division_prob = 0.02; // per cell per frame
  double radius_min = 5.0;
  double radius_max = 7.0;
  IntensityProfile profile = IntensityProfile::kBlob;
  double noise_sigma = 0.03;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

struct ImageSequence {
  std::vector<Image> frames;
  std::vector<Image> fluorescence;  // empty or frame-aligned
  std::optional<TrackSet> tracks;

  int size() const { return static_cast<int>(frames.size()); }
  bool has_fluorescence() const { return !fluorescence.empty(); }
};

// Deterministic for a fixed config: the same seed gives a bit-identical
// sequence. Centroids of two cells are never closer than kMinCentroidSeparation.
ImageSequence generate_sequence(const SimConfig& config);

inline constexpr double kMinCentroidSeparation = 2.0;

// Centroids of 8-connected components of pixels strictly above `threshold`
// with at least `min_area` pixels, ordered by component label (raster order
// of each component's first pixel).
std::vector<Point2> extract_points_from_fluorescence(const Image& image, double threshold,
                                                     int min_area);

}  // namespace wsct
