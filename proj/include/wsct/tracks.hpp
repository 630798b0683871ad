#pragma once

#include <optional>
#include <vector>

#include "wsct/grid.hpp"

namespace wsct {

struct TrackPoint {
  int frame = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

// One trajectory. Points are consecutive in frame index; a child track's
// parent ends on the frame right before the child's first frame.
struct Track {
  int track_id = 0;
  std::optional<int> parent_id;
  std::vector<TrackPoint> points;

  int first_frame() const { return points.empty() ? -1 : points.front().frame; }
  int last_frame() const { return points.empty() ? -1 : points.back().frame; }
  const TrackPoint* point_at(int frame) const;

  friend bool operator==(const Track&, const Track&) = default;
};

using GroundTruthTrack = Track;

struct TrackSet {
  std::vector<Track> tracks;

  const Track* find(int track_id) const;
  int frame_count() const;  // last frame + 1 over all tracks
  std::vector<Point2> points_in_frame(int frame) const;
  std::size_t point_count() const;

  friend bool operator==(const TrackSet&, const TrackSet&) = default;
};

// Throws InputError when a structural invariant is broken: duplicate IDs,
// non-consecutive frames, dangling or non-adjacent parent links, cycles.
void validate_tracks(const TrackSet& tracks);

// Keeps frames offset, offset + stride, ... renumbered to 0, 1, 2, ...; tracks
// that vanish are dropped and their children re-parented to the nearest
// surviving ancestor that ends on the preceding kept frame.
TrackSet subsample_tracks(const TrackSet& tracks, int stride, int offset = 0);

}  // namespace wsct
