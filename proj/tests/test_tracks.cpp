#include <gtest/gtest.h>

#include "wsct/tracks.hpp"

using namespace wsct;

namespace {

Track make(int id, std::optional<int> parent, int first, int count, double x0 = 0.0) {
  Track t{id, parent, {}};
  for (int i = 0; i < count; ++i) t.points.push_back({first + i, x0 + i, 5.0});
  return t;
}

}  // namespace

TEST(Tracks, PointLookupAndCounts) {
  TrackSet s{{make(1, std::nullopt, 0, 4), make(2, std::nullopt, 2, 3, 50)}};
  EXPECT_EQ(s.frame_count(), 5);
  EXPECT_EQ(s.point_count(), 7u);
  EXPECT_EQ(s.points_in_frame(2).size(), 2u);
  EXPECT_EQ(s.points_in_frame(4).size(), 1u);
  ASSERT_NE(s.tracks[1].point_at(3), nullptr);
  EXPECT_DOUBLE_EQ(s.tracks[1].point_at(3)->x, 51.0);
  EXPECT_EQ(s.tracks[1].point_at(1), nullptr);
  EXPECT_EQ(s.find(3), nullptr);
}

TEST(Tracks, ValidateRejectsBrokenStructure) {
  EXPECT_NO_THROW(validate_tracks({{make(1, std::nullopt, 0, 3), make(2, 1, 3, 2), make(3, 1, 3, 2)}}));
  EXPECT_THROW(validate_tracks({{make(1, std::nullopt, 0, 3), make(1, std::nullopt, 0, 3)}}), InputError);
  EXPECT_THROW(validate_tracks({{make(1, std::nullopt, 0, 3), make(2, 1, 5, 2)}}), InputError);
  EXPECT_THROW(validate_tracks({{make(2, 7, 0, 3)}}), InputError);
  Track gap = make(1, std::nullopt, 0, 3);
  gap.points[2].frame = 4;
  EXPECT_THROW(validate_tracks({{gap}}), InputError);
}

TEST(Tracks, SubsampleRenumbersAndReparents) {
  // Mother 0..3, children 4..9: with stride 3 the kept frames are 0,3,6,9.
  TrackSet s{{make(1, std::nullopt, 0, 4), make(2, 1, 4, 6), make(3, 1, 4, 6, 80)}};
  const TrackSet sub = subsample_tracks(s, 3);
  validate_tracks(sub);
  EXPECT_EQ(sub.frame_count(), 4);
  ASSERT_NE(sub.find(2), nullptr);
  EXPECT_EQ(sub.find(2)->first_frame(), 2);
  EXPECT_EQ(sub.find(2)->parent_id, std::optional<int>(1));
  EXPECT_EQ(sub.find(1)->last_frame(), 1);
}

TEST(Tracks, SubsampleOffsetShiftsKeptFrames) {
  TrackSet s{{make(1, std::nullopt, 0, 10)}};
  const TrackSet sub = subsample_tracks(s, 3, 1);  // frames 1,4,7
  ASSERT_EQ(sub.tracks.size(), 1u);
  ASSERT_EQ(sub.tracks[0].points.size(), 3u);
  EXPECT_DOUBLE_EQ(sub.tracks[0].points[0].x, 1.0);
  EXPECT_DOUBLE_EQ(sub.tracks[0].points[2].x, 7.0);
  EXPECT_THROW(subsample_tracks(s, 3, 3), InputError);
  EXPECT_THROW(subsample_tracks(s, 0), InputError);
}

TEST(Tracks, SubsampleDropsVanishedAncestors) {
  // Track 2 lives only on frames 1..2, which stride 3 skips; its child
  // (3..5) attaches to no kept ancestor ending at kept frame 0.
  TrackSet s{{make(1, std::nullopt, 0, 1), make(2, 1, 1, 2), make(3, 2, 3, 3)}};
  const TrackSet sub = subsample_tracks(s, 3);
  validate_tracks(sub);
  EXPECT_EQ(sub.find(2), nullptr);
  ASSERT_NE(sub.find(3), nullptr);
  EXPECT_EQ(sub.find(3)->parent_id, std::optional<int>(1));
}
