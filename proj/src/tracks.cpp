#include "wsct/tracks.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

namespace wsct {

const TrackPoint* Track::point_at(int frame) const {
  if (points.empty()) return nullptr;
  const int offset = frame - points.front().frame;
  if (offset < 0 || offset >= static_cast<int>(points.size())) return nullptr;
  return &points[static_cast<std::size_t>(offset)];
}

const Track* TrackSet::find(int track_id) const {
  for (const auto& t : tracks)
    if (t.track_id == track_id) return &t;
  return nullptr;
}

int TrackSet::frame_count() const {
  int last = -1;
  for (const auto& t : tracks) last = std::max(last, t.last_frame());
  return last + 1;
}

std::vector<Point2> TrackSet::points_in_frame(int frame) const {
  std::vector<Point2> out;
  for (const auto& t : tracks)
    if (const auto* p = t.point_at(frame)) out.push_back({p->x, p->y});
  return out;
}

std::size_t TrackSet::point_count() const {
  std::size_t n = 0;
  for (const auto& t : tracks) n += t.points.size();
  return n;
}

void validate_tracks(const TrackSet& set) {
  std::map<int, const Track*> by_id;
  for (const auto& t : set.tracks) {
    if (!by_id.emplace(t.track_id, &t).second)
      throw InputError("duplicate track id " + std::to_string(t.track_id));
    if (t.points.empty()) throw InputError("track " + std::to_string(t.track_id) + " is empty");
    for (std::size_t i = 1; i < t.points.size(); ++i)
      if (t.points[i].frame != t.points[i - 1].frame + 1)
        throw InputError("track " + std::to_string(t.track_id) + " has non-consecutive frames");
  }
  for (const auto& t : set.tracks) {
    if (!t.parent_id) continue;
    auto it = by_id.find(*t.parent_id);
    if (it == by_id.end())
      throw InputError("track " + std::to_string(t.track_id) + " has unknown parent");
    if (it->second->last_frame() + 1 != t.first_frame())
      throw InputError("track " + std::to_string(t.track_id) + " does not start after its parent");
  }
  // Parents always end strictly before children start, so links cannot form a
  // cycle once the adjacency check above passes.
}

TrackSet subsample_tracks(const TrackSet& tracks, int stride, int offset) {
  if (stride < 1) throw InputError("stride must be >= 1");
  if (offset < 0 || offset >= stride) throw InputError("offset must lie in [0, stride)");
  if (stride == 1) return tracks;

  std::map<int, const Track*> by_id;
  for (const auto& t : tracks.tracks) by_id[t.track_id] = &t;

  TrackSet out;
  std::map<int, int> last_kept;  // track id -> last kept (renumbered) frame
  for (const auto& t : tracks.tracks) {
    Track s;
    s.track_id = t.track_id;
    for (const auto& p : t.points)
      if (p.frame >= offset && (p.frame - offset) % stride == 0)
        s.points.push_back({(p.frame - offset) / stride, p.x, p.y});
    if (s.points.empty()) continue;
    last_kept[t.track_id] = s.points.back().frame;
    out.tracks.push_back(std::move(s));
  }
  for (auto& s : out.tracks) {
    const Track* orig = by_id.at(s.track_id);
    std::optional<int> ancestor = orig->parent_id;
    while (ancestor) {
      auto kept = last_kept.find(*ancestor);
      if (kept != last_kept.end() && kept->second + 1 == s.first_frame()) break;
      ancestor = by_id.count(*ancestor) ? by_id.at(*ancestor)->parent_id : std::nullopt;
    }
    s.parent_id = ancestor;
  }
  return out;
}

}  // namespace wsct
