#include "wsct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "wsct/assignment.hpp"

namespace wsct {

void EvalConfig::validate() const {
  if (!(match_radius > 0.0)) throw ConfigError("match_radius must be > 0");
}

namespace {

double ratio(int num, int den) { return den == 0 ? 1.0 : static_cast<double>(num) / den; }

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

struct FramePoint {
  Point2 p;
  std::size_t track;  // index into TrackSet::tracks
};

std::vector<std::vector<FramePoint>> points_by_frame(const TrackSet& tracks, int frame_count) {
  std::vector<std::vector<FramePoint>> out(static_cast<std::size_t>(std::max(frame_count, 0)));
  for (std::size_t k = 0; k < tracks.tracks.size(); ++k)
    for (const auto& q : tracks.tracks[k].points)
      if (q.frame >= 0 && q.frame < frame_count)
        out[static_cast<std::size_t>(q.frame)].push_back({{q.x, q.y}, k});
  return out;
}

std::vector<Point2> positions(const std::vector<FramePoint>& pts) {
  std::vector<Point2> out;
  for (const auto& fp : pts) out.push_back(fp.p);
  return out;
}

}  // namespace

std::vector<int> greedy_point_match(const std::vector<Point2>& gt, const std::vector<Point2>& pred,
                                    double radius) {
  std::vector<std::tuple<double, double, double, double, double, std::size_t, std::size_t>> cand;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double d2 = squared_distance(gt[i], pred[j]);
      if (d2 <= r2) cand.emplace_back(d2, gt[i].x, gt[i].y, pred[j].x, pred[j].y, i, j);
    }
  std::sort(cand.begin(), cand.end());
  std::vector<int> gt_to_pred(gt.size(), -1);
  std::vector<bool> used(pred.size(), false);
  for (const auto& c : cand) {
    const std::size_t i = std::get<5>(c), j = std::get<6>(c);
    if (gt_to_pred[i] >= 0 || used[j]) continue;
    gt_to_pred[i] = static_cast<int>(j);
    used[j] = true;
  }
  return gt_to_pred;
}

DetectionScore detection_prf(const std::vector<std::vector<Point2>>& gt_points,
                             const std::vector<std::vector<Point2>>& pred_points, double match_radius) {
  if (!(match_radius > 0.0)) throw ConfigError("match_radius must be > 0");
  DetectionScore s;
  const std::size_t frames = std::max(gt_points.size(), pred_points.size());
  for (std::size_t f = 0; f < frames; ++f) {
    static const std::vector<Point2> none;
    const auto& gt = f < gt_points.size() ? gt_points[f] : none;
    const auto& pred = f < pred_points.size() ? pred_points[f] : none;
    int matched = 0;
    if (!gt.empty() && !pred.empty()) {
      CostMatrix cost(static_cast<int>(gt.size()), static_cast<int>(pred.size()));
      for (std::size_t i = 0; i < gt.size(); ++i)
        for (std::size_t j = 0; j < pred.size(); ++j) {
          const double d = std::sqrt(squared_distance(gt[i], pred[j]));
          cost(static_cast<int>(i), static_cast<int>(j)) =
              d <= match_radius ? d : std::numeric_limits<double>::infinity();
        }
      // Leaving a row out costs more than any complete set of gated distances.
      const double skip = match_radius * static_cast<double>(gt.size() + 1) + 1.0;
      const auto a = solve_assignment(cost, std::vector<double>(gt.size(), skip));
      matched = static_cast<int>(std::ranges::count_if(a.row_to_col, [](int j) { return j >= 0; }));
    }
    s.tp += matched;
    s.fn += static_cast<int>(gt.size()) - matched;
    s.fp += static_cast<int>(pred.size()) - matched;
  }
  s.precision = ratio(s.tp, s.tp + s.fp);
  s.recall = ratio(s.tp, s.tp + s.fn);
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

std::vector<PairLinks> links_from_tracks(const TrackSet& tracks, int frame_count) {
  const auto frames = points_by_frame(tracks, frame_count);
  std::vector<PairLinks> out;
  for (int t = 0; t + 1 < frame_count; ++t) {
    const auto& a = frames[static_cast<std::size_t>(t)];
    const auto& b = frames[static_cast<std::size_t>(t + 1)];
    PairLinks pl{t, positions(a), positions(b), {}};
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        const Track& from = tracks.tracks[a[i].track];
        const Track& to = tracks.tracks[b[j].track];
        const bool same = a[i].track == b[j].track;
        const bool child = to.parent_id && *to.parent_id == from.track_id && to.first_frame() == t + 1 &&
                           from.last_frame() == t;
        if (same || child) pl.links.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    out.push_back(std::move(pl));
  }
  return out;
}

PairLinks links_from_associations(const AssociationSet& assoc) {
  PairLinks pl{assoc.frame_index, assoc.detections_t, assoc.cells_t1, {}};
  for (const auto& p : assoc.pairs) pl.links.emplace_back(p.detection_index, p.cell_index);
  return pl;
}

LinkScore score_links(const TrackSet& gt, const std::vector<PairLinks>& pred, const EvalConfig& cfg) {
  cfg.validate();
  const int frame_count = gt.frame_count();
  const auto gt_frames = points_by_frame(gt, frame_count);
  std::map<int, const PairLinks*> by_frame;
  for (const auto& pl : pred) by_frame[pl.frame_t] = &pl;

  LinkScore s;
  int pred_links = 0;
  for (const auto& pl : pred) pred_links += static_cast<int>(pl.links.size());
  // Per mother track: child links seen and child links hit.
  std::map<std::size_t, std::pair<int, int>> mothers;

  for (int t = 0; t + 1 < frame_count; ++t) {
    const auto& a = gt_frames[static_cast<std::size_t>(t)];
    const auto& b = gt_frames[static_cast<std::size_t>(t + 1)];
    const PairLinks* pl = by_frame.count(t) ? by_frame[t] : nullptr;
    std::vector<int> ma(a.size(), -1), mb(b.size(), -1);
    if (pl) {
      ma = greedy_point_match(positions(a), pl->detections_t, cfg.match_radius);
      mb = greedy_point_match(positions(b), pl->detections_t1, cfg.match_radius);
    }
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        const Track& from = gt.tracks[a[i].track];
        const Track& to = gt.tracks[b[j].track];
        const bool same = a[i].track == b[j].track;
        const bool child = to.parent_id && *to.parent_id == from.track_id && to.first_frame() == t + 1;
        if (!same && !child) continue;
        ++s.gt_links;
        const bool hit = pl && ma[i] >= 0 && mb[j] >= 0 &&
                         std::ranges::find(pl->links, std::pair{ma[i], mb[j]}) != pl->links.end();
        if (hit) ++s.tp;
        if (child) {
          auto& m = mothers[a[i].track];
          ++m.first;
          if (hit) ++m.second;
        }
      }
  }
  if (s.gt_links == 0) throw InputError("ground truth has no associations");
  s.fn = s.gt_links - s.tp;
  s.fp = pred_links - s.tp;
  s.divisions = static_cast<int>(mothers.size());
  for (const auto& [track, m] : mothers)
    if (m.first == m.second) ++s.divisions_found;
  s.accuracy = ratio(s.tp, s.gt_links);
  s.recall = s.accuracy;
  s.precision = ratio(s.tp, s.tp + s.fp);
  s.f1 = harmonic(s.precision, s.recall);
  s.division_recall = ratio(s.divisions_found, s.divisions);
  return s;
}

LinkScore association_accuracy(const TrackSet& gt, const TrackSet& pred, const EvalConfig& cfg) {
  return score_links(gt, links_from_tracks(pred, gt.frame_count()), cfg);
}

double target_effectiveness(const TrackSet& gt, const TrackSet& pred, const EvalConfig& cfg) {
  cfg.validate();
  const std::size_t total = gt.point_count();
  if (total == 0) throw InputError("ground truth is empty");
  const int frame_count = gt.frame_count();
  const auto gt_frames = points_by_frame(gt, frame_count);
  const auto pred_frames = points_by_frame(pred, frame_count);
  // counts[gt track][pred track]
  std::vector<std::map<std::size_t, int>> counts(gt.tracks.size());
  for (int f = 0; f < frame_count; ++f) {
    const auto& g = gt_frames[static_cast<std::size_t>(f)];
    const auto& p = pred_frames[static_cast<std::size_t>(f)];
    const auto m = greedy_point_match(positions(g), positions(p), cfg.match_radius);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (m[i] >= 0) ++counts[g[i].track][p[static_cast<std::size_t>(m[i])].track];
  }
  long covered = 0;
  for (const auto& c : counts) {
    int best = 0;
    for (const auto& [track, n] : c) best = std::max(best, n);
    covered += best;
  }
  return static_cast<double>(covered) / static_cast<double>(total);
}

EvalReport evaluate_tracks(const TrackSet& gt, const TrackSet& pred, const EvalConfig& cfg) {
  const LinkScore links = association_accuracy(gt, pred, cfg);
  const int frames = gt.frame_count();
  std::vector<std::vector<Point2>> gp, pp;
  for (int f = 0; f < frames; ++f) {
    gp.push_back(gt.points_in_frame(f));
    pp.push_back(pred.points_in_frame(f));
  }
  const DetectionScore det = detection_prf(gp, pp, cfg.match_radius);
  EvalReport r;
  r.association_accuracy = links.accuracy;
  r.target_effectiveness = target_effectiveness(gt, pred, cfg);
  r.precision = det.precision;
  r.recall = det.recall;
  r.f1 = det.f1;
  r.tp_associations = links.tp;
  r.fp_associations = links.fp;
  r.fn_associations = links.fn;
  r.association_precision = links.precision;
  r.division_recall = links.division_recall;
  return r;
}

}  // namespace wsct
