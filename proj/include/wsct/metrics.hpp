#pragma once

#include <utility>
#include <vector>

#include "wsct/bfprop.hpp"
#include "wsct/tracks.hpp"

namespace wsct {

struct EvalConfig {
  double match_radius = 10.0;  // ground truth to prediction gate, px

  void validate() const;  // throws ConfigError
};

// Frame-wise one-to-one matching, ascending distance within `radius` (ties
// broken by coordinates, so the result does not depend on list order).
// Returns, for each gt point, the index of its pred point or -1.
std::vector<int> greedy_point_match(const std::vector<Point2>& gt, const std::vector<Point2>& pred,
                                    double radius);

struct DetectionScore {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Optimal one-to-one matching per frame: most pairs within the gate, then
// least total distance. A ratio with nothing to count (no predictions, or no
// ground truth) is 1.
DetectionScore detection_prf(const std::vector<std::vector<Point2>>& gt_points,
                             const std::vector<std::vector<Point2>>& pred_points, double match_radius);

// Predicted links between the detections of frames t and t+1.
struct PairLinks {
  int frame_t = 0;
  std::vector<Point2> detections_t;
  std::vector<Point2> detections_t1;
  std::vector<std::pair<int, int>> links;  // (index at t, index at t+1)
};

// Every consecutive step of a track plus every parent-end to child-start step.
std::vector<PairLinks> links_from_tracks(const TrackSet& tracks, int frame_count);

// BF-prop output as links: each surviving pair joins detection_t to cell_t1.
PairLinks links_from_associations(const AssociationSet& assoc);

struct LinkScore {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int gt_links = 0;
  int divisions = 0;          // ground-truth mothers with children
  int divisions_found = 0;    // all of whose child links are true positives
  double accuracy = 0.0;      // tp / gt_links
  double precision = 0.0;     // tp / (tp + fp)
  double recall = 0.0;        // same as accuracy
  double f1 = 0.0;
  double division_recall = 0.0;
};

// A ground-truth link is a true positive when both endpoints match detections
// (per frame pair) that the prediction links. Throws InputError when the
// ground truth has no links.
LinkScore score_links(const TrackSet& gt, const std::vector<PairLinks>& pred, const EvalConfig& cfg);

LinkScore association_accuracy(const TrackSet& gt, const TrackSet& pred, const EvalConfig& cfg);

// Each target counts the frames it shares with the single predicted track
// covering most of them. Throws InputError on empty ground truth.
double target_effectiveness(const TrackSet& gt, const TrackSet& pred, const EvalConfig& cfg);

struct EvalReport {
  double association_accuracy = 0.0;
  double target_effectiveness = 0.0;
  double precision = 0.0;  // detection
  double recall = 0.0;
  double f1 = 0.0;
  int tp_associations = 0;
  int fp_associations = 0;
  int fn_associations = 0;
  double association_precision = 0.0;
  double division_recall = 0.0;
};

EvalReport evaluate_tracks(const TrackSet& gt, const TrackSet& pred, const EvalConfig& cfg);

}  // namespace wsct
