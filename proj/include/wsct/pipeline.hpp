#pragma once

#include <functional>
#include <string>

#include "wsct/config.hpp"
#include "wsct/metrics.hpp"

namespace wsct {

struct PipelineReport {
  EvalReport tracker;         // tracked test sequence vs ground truth
  LinkScore mined;            // BF-prop links on the test sequence
  DetectionScore codetect;    // co-detection peaks on the test sequence
  double codetect_final_loss = 0.0;
  double tracker_final_loss = 0.0;
};

// Stage names in execution order.
inline constexpr const char* kPipelineStages[] = {"synth",  "points",      "train-codetect",
                                                  "bfprop", "build-pseudo", "train-track",
                                                  "track",  "eval"};

using PipelineLog = std::function<void(const std::string&)>;

// Runs every stage, writing artifacts under cfg.work_dir. A stage whose
// "<stage>.done" marker exists is skipped when cfg.resume is set. Failures
// surface as StageError naming the stage.
PipelineReport run_pipeline(const PipelineConfig& cfg, const PipelineLog& log = {});

// Reads report.json written by the eval stage.
PipelineReport read_pipeline_report(const std::filesystem::path& path);
void write_pipeline_report(const std::filesystem::path& path, const PipelineReport& report);
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);

// Co-detection peaks per frame of `frames`, each frame read from the t side
// of its pair with the next frame (the last frame from the t+1 side).
std::vector<std::vector<Point2>> codetect_sequence(const CoDetectParams& params,
                                                   const std::vector<Image>& frames,
                                                   double peak_threshold, double min_distance);

// Mines every (t, t+stride) pair; frame_index is t in the original numbering.
std::vector<AssociationSet> mine_sequence(const CoDetectParams& params, const std::vector<Image>& frames,
                                          int stride, const BfPropConfig& cfg);

// Scores mined sets against the ground truth, pooling the stride offsets.
LinkScore score_mined(const TrackSet& gt, const std::vector<AssociationSet>& sets, int stride,
                      const EvalConfig& cfg);

std::vector<Image> subsample_frames(const std::vector<Image>& frames, int stride, int offset = 0);

}  // namespace wsct
