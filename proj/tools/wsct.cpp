// Command-line front end: one subcommand per pipeline stage plus `pipeline`.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "wsct/io.hpp"
#include "wsct/pipeline.hpp"
#include "wsct/plot.hpp"
#include "wsct/runtime.hpp"

namespace {

using namespace wsct;

std::vector<std::vector<Point2>> labels_for(const ImageSequence& seq, const fs::path& dir, bool fluorescence,
                                            double threshold, int min_area) {
  std::vector<std::vector<Point2>> out;
  for (int f = 0; f < seq.size(); ++f) {
    if (fluorescence) {
      if (!seq.has_fluorescence()) throw IoError("no fluorescence images in " + dir.string());
      out.push_back(extract_points_from_fluorescence(seq.fluorescence[static_cast<std::size_t>(f)], threshold,
                                                     min_area));
    } else {
      if (!seq.tracks) throw IoError("no tracks.csv in " + dir.string());
      out.push_back(seq.tracks->points_in_frame(f));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Weakly supervised cell tracking: co-detection, BF-prop pseudo-labels, tracker"};
  app.require_subcommand(1);

  // synth
  SimConfig sim;
  std::string synth_out;
  std::string profile = "blob";
  auto* synth = app.add_subcommand("synth", "Simulate an image sequence with ground-truth tracks");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", sim.seed);
  synth->add_option("--height", sim.height);
  synth->add_option("--width", sim.width);
  synth->add_option("--frames", sim.n_frames);
  synth->add_option("--cells", sim.initial_cells);
  synth->add_option("--motion-sigma", sim.motion_sigma);
  synth->add_option("--division-prob", sim.division_prob);
  synth->add_option("--noise", sim.noise_sigma);
  synth->add_option("--profile", profile)->check(CLI::IsMember({"blob", "ring"}));

  // extract-points
  std::string ep_data, ep_out;
  double ep_threshold = 0.3;
  int ep_min_area = 5;
  auto* extract = app.add_subcommand("extract-points", "Cell centroids from fluorescence images");
  extract->add_option("--data", ep_data, "Sequence directory")->required();
  extract->add_option("--out", ep_out, "points.csv to write")->required();
  extract->add_option("--threshold", ep_threshold);
  extract->add_option("--min-area", ep_min_area);

  // train-codetect
  std::vector<std::string> tc_data;
  std::string tc_out;
  TrainConfig tc;
  int tc_stride = 1;
  bool tc_fluo = false;
  auto* train_cd = app.add_subcommand("train-codetect", "Train the co-detection network on point labels");
  train_cd->add_option("--data", tc_data, "Sequence directories")->required();
  train_cd->add_option("--out", tc_out, "Checkpoint to write")->required();
  train_cd->add_option("--epochs", tc.epochs);
  train_cd->add_option("--lr", tc.learning_rate);
  train_cd->add_option("--batch", tc.batch_size);
  train_cd->add_option("--seed", tc.seed);
  train_cd->add_option("--stride", tc_stride);
  train_cd->add_flag("--fluorescence", tc_fluo, "Take labels from fluorescence instead of tracks.csv");

  // bfprop
  std::string bf_ckpt, bf_data, bf_out;
  BfPropConfig bf;
  int bf_stride = 1;
  auto* bfprop = app.add_subcommand("bfprop", "Mine associations with backward-and-forward propagation");
  bfprop->add_option("--ckpt", bf_ckpt)->required();
  bfprop->add_option("--data", bf_data)->required();
  bfprop->add_option("--out", bf_out)->required();
  bfprop->add_option("--stride", bf_stride);
  bfprop->add_option("--th", bf.th);
  bfprop->add_option("--th-conf", bf.th_conf);
  bfprop->add_option("--radius", bf.radius);

  // build-pseudo
  std::string bp_data, bp_assoc, bp_out;
  PseudoConfig pc;
  int bp_stride = 1;
  auto* build = app.add_subcommand("build-pseudo", "Turn mined associations into tracker targets");
  build->add_option("--data", bp_data)->required();
  build->add_option("--assoc", bp_assoc)->required();
  build->add_option("--out", bp_out)->required();
  build->add_option("--stride", bp_stride);
  build->add_option("--motion-scale", pc.motion_scale);
  build->add_option("--radius", pc.radius);

  // train-track
  std::vector<std::string> tt_pseudo;
  std::string tt_out;
  TrainConfig tt;
  TrackArch ta;
  auto* train_tr = app.add_subcommand("train-track", "Train the tracker on pseudo samples");
  train_tr->add_option("--pseudo", tt_pseudo)->required();
  train_tr->add_option("--out", tt_out)->required();
  train_tr->add_option("--epochs", tt.epochs);
  train_tr->add_option("--lr", tt.learning_rate);
  train_tr->add_option("--seed", tt.seed);
  train_tr->add_option("--motion-scale", ta.motion_scale);

  // track
  std::string tr_ckpt, tr_data, tr_out;
  int tr_stride = 1;
  TrackerSettings ts;
  auto* track = app.add_subcommand("track", "Track a sequence with a trained tracker");
  track->add_option("--ckpt", tr_ckpt)->required();
  track->add_option("--data", tr_data)->required();
  track->add_option("--out", tr_out)->required();
  track->add_option("--stride", tr_stride);
  track->add_option("--gate", ts.gate_radius);

  // eval
  std::string ev_gt, ev_pred, ev_report;
  EvalConfig ec;
  int ev_stride = 1;
  auto* eval = app.add_subcommand("eval", "Score predicted tracks against ground truth");
  eval->add_option("--gt", ev_gt)->required();
  eval->add_option("--pred", ev_pred)->required();
  eval->add_option("--report", ev_report)->required();
  eval->add_option("--match-radius", ec.match_radius);
  eval->add_option("--stride", ev_stride, "Subsample the ground truth to match strided tracking");

  // plot
  std::string pl_tracks, pl_data, pl_out;
  int pl_scale = 3;
  auto* plot = app.add_subcommand("plot", "Draw track overlays and a 3-D trajectory view");
  plot->add_option("--tracks", pl_tracks)->required();
  plot->add_option("--data", pl_data)->required();
  plot->add_option("--out", pl_out)->required();
  plot->add_option("--scale", pl_scale);

  // pipeline
  std::string pp_config, pp_work;
  bool pp_fresh = false;
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from a config file");
  pipeline->add_option("--config", pp_config)->required();
  pipeline->add_option("--work-dir", pp_work, "Overrides pipeline.work_dir");
  pipeline->add_flag("--fresh", pp_fresh, "Ignore completed-stage markers");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      sim.profile = profile == "ring" ? IntensityProfile::kRing : IntensityProfile::kBlob;
      write_sequence(synth_out, generate_sequence(sim));
    } else if (*extract) {
      const ImageSequence seq = read_sequence(ep_data);
      write_points_csv(ep_out, labels_for(seq, ep_data, true, ep_threshold, ep_min_area));
    } else if (*train_cd) {
      std::vector<CoDetectSample> samples;
      for (const auto& dir : tc_data) {
        const ImageSequence seq = read_sequence(dir);
        const auto points = labels_for(seq, dir, tc_fluo, 0.3, 5);
        for (int t = 0; t + tc_stride < seq.size(); ++t) {
          const auto a = static_cast<std::size_t>(t), b = static_cast<std::size_t>(t + tc_stride);
          samples.push_back({seq.frames[a], seq.frames[b], points[a], points[b]});
        }
      }
      TrainReport report;
      const auto net = train_codetect(samples, tc, {}, &report);
      nn::save_checkpoint(codetect_checkpoint(net), tc_out);
      std::printf("loss %.6f -> %.6f\n", report.initial_loss, report.final_loss);
    } else if (*bfprop) {
      const auto net = codetect_from_checkpoint(nn::load_checkpoint(bf_ckpt));
      const ImageSequence seq = read_sequence(bf_data);
      const auto sets = mine_sequence(net, seq.frames, bf_stride, bf);
      write_associations(bf_out, sets, seq.frames[0].height(), seq.frames[0].width(), bf_stride);
      if (seq.tracks) {
        const LinkScore s = score_mined(*seq.tracks, sets, bf_stride, {});
        std::printf("mined links: precision %.3f recall %.3f f1 %.3f\n", s.precision, s.recall, s.f1);
      }
    } else if (*build) {
      const ImageSequence seq = read_sequence(bp_data);
      std::vector<PseudoSample> samples;
      for (const auto& set : read_associations(bp_assoc)) {
        const auto t = static_cast<std::size_t>(set.frame_index);
        if (t + static_cast<std::size_t>(bp_stride) >= seq.frames.size())
          throw IoError("association frame out of range");
        samples.push_back(build_pseudo_sample(set, seq.frames[t], seq.frames[t + static_cast<std::size_t>(bp_stride)], pc));
      }
      write_pseudo_samples(bp_out, samples);
    } else if (*train_tr) {
      std::vector<PseudoSample> samples;
      for (const auto& dir : tt_pseudo)
        for (auto& s : read_pseudo_samples(dir)) samples.push_back(std::move(s));
      TrackTrainReport report;
      const auto net = train_tracknet(samples, tt, ta, &report);
      nn::save_checkpoint(tracknet_checkpoint(net), tt_out);
      std::printf("loss %.6f -> %.6f\n", report.initial_loss, report.final_loss);
    } else if (*track) {
      const auto net = tracknet_from_checkpoint(nn::load_checkpoint(tr_ckpt));
      const ImageSequence seq = read_sequence(tr_data);
      const auto tracks = track_sequence(net, subsample_frames(seq.frames, tr_stride), ts.peak_threshold,
                                         ts.min_distance, ts.gate_radius);
      write_tracks_csv(tr_out, tracks);
    } else if (*eval) {
      const TrackSet gt = subsample_tracks(read_tracks_csv(ev_gt), ev_stride);
      const EvalReport r = evaluate_tracks(gt, read_tracks_csv(ev_pred), ec);
      write_eval_report(ev_report, r);
      std::printf("AA %.3f TE %.3f F1 %.3f\n", r.association_accuracy, r.target_effectiveness, r.f1);
    } else if (*plot) {
      const ImageSequence seq = read_sequence(pl_data);
      plot_tracks(read_tracks_csv(pl_tracks), seq.frames, pl_out, pl_scale);
    } else if (*pipeline) {
      PipelineConfig cfg = load_pipeline_config(pp_config);
      if (!pp_work.empty()) cfg.work_dir = pp_work;
      if (pp_fresh) cfg.resume = false;
      const PipelineReport r = run_pipeline(cfg, [](const std::string& msg) { std::cerr << msg << '\n'; });
      std::printf("tracker AA %.3f TE %.3f F1 %.3f division recall %.3f\n", r.tracker.association_accuracy,
                  r.tracker.target_effectiveness, r.tracker.f1, r.tracker.division_recall);
      std::printf("mined precision %.3f recall %.3f f1 %.3f\n", r.mined.precision, r.mined.recall, r.mined.f1);
      std::printf("co-detection F1 %.3f\n", r.codetect.f1);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
