#include "wsct/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "wsct/io.hpp"

namespace wsct {

namespace {

using nlohmann::json;

struct Layout {
  fs::path work;
  fs::path data;

  fs::path marker(const std::string& stage) const { return work / (stage + ".done"); }
  std::vector<fs::path> train_dirs() const {
    std::vector<fs::path> out;
    if (fs::is_directory(data))
      for (const auto& e : fs::directory_iterator(data))
        if (e.is_directory() && e.path().filename().string().starts_with("train")) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
  }
  fs::path test_dir() const { return data / "test"; }
  fs::path points(const fs::path& train) const { return work / "points" / (train.filename().string() + ".csv"); }
  fs::path mined(const fs::path& seq) const { return work / "bfprop" / seq.filename(); }
};

const TrackSet& ground_truth(const ImageSequence& seq, const fs::path& dir) {
  if (!seq.tracks) throw IoError("no tracks.csv in " + dir.string());
  return *seq.tracks;
}

void stage_synth(const PipelineConfig& cfg, const Layout& at) {
  if (!cfg.data_dir.empty()) {
    if (!fs::is_directory(cfg.data_dir)) throw IoError("data directory not found: " + cfg.data_dir.string());
    if (at.train_dirs().empty()) throw IoError("no train* sequences in " + cfg.data_dir.string());
    if (!fs::is_directory(at.test_dir())) throw IoError("no test sequence in " + cfg.data_dir.string());
    return;
  }
  SimConfig sim = cfg.sim;
  sim.seed = cfg.seed;
  write_sequence(at.test_dir(), generate_sequence(sim));
  for (int k = 0; k < cfg.train_sequences; ++k) {
    sim.seed = cfg.seed + 1 + static_cast<std::uint64_t>(k);
    write_sequence(at.data / ("train_" + std::to_string(k)), generate_sequence(sim));
  }
}

void stage_points(const PipelineConfig& cfg, const Layout& at) {
  for (const auto& dir : at.train_dirs()) {
    const ImageSequence seq = read_sequence(dir);
    std::vector<std::vector<Point2>> points;
    for (int f = 0; f < seq.size(); ++f) {
      if (cfg.point_source == PointSource::kFluorescence) {
        if (!seq.has_fluorescence()) throw IoError("no fluorescence images in " + dir.string());
        points.push_back(extract_points_from_fluorescence(seq.fluorescence[static_cast<std::size_t>(f)],
                                                          cfg.fluo_threshold, cfg.fluo_min_area));
      } else {
        points.push_back(ground_truth(seq, dir).points_in_frame(f));
      }
    }
    write_points_csv(at.points(dir), points);
  }
}

double stage_train_codetect(const PipelineConfig& cfg, const Layout& at) {
  std::vector<CoDetectSample> samples;
  for (const auto& dir : at.train_dirs()) {
    const ImageSequence seq = read_sequence(dir);
    const auto points = read_points_csv(at.points(dir), seq.size());
    for (int t = 0; t + cfg.stride < seq.size(); ++t) {
      const auto a = static_cast<std::size_t>(t), b = static_cast<std::size_t>(t + cfg.stride);
      samples.push_back({seq.frames[a], seq.frames[b], points[a], points[b]});
    }
  }
  TrainReport report;
  const CoDetectParams net = train_codetect(samples, cfg.codetect, cfg.codetect_arch, &report);
  nn::save_checkpoint(codetect_checkpoint(net), at.work / "codetect.ckpt");
  std::ofstream(at.work / "codetect_training.json")
      << json{{"initial_loss", report.initial_loss},
              {"final_loss", report.final_loss},
              {"epoch_losses", report.epoch_losses}}.dump(2)
      << '\n';
  return report.final_loss;
}

void stage_bfprop(const PipelineConfig& cfg, const Layout& at) {
  const CoDetectParams net = codetect_from_checkpoint(nn::load_checkpoint(at.work / "codetect.ckpt"));
  auto dirs = at.train_dirs();
  dirs.push_back(at.test_dir());
  for (const auto& dir : dirs) {
    const ImageSequence seq = read_sequence(dir);
    const auto sets = mine_sequence(net, seq.frames, cfg.stride, cfg.bfprop);
    const Image& f0 = seq.frames.front();
    write_associations(at.mined(dir), sets, f0.height(), f0.width(), cfg.stride);
    if (dir == at.test_dir() && seq.tracks) {
      const LinkScore s = score_mined(*seq.tracks, sets, cfg.stride, cfg.eval);
      std::ofstream(at.mined(dir) / "score.json")
          << json{{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"gt_links", s.gt_links},
                  {"divisions", s.divisions}, {"divisions_found", s.divisions_found}}
                 .dump(2)
          << '\n';
    }
  }
}

void stage_build_pseudo(const PipelineConfig& cfg, const Layout& at) {
  std::vector<PseudoSample> samples;
  for (const auto& dir : at.train_dirs()) {
    const ImageSequence seq = read_sequence(dir);
    for (const auto& set : read_associations(at.mined(dir))) {
      const auto t = static_cast<std::size_t>(set.frame_index);
      if (t + static_cast<std::size_t>(cfg.stride) >= seq.frames.size())
        throw IoError("association frame out of range in " + at.mined(dir).string());
      samples.push_back(build_pseudo_sample(set, seq.frames[t], seq.frames[t + static_cast<std::size_t>(cfg.stride)],
                                            cfg.pseudo));
    }
  }
  write_pseudo_samples(at.work / "pseudo", samples);
}

double stage_train_track(const PipelineConfig& cfg, const Layout& at) {
  const auto samples = read_pseudo_samples(at.work / "pseudo");
  TrackTrainReport report;
  const TrackParams net = train_tracknet(samples, cfg.tracker.train, cfg.tracker.arch, &report);
  nn::save_checkpoint(tracknet_checkpoint(net), at.work / "tracknet.ckpt");
  std::ofstream(at.work / "tracker_training.json")
      << json{{"initial_loss", report.initial_loss},
              {"final_loss", report.final_loss},
              {"epoch_losses", report.epoch_losses}}.dump(2)
      << '\n';
  return report.final_loss;
}

void stage_track(const PipelineConfig& cfg, const Layout& at) {
  const TrackParams net = tracknet_from_checkpoint(nn::load_checkpoint(at.work / "tracknet.ckpt"));
  const ImageSequence seq = read_sequence(at.test_dir());
  const auto frames = subsample_frames(seq.frames, cfg.stride);
  const TrackSet tracks =
      track_sequence(net, frames, cfg.tracker.peak_threshold, cfg.tracker.min_distance, cfg.tracker.gate_radius);
  write_tracks_csv(at.work / "tracks.csv", tracks);
}

double stored_loss(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return 0.0;
  return json::parse(in).value("final_loss", 0.0);
}

PipelineReport stage_eval(const PipelineConfig& cfg, const Layout& at) {
  const ImageSequence seq = read_sequence(at.test_dir());
  const TrackSet gt = subsample_tracks(ground_truth(seq, at.test_dir()), cfg.stride);
  const TrackSet pred = read_tracks_csv(at.work / "tracks.csv");
  PipelineReport r;
  r.tracker = evaluate_tracks(gt, pred, cfg.eval);

  std::ifstream score_in(at.mined(at.test_dir()) / "score.json");
  if (!score_in) throw IoError("missing mined score for the test sequence");
  const json s = json::parse(score_in);
  LinkScore& m = r.mined;
  m.tp = s.at("tp");
  m.fp = s.at("fp");
  m.fn = s.at("fn");
  m.gt_links = s.at("gt_links");
  m.divisions = s.at("divisions");
  m.divisions_found = s.at("divisions_found");
  m.accuracy = m.recall = m.gt_links ? double(m.tp) / m.gt_links : 1.0;
  m.precision = m.tp + m.fp ? double(m.tp) / (m.tp + m.fp) : 1.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.division_recall = m.divisions ? double(m.divisions_found) / m.divisions : 1.0;

  const CoDetectParams net = codetect_from_checkpoint(nn::load_checkpoint(at.work / "codetect.ckpt"));
  const auto frames = subsample_frames(seq.frames, cfg.stride);
  const auto detected = codetect_sequence(net, frames, cfg.bfprop.peak_threshold, cfg.bfprop.min_distance);
  std::vector<std::vector<Point2>> truth;
  for (int f = 0; f < static_cast<int>(frames.size()); ++f) truth.push_back(gt.points_in_frame(f));
  r.codetect = detection_prf(truth, detected, cfg.eval.match_radius);
  r.codetect_final_loss = stored_loss(at.work / "codetect_training.json");
  r.tracker_final_loss = stored_loss(at.work / "tracker_training.json");
  write_pipeline_report(at.work / "report.json", r);
  return r;
}

json to_json(const PipelineReport& r) {
  const EvalReport& e = r.tracker;
  return json{{"association_accuracy", e.association_accuracy},
              {"target_effectiveness", e.target_effectiveness},
              {"precision", e.precision},
              {"recall", e.recall},
              {"f1", e.f1},
              {"tp_associations", e.tp_associations},
              {"fp_associations", e.fp_associations},
              {"fn_associations", e.fn_associations},
              {"association_precision", e.association_precision},
              {"division_recall", e.division_recall},
              {"mined_association_accuracy", r.mined.accuracy},
              {"mined_precision", r.mined.precision},
              {"mined_recall", r.mined.recall},
              {"mined_f1", r.mined.f1},
              {"mined_tp", r.mined.tp},
              {"mined_fp", r.mined.fp},
              {"mined_fn", r.mined.fn},
              {"mined_division_recall", r.mined.division_recall},
              {"codetect_precision", r.codetect.precision},
              {"codetect_recall", r.codetect.recall},
              {"codetect_f1", r.codetect.f1},
              {"codetect_final_loss", r.codetect_final_loss},
              {"tracker_final_loss", r.tracker_final_loss}};
}

}  // namespace

std::vector<Image> subsample_frames(const std::vector<Image>& frames, int stride, int offset) {
  if (stride < 1) throw InputError("stride must be >= 1");
  std::vector<Image> out;
  for (std::size_t i = static_cast<std::size_t>(offset); i < frames.size(); i += static_cast<std::size_t>(stride))
    out.push_back(frames[i]);
  return out;
}

std::vector<std::vector<Point2>> codetect_sequence(const CoDetectParams& params,
                                                   const std::vector<Image>& frames,
                                                   double peak_threshold, double min_distance) {
  std::vector<std::vector<Point2>> out(frames.size());
  if (frames.size() == 1) {
    out[0] = detect_peaks(codetect_forward(params, frames[0], frames[0]).first.values, peak_threshold, min_distance);
    return out;
  }
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    auto [lt, lt1] = codetect_forward(params, frames[t], frames[t + 1]);
    out[t] = detect_peaks(lt.values, peak_threshold, min_distance);
    if (t + 2 == frames.size()) out[t + 1] = detect_peaks(lt1.values, peak_threshold, min_distance);
  }
  return out;
}

std::vector<AssociationSet> mine_sequence(const CoDetectParams& params, const std::vector<Image>& frames,
                                          int stride, const BfPropConfig& cfg) {
  if (stride < 1) throw InputError("stride must be >= 1");
  std::vector<AssociationSet> out;
  for (std::size_t t = 0; t + static_cast<std::size_t>(stride) < frames.size(); ++t) {
    AssociationSet set = mine_associations(params, frames[t], frames[t + static_cast<std::size_t>(stride)], cfg);
    set.frame_index = static_cast<int>(t);
    out.push_back(std::move(set));
  }
  return out;
}

LinkScore score_mined(const TrackSet& gt, const std::vector<AssociationSet>& sets, int stride,
                      const EvalConfig& cfg) {
  LinkScore total;
  for (int offset = 0; offset < stride; ++offset) {
    std::vector<PairLinks> links;
    for (const auto& s : sets) {
      if (s.frame_index % stride != offset) continue;
      PairLinks pl = links_from_associations(s);
      pl.frame_t = s.frame_index / stride;
      links.push_back(std::move(pl));
    }
    const TrackSet sub = subsample_tracks(gt, stride, offset);
    if (sub.frame_count() < 2) continue;
    LinkScore part;
    try {
      part = score_links(sub, links, cfg);
    } catch (const InputError&) {
      continue;  // no ground-truth links at this offset
    }
    total.tp += part.tp;
    total.fp += part.fp;
    total.fn += part.fn;
    total.gt_links += part.gt_links;
    total.divisions += part.divisions;
    total.divisions_found += part.divisions_found;
  }
  auto ratio = [](int n, int d) { return d == 0 ? 1.0 : static_cast<double>(n) / d; };
  total.accuracy = total.recall = ratio(total.tp, total.gt_links);
  total.precision = ratio(total.tp, total.tp + total.fp);
  total.f1 = total.precision + total.recall > 0.0
                 ? 2.0 * total.precision * total.recall / (total.precision + total.recall)
                 : 0.0;
  total.division_recall = ratio(total.divisions_found, total.divisions);
  return total;
}

void write_eval_report(const fs::path& path, const EvalReport& e) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << json{{"association_accuracy", e.association_accuracy},
              {"target_effectiveness", e.target_effectiveness},
              {"precision", e.precision},
              {"recall", e.recall},
              {"f1", e.f1},
              {"tp_associations", e.tp_associations},
              {"fp_associations", e.fp_associations},
              {"fn_associations", e.fn_associations},
              {"association_precision", e.association_precision},
              {"division_recall", e.division_recall}}
             .dump(2)
      << '\n';
}

void write_pipeline_report(const fs::path& path, const PipelineReport& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(report).dump(2) << '\n';
}

PipelineReport read_pipeline_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  const json j = json::parse(in);
  PipelineReport r;
  EvalReport& e = r.tracker;
  e.association_accuracy = j.at("association_accuracy");
  e.target_effectiveness = j.at("target_effectiveness");
  e.precision = j.at("precision");
  e.recall = j.at("recall");
  e.f1 = j.at("f1");
  e.tp_associations = j.at("tp_associations");
  e.fp_associations = j.at("fp_associations");
  e.fn_associations = j.at("fn_associations");
  e.association_precision = j.at("association_precision");
  e.division_recall = j.at("division_recall");
  r.mined.accuracy = r.mined.recall = j.at("mined_association_accuracy");
  r.mined.precision = j.at("mined_precision");
  r.mined.f1 = j.at("mined_f1");
  r.mined.tp = j.at("mined_tp");
  r.mined.fp = j.at("mined_fp");
  r.mined.fn = j.at("mined_fn");
  r.mined.division_recall = j.at("mined_division_recall");
  r.codetect.precision = j.at("codetect_precision");
  r.codetect.recall = j.at("codetect_recall");
  r.codetect.f1 = j.at("codetect_f1");
  r.codetect_final_loss = j.at("codetect_final_loss");
  r.tracker_final_loss = j.at("tracker_final_loss");
  return r;
}

PipelineReport run_pipeline(const PipelineConfig& cfg, const PipelineLog& log) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw StageError("config", e.what());
  }
  const Layout at{cfg.work_dir, cfg.data_dir.empty() ? cfg.work_dir / "data" : cfg.data_dir};
  fs::create_directories(at.work);
  {
    std::ofstream(at.work / "config.ini") << format_pipeline_config(cfg);
  }
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };

  PipelineReport report;
  const std::map<std::string, std::function<void()>> stages = {
      {"synth", [&] { stage_synth(cfg, at); }},
      {"points", [&] { stage_points(cfg, at); }},
      {"train-codetect", [&] { stage_train_codetect(cfg, at); }},
      {"bfprop", [&] { stage_bfprop(cfg, at); }},
      {"build-pseudo", [&] { stage_build_pseudo(cfg, at); }},
      {"train-track", [&] { stage_train_track(cfg, at); }},
      {"track", [&] { stage_track(cfg, at); }},
      {"eval", [&] { report = stage_eval(cfg, at); }},
  };
  for (const char* name : kPipelineStages) {
    const std::string stage = name;
    const bool last = stage == "eval";
    if (cfg.resume && !last && fs::exists(at.marker(stage))) {
      say(stage + ": done earlier, skipped");
      continue;
    }
    say(stage + ": running");
    bool later = false;
    for (const char* other : kPipelineStages) {
      if (later) fs::remove(at.marker(other));
      later = later || stage == other;
    }
    try {
      stages.at(stage)();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
    std::ofstream(at.marker(stage)) << "ok\n";
  }
  return report;
}

}  // namespace wsct
