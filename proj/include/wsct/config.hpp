#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "wsct/bfprop.hpp"
#include "wsct/codetect.hpp"
#include "wsct/metrics.hpp"
#include "wsct/pseudo.hpp"
#include "wsct/synthdata.hpp"
#include "wsct/tracknet.hpp"

namespace wsct {

enum class PointSource { kTracks, kFluorescence };

struct TrackerSettings {
  TrainConfig train;
  TrackArch arch;
  double peak_threshold = 0.3;
  double min_distance = 6.0;
  double gate_radius = 18.0;
};

struct PipelineConfig {
  std::filesystem::path work_dir = "run";
  std::filesystem::path data_dir;  // empty: simulate into work_dir/data
  std::uint64_t seed = 0;
  int train_sequences = 2;
  int stride = 1;
  bool resume = true;
  PointSource point_source = PointSource::kTracks;
  double fluo_threshold = 0.3;
  int fluo_min_area = 5;

  SimConfig sim;
  TrainConfig codetect;
  CoDetectArch codetect_arch;
  BfPropConfig bfprop;
  PseudoConfig pseudo;
  TrackerSettings tracker;
  EvalConfig eval;

  void validate() const;  // throws ConfigError
};

// INI file with sections [pipeline] [sim] [codetect] [bfprop] [pseudo]
// [tracker] [eval]. Unknown keys are errors. Afterwards every key can be
// overridden by an environment variable WSCT_<SECTION>_<KEY> (upper case),
// e.g. WSCT_CODETECT_EPOCHS=5.
PipelineConfig load_pipeline_config(const std::filesystem::path& path, bool use_env = true);
PipelineConfig parse_pipeline_config(const std::string& ini_text, bool use_env = true);
// Every setting, in the file format above.
std::string format_pipeline_config(const PipelineConfig& cfg);

}  // namespace wsct
