#include "wsct/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace wsct {

namespace {

namespace pt = boost::property_tree;

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string describe(const std::string& section, const std::string& key) { return section + "." + key; }

void parse_value(const std::string& where, const std::string& text, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + text + "'");
  }
}

void parse_value(const std::string& where, const std::string& text, int& out) {
  double v = 0.0;
  parse_value(where, text, v);
  if (v != static_cast<int>(v)) throw ConfigError(where + ": expected an integer, got '" + text + "'");
  out = static_cast<int>(v);
}

void parse_value(const std::string& where, const std::string& text, std::uint64_t& out) {
  try {
    std::size_t used = 0;
    out = std::stoull(text, &used);
    if (used != text.size() || text.starts_with('-')) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a non-negative integer, got '" + text + "'");
  }
}

void parse_value(const std::string& where, const std::string& text, bool& out) {
  const std::string t = lower(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") out = true;
  else if (t == "false" || t == "0" || t == "no" || t == "off") out = false;
  else throw ConfigError(where + ": expected a boolean, got '" + text + "'");
}

void parse_value(const std::string&, const std::string& text, std::filesystem::path& out) { out = text; }

void parse_value(const std::string& where, const std::string& text, IntensityProfile& out) {
  const std::string t = lower(text);
  if (t == "blob") out = IntensityProfile::kBlob;
  else if (t == "ring") out = IntensityProfile::kRing;
  else throw ConfigError(where + ": expected blob or ring, got '" + text + "'");
}

void parse_value(const std::string& where, const std::string& text, PointSource& out) {
  const std::string t = lower(text);
  if (t == "tracks") out = PointSource::kTracks;
  else if (t == "fluorescence") out = PointSource::kFluorescence;
  else throw ConfigError(where + ": expected tracks or fluorescence, got '" + text + "'");
}

std::string show(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string show(int v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(const std::filesystem::path& v) { return v.string(); }
std::string show(IntensityProfile v) { return v == IntensityProfile::kRing ? "ring" : "blob"; }
std::string show(PointSource v) { return v == PointSource::kFluorescence ? "fluorescence" : "tracks"; }

// Calls visit(section, key, field) for every setting.
template <typename Visit>
void bind(PipelineConfig& c, Visit&& visit) {
  visit("pipeline", "work_dir", c.work_dir);
  visit("pipeline", "data_dir", c.data_dir);
  visit("pipeline", "seed", c.seed);
  visit("pipeline", "train_sequences", c.train_sequences);
  visit("pipeline", "stride", c.stride);
  visit("pipeline", "resume", c.resume);
  visit("pipeline", "point_source", c.point_source);
  visit("pipeline", "fluo_threshold", c.fluo_threshold);
  visit("pipeline", "fluo_min_area", c.fluo_min_area);

  visit("sim", "height", c.sim.height);
  visit("sim", "width", c.sim.width);
  visit("sim", "frames", c.sim.n_frames);
  visit("sim", "cells", c.sim.initial_cells);
  visit("sim", "motion_sigma", c.sim.motion_sigma);
  visit("sim", "division_prob", c.sim.division_prob);
  visit("sim", "radius_min", c.sim.radius_min);
  visit("sim", "radius_max", c.sim.radius_max);
  visit("sim", "profile", c.sim.profile);
  visit("sim", "noise_sigma", c.sim.noise_sigma);

  visit("codetect", "learning_rate", c.codetect.learning_rate);
  visit("codetect", "epochs", c.codetect.epochs);
  visit("codetect", "batch_size", c.codetect.batch_size);
  visit("codetect", "sigma", c.codetect.sigma);
  visit("codetect", "augment", c.codetect.augment);

  visit("bfprop", "th", c.bfprop.th);
  visit("bfprop", "th_conf", c.bfprop.th_conf);
  visit("bfprop", "radius", c.bfprop.radius);
  visit("bfprop", "sigma", c.bfprop.sigma);
  visit("bfprop", "peak_threshold", c.bfprop.peak_threshold);
  visit("bfprop", "min_distance", c.bfprop.min_distance);

  visit("pseudo", "sigma", c.pseudo.sigma);
  visit("pseudo", "radius", c.pseudo.radius);
  visit("pseudo", "motion_scale", c.pseudo.motion_scale);

  visit("tracker", "learning_rate", c.tracker.train.learning_rate);
  visit("tracker", "epochs", c.tracker.train.epochs);
  visit("tracker", "batch_size", c.tracker.train.batch_size);
  visit("tracker", "augment", c.tracker.train.augment);
  visit("tracker", "width", c.tracker.arch.width);
  visit("tracker", "peak_threshold", c.tracker.peak_threshold);
  visit("tracker", "min_distance", c.tracker.min_distance);
  visit("tracker", "gate_radius", c.tracker.gate_radius);

  visit("eval", "match_radius", c.eval.match_radius);
}

void apply_env(PipelineConfig& cfg) {
  bind(cfg, [](const std::string& section, const std::string& key, auto& field) {
    const std::string name = "WSCT_" + upper(section) + "_" + upper(key);
    if (const char* v = std::getenv(name.c_str())) parse_value(name, v, field);
  });
}

// Derived settings that are not separate keys.
void finish(PipelineConfig& cfg) {
  cfg.sim.seed = cfg.seed;
  cfg.codetect.seed = cfg.seed;
  cfg.tracker.train.seed = cfg.seed + 1;
  cfg.tracker.arch.motion_scale = cfg.pseudo.motion_scale;
}

PipelineConfig from_tree(const pt::ptree& tree, bool use_env) {
  PipelineConfig cfg;
  std::map<std::string, std::set<std::string>> known;
  bind(cfg, [&](const std::string& section, const std::string& key, auto&) { known[section].insert(key); });
  for (const auto& [section, body] : tree) {
    if (!known.count(section)) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : body)
      if (!known[section].count(key)) throw ConfigError("unknown config key " + describe(section, key));
  }
  bind(cfg, [&](const std::string& section, const std::string& key, auto& field) {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(section + "." + key, '.')))
      parse_value(describe(section, key), *v, field);
  });
  if (use_env) apply_env(cfg);
  finish(cfg);
  cfg.validate();
  return cfg;
}

}  // namespace

void PipelineConfig::validate() const {
  if (work_dir.empty()) throw ConfigError("pipeline.work_dir must be set");
  if (train_sequences < 1) throw ConfigError("pipeline.train_sequences must be >= 1");
  if (stride < 1) throw ConfigError("pipeline.stride must be >= 1");
  if (stride >= sim.n_frames) throw ConfigError("pipeline.stride must be smaller than sim.frames");
  if (!(fluo_threshold > 0.0 && fluo_threshold < 1.0))
    throw ConfigError("pipeline.fluo_threshold must lie in (0,1)");
  if (fluo_min_area < 1) throw ConfigError("pipeline.fluo_min_area must be >= 1");
  sim.validate();
  codetect.validate();
  bfprop.validate();
  pseudo.validate();
  tracker.train.validate();
  if (tracker.arch.width < 1) throw ConfigError("tracker.width must be >= 1");
  if (!(tracker.peak_threshold > 0.0 && tracker.peak_threshold < 1.0))
    throw ConfigError("tracker.peak_threshold must lie in (0,1)");
  if (!(tracker.gate_radius > 0.0)) throw ConfigError("tracker.gate_radius must be > 0");
  eval.validate();
}

PipelineConfig parse_pipeline_config(const std::string& ini_text, bool use_env) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  return from_tree(tree, use_env);
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path, bool use_env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_pipeline_config(text.str(), use_env);
}

std::string format_pipeline_config(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  std::ostringstream out;
  std::string current;
  bind(copy, [&](const std::string& section, const std::string& key, auto& field) {
    if (section != current) {
      out << (current.empty() ? "" : "\n") << '[' << section << "]\n";
      current = section;
    }
    out << key << " = " << show(field) << '\n';
  });
  return out.str();
}

}  // namespace wsct
