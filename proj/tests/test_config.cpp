#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "scratch_dir.hpp"
#include "wsct/config.hpp"

using namespace wsct;

namespace {

struct EnvGuard {
  std::string name;
  EnvGuard(std::string n, const char* value) : name(std::move(n)) { ::setenv(name.c_str(), value, 1); }
  ~EnvGuard() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST(Config, DefaultsFromEmptyText) {
  const auto c = parse_pipeline_config("", false);
  EXPECT_EQ(c.bfprop.th, 0.01);
  EXPECT_EQ(c.bfprop.th_conf, 0.5);
  EXPECT_EQ(c.bfprop.radius, 18.0);
  EXPECT_EQ(c.eval.match_radius, 10.0);
  EXPECT_EQ(c.codetect.learning_rate, 1e-3);
  EXPECT_EQ(c.stride, 1);
}

TEST(Config, ParsesSectionsAndDerivesSeeds) {
  const auto c = parse_pipeline_config(R"([pipeline]
seed = 42
stride = 3
point_source = fluorescence
[sim]
height = 64
width = 96
frames = 8
profile = ring
[codetect]
epochs = 7
augment = no
[bfprop]
th_conf = 0.4
[pseudo]
motion_scale = 20
[tracker]
width = 4
gate_radius = 12.5
)",
                                       false);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.stride, 3);
  EXPECT_EQ(c.point_source, PointSource::kFluorescence);
  EXPECT_EQ(c.sim.width, 96);
  EXPECT_EQ(c.sim.profile, IntensityProfile::kRing);
  EXPECT_EQ(c.codetect.epochs, 7);
  EXPECT_FALSE(c.codetect.augment);
  EXPECT_EQ(c.bfprop.th_conf, 0.4);
  EXPECT_EQ(c.tracker.arch.width, 4);
  EXPECT_EQ(c.tracker.gate_radius, 12.5);
  EXPECT_EQ(c.sim.seed, 42u);
  EXPECT_EQ(c.codetect.seed, 42u);
  EXPECT_EQ(c.tracker.arch.motion_scale, 20.0);
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_pipeline_config("[nope]\na = 1\n", false), ConfigError);
  EXPECT_THROW(parse_pipeline_config("[sim]\ncolour = 1\n", false), ConfigError);
  EXPECT_THROW(parse_pipeline_config("[sim]\nheight = tall\n", false), ConfigError);
  EXPECT_THROW(parse_pipeline_config("[sim]\nheight = 12.5\n", false), ConfigError);
  EXPECT_THROW(parse_pipeline_config("[codetect]\naugment = maybe\n", false), ConfigError);
  EXPECT_THROW(parse_pipeline_config("[bfprop]\nth_conf = 1.5\n", false), ConfigError);
  EXPECT_THROW(parse_pipeline_config("[pipeline]\nstride = 0\n", false), ConfigError);
  EXPECT_THROW(parse_pipeline_config("[sim\nheight = 3\n", false), ConfigError);
}

TEST(Config, EnvironmentOverrides) {
  EnvGuard a("WSCT_CODETECT_EPOCHS", "5");
  EnvGuard b("WSCT_BFPROP_TH", "0.2");
  const auto c = parse_pipeline_config("[codetect]\nepochs = 9\n", true);
  EXPECT_EQ(c.codetect.epochs, 5);
  EXPECT_EQ(c.bfprop.th, 0.2);
  EXPECT_EQ(parse_pipeline_config("[codetect]\nepochs = 9\n", false).codetect.epochs, 9);
  EnvGuard bad("WSCT_SIM_HEIGHT", "x");
  EXPECT_THROW(parse_pipeline_config("", true), ConfigError);
}

TEST(Config, FormatRoundTrips) {
  auto c = parse_pipeline_config("[pipeline]\nseed = 3\n[bfprop]\nth = 0.07\n[sim]\nnoise_sigma = 0.1\n", false);
  const auto again = parse_pipeline_config(format_pipeline_config(c), false);
  EXPECT_EQ(format_pipeline_config(again), format_pipeline_config(c));
  EXPECT_EQ(again.bfprop.th, 0.07);
  EXPECT_EQ(again.sim.noise_sigma, 0.1);
}

using ConfigFile = ScratchDir;

TEST_F(ConfigFile, LoadFromDisk) {
  std::ofstream(dir() / "c.ini") << "[sim]\ncells = 9\n";
  EXPECT_EQ(load_pipeline_config(dir() / "c.ini", false).sim.initial_cells, 9);
  EXPECT_THROW(load_pipeline_config(dir() / "missing.ini", false), ConfigError);
}
