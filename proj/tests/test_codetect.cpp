#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "wsct/codetect.hpp"
#include "wsct/synthdata.hpp"

using namespace wsct;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w);
  for (auto& v : img.values()) v = u(rng);
  return img;
}

CoDetectSample sample_from(const ImageSequence& seq, int t) {
  return {seq.frames[static_cast<std::size_t>(t)], seq.frames[static_cast<std::size_t>(t + 1)],
          seq.tracks->points_in_frame(t), seq.tracks->points_in_frame(t + 1)};
}

SimConfig small_sim(std::uint64_t seed) {
  SimConfig c;
  c.height = c.width = 64;
  c.n_frames = 4;
  c.initial_cells = 4;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(CoDetect, UntrainedOutputsInUnitInterval) {
  const CoDetectParams net({}, 3);
  const auto [a, b] = codetect_forward(net, random_image(64, 64, 1), random_image(64, 64, 2));
  EXPECT_EQ(a.values.height(), 64);
  EXPECT_EQ(b.values.width(), 64);
  for (float v : a.values.values()) ASSERT_TRUE(std::isfinite(v) && v > 0.0f && v < 1.0f);
  for (float v : b.values.values()) ASSERT_TRUE(std::isfinite(v) && v > 0.0f && v < 1.0f);
}

TEST(CoDetect, FullyConvolutional) {
  const CoDetectParams net({}, 3);
  EXPECT_NO_THROW(codetect_forward(net, random_image(64, 64, 1), random_image(64, 64, 2)));
  EXPECT_NO_THROW(codetect_forward(net, random_image(128, 128, 1), random_image(128, 128, 2)));
  EXPECT_NO_THROW(codetect_forward(net, random_image(64, 96, 1), random_image(64, 96, 2)));
}

TEST(CoDetect, ShapeErrors) {
  const CoDetectParams net({}, 3);
  EXPECT_THROW(codetect_forward(net, random_image(64, 64, 1), random_image(64, 80, 2)), InputError);
  EXPECT_THROW(codetect_forward(net, random_image(40, 40, 1), random_image(40, 40, 2)), InputError);
}

TEST(CoDetect, EncodersShareWeights) {
  CoDetectParams net({}, 5);
  const Image img = random_image(64, 64, 9);
  auto check = [&] {
    nn::Graph<float> g(net.params());
    const auto nodes = net.build(g, to_tensor(img), to_tensor(img));
    const auto& a = g.value(nodes.features_t);
    const auto& b = g.value(nodes.features_t1);
    ASSERT_TRUE(a.same_shape(b));
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]);
  };
  check();
  // Only one set of encoder arrays exists, so a training step moves both paths.
  EXPECT_GE(net.params().index_of("encoder.conv1.weight"), 0);
  EXPECT_LT(net.params().index_of("encoder_t1.conv1.weight"), 0);
  const auto seq = generate_sequence(small_sim(1));
  TrainConfig cfg;
  cfg.epochs = 1;
  net = train_codetect({sample_from(seq, 0)}, cfg);
  check();
}

TEST(CoDetectLoss, Examples) {
  const Image a = random_image(8, 8, 1), b = random_image(8, 8, 2);
  EXPECT_DOUBLE_EQ(codetect_loss(a, b, a, b), 0.0);
  EXPECT_NEAR(codetect_loss(Image(8, 8, 0.5f), Image(8, 8, 0.5f), Image(8, 8, 0.0f), Image(8, 8, 0.0f)), 0.5, 1e-12);
  const Image c = random_image(8, 8, 3), d = random_image(8, 8, 4);
  double want = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    want += (double(a[i]) - c[i]) * (double(a[i]) - c[i]) / 64.0;
    want += (double(b[i]) - d[i]) * (double(b[i]) - d[i]) / 64.0;
  }
  EXPECT_NEAR(codetect_loss(a, b, c, d), want, 1e-12);
  EXPECT_DOUBLE_EQ(codetect_loss(a, b, c, d), codetect_loss(b, a, d, c));
  EXPECT_THROW(codetect_loss(a, b, Image(4, 4), d), InputError);
}

TEST(DetectPeaks, SingleGaussian) {
  const Image m = render_likelihood({{20, 17}}, 6.0, 48, 48);
  const auto p = detect_peaks(m, 0.3, 6.0);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], (Point2{20, 17}));
  EXPECT_TRUE(detect_peaks(Image(16, 16, 0.0f), 0.3, 6.0).empty());
}

TEST(DetectPeaks, TwoGaussiansMatchExhaustiveScan) {
  const Image m = render_likelihood({{10, 20}, {30, 20}}, 4.0, 40, 40);
  const auto got = detect_peaks(m, 0.3, 5.0);
  std::vector<Point2> oracle;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      if (!(m.at(x, y) > 0.3f)) continue;
      bool top = true;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (m.contains(x + dx, y + dy) && m.at(x + dx, y + dy) > m.at(x, y)) top = false;
      if (top) oracle.push_back({double(x), double(y)});
    }
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(oracle.size(), 2u);
  for (const auto& p : oracle) EXPECT_NE(std::find(got.begin(), got.end(), p), got.end());
}

TEST(DetectPeaks, SeparationOrderAndThreshold) {
  const Image m = random_image(40, 40, 8);
  const auto p = detect_peaks(m, 0.6, 4.0);
  ASSERT_FALSE(p.empty());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_GT(m.at(int(p[i].x), int(p[i].y)), 0.6f);
    if (i) EXPECT_GE(m.at(int(p[i - 1].x), int(p[i - 1].y)), m.at(int(p[i].x), int(p[i].y)));
    for (std::size_t j = i + 1; j < p.size(); ++j) EXPECT_GE(squared_distance(p[i], p[j]), 16.0);
  }
}

TEST(TrainCoDetect, OverfitsOneSample) {
  const auto seq = generate_sequence(small_sim(2));
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.augment = false;
  TrainReport report;
  train_codetect({sample_from(seq, 0)}, cfg, {}, &report);
  EXPECT_LE(report.final_loss * 10.0, report.initial_loss)
      << report.initial_loss << " -> " << report.final_loss;
  EXPECT_EQ(report.epoch_losses.size(), 200u);
}

TEST(TrainCoDetect, DeterministicForSeed) {
  const auto seq = generate_sequence(small_sim(3));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 4;
  const std::vector<CoDetectSample> data = {sample_from(seq, 0), sample_from(seq, 1)};
  const auto a = train_codetect(data, cfg);
  const auto b = train_codetect(data, cfg);
  for (int i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].values, b.params()[i].values);
}

TEST(TrainCoDetect, RejectsBadInput) {
  EXPECT_THROW(train_codetect({}, TrainConfig{}), TrainingError);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  const auto seq = generate_sequence(small_sim(3));
  EXPECT_THROW(train_codetect({sample_from(seq, 0)}, bad), ConfigError);
  CoDetectSample poisoned = sample_from(seq, 0);
  poisoned.image_t.at(3, 3) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train_codetect({poisoned}, TrainConfig{}), TrainingError);
}

TEST(CoDetectCheckpoint, RoundTripKeepsOutputs) {
  const CoDetectParams net({}, 12);
  const auto restored = codetect_from_checkpoint(codetect_checkpoint(net));
  const Image a = random_image(64, 64, 1), b = random_image(64, 64, 2);
  EXPECT_EQ(codetect_forward(net, a, b).first.values, codetect_forward(restored, a, b).first.values);
  nn::Checkpoint wrong = codetect_checkpoint(net);
  wrong.kind = "tracknet";
  EXPECT_THROW(codetect_from_checkpoint(wrong), IoError);
}
