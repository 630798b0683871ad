#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wsct/pseudo.hpp"

using namespace wsct;

namespace {

AssociationSet one_pair(Point2 det_t, Point2 cell_t1, int h, int w) {
  AssociationSet a;
  a.detections_t = {det_t};
  a.cells_t1 = {cell_t1};
  a.pairs = {{0, 0, 0.0, 1.0}};
  a.gamma = Mask(h, w, 0);
  return a;
}

MotionPositionMap random_map(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  MotionPositionMap m(h, w);
  for (auto* img : {&m.position, &m.motion_x, &m.motion_y})
    for (auto& v : img->values()) v = u(rng);
  return m;
}

PseudoSample random_sample(int h, int w, std::mt19937_64& rng, double mask_share) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  PseudoSample s{Image(h, w), Image(h, w), random_map(h, w, rng), Mask(h, w, 0)};
  for (auto& v : s.target.position.values()) v = u(rng);
  for (auto& v : s.ignore_mask.values()) v = u(rng) < mask_share ? 1 : 0;
  return s;
}

double naive_loss(const MotionPositionMap& pred, const PseudoSample& s) {
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      if (s.ignore_mask.at(x, y)) continue;
      ++n;
      const double dp = double(pred.position.at(x, y)) - s.target.position.at(x, y);
      sum += dp * dp;
      if (s.target.position.at(x, y) > 0.05) {
        const double dx = double(pred.motion_x.at(x, y)) - s.target.motion_x.at(x, y);
        const double dy = double(pred.motion_y.at(x, y)) - s.target.motion_y.at(x, y);
        sum += (dx * dx + dy * dy) / 2.0;
      }
    }
  return n ? sum / n : 0.0;
}

}  // namespace

TEST(PseudoSample, ZeroDisplacementGivesZeroMotion) {
  const auto s = build_pseudo_sample(one_pair({20, 20}, {20, 20}, 40, 40), Image(40, 40), Image(40, 40), {});
  for (float v : s.target.motion_x.values()) EXPECT_EQ(v, 0.0f);
  for (float v : s.target.motion_y.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_FLOAT_EQ(s.target.position.at(20, 20), 1.0f);
}

TEST(PseudoSample, ScaledDisplacementInsideDisk) {
  // t position (26, 17), t+1 cell at (20, 20): displacement (6, -3).
  const auto s = build_pseudo_sample(one_pair({26, 17}, {20, 20}, 50, 50), Image(50, 50), Image(50, 50), {});
  for (int y = 0; y < 50; ++y)
    for (int x = 0; x < 50; ++x) {
      const bool inside = (x - 20) * (x - 20) + (y - 20) * (y - 20) <= 18 * 18;
      EXPECT_FLOAT_EQ(s.target.motion_x.at(x, y), inside ? 0.2f : 0.0f);
      EXPECT_FLOAT_EQ(s.target.motion_y.at(x, y), inside ? -0.1f : 0.0f);
    }
}

TEST(PseudoSample, LongDisplacementIsClamped) {
  PseudoConfig cfg;
  cfg.motion_scale = 5.0;
  const auto s = build_pseudo_sample(one_pair({40, 40}, {10, 10}, 50, 50), Image(50, 50), Image(50, 50), cfg);
  const double n = std::hypot(s.target.motion_x.at(10, 10), s.target.motion_y.at(10, 10));
  EXPECT_NEAR(n, 1.0, 1e-6);
}

TEST(PseudoSample, DivisionChildGoesToIgnoreMask) {
  const int h = 64, w = 64;
  AssociationSet a;
  a.detections_t = {{30, 30}};
  a.cells_t1 = {{22, 30}, {40, 30}};
  a.pairs = {{0, 0, 0.01, 0.9}};
  a.gamma = Mask(h, w, 0);
  const auto region = TargetRegion::make(1, a.cells_t1[1], 18.0, h, w);
  for (int i : region.pixels) a.gamma[static_cast<std::size_t>(i)] = 1;
  const auto s = build_pseudo_sample(a, Image(h, w), Image(h, w), {});
  // The unmatched child is not a positive.
  EXPECT_LT(s.target.position.at(40, 30), 0.5f);
  EXPECT_FLOAT_EQ(s.target.position.at(22, 30), 1.0f);
  // Far side of the unmatched child's region stays ignored, the matched
  // cell's own disk never is.
  EXPECT_EQ(s.ignore_mask.at(50, 30), 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x - 22) * (x - 22) + (y - 30) * (y - 30) <= 18 * 18) EXPECT_EQ(s.ignore_mask.at(x, y), 0);
}

TEST(PseudoSample, OverlapGoesToNearerCell) {
  AssociationSet a;
  a.detections_t = {{10, 20}, {40, 20}};
  a.cells_t1 = {{16, 20}, {28, 20}};
  a.pairs = {{0, 0, 0.0, 1.0}, {1, 1, 0.0, 1.0}};
  const auto s = build_pseudo_sample(a, Image(40, 50), Image(40, 50), {});
  EXPECT_FLOAT_EQ(s.target.motion_x.at(21, 20), -0.2f);  // nearer to (16,20)
  EXPECT_FLOAT_EQ(s.target.motion_x.at(23, 20), 0.4f);   // nearer to (28,20)
  EXPECT_FLOAT_EQ(s.target.motion_x.at(22, 20), -0.2f);  // tie: lower index
}

TEST(PseudoSample, Invariants) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 64, w = 64;
    AssociationSet a;
    for (int i = 0; i < 5; ++i) {
      a.detections_t.push_back({double(rng() % 64), double(rng() % 64)});
      a.cells_t1.push_back({double(rng() % 64), double(rng() % 64)});
    }
    a.pairs = {{0, 1, 0, 1}, {2, 0, 0, 1}, {3, 4, 0, 1}};
    a.gamma = Mask(h, w, 0);
    for (int c : {1, 4})
      for (int i : TargetRegion::make(c, a.cells_t1[static_cast<std::size_t>(c)], 18, h, w).pixels)
        a.gamma[static_cast<std::size_t>(i)] = 1;
    const auto s = build_pseudo_sample(a, Image(h, w), Image(h, w), {});
    for (int c : {0, 2, 3}) {
      const auto region = TargetRegion::make(c, a.cells_t1[static_cast<std::size_t>(c)], 18, h, w);
      for (int i : region.pixels) EXPECT_EQ(s.ignore_mask[static_cast<std::size_t>(i)], 0);
    }
    for (std::size_t i = 0; i < s.ignore_mask.size(); ++i) {
      EXPECT_LE(std::hypot(s.target.motion_x[i], s.target.motion_y[i]), 1.0 + 1e-6);
      // a supervised positive never sits in the ignored region
      if (s.ignore_mask[i]) EXPECT_LT(s.target.position[i], 1.0f);
    }
  }
}

TEST(PseudoSample, Errors) {
  EXPECT_THROW(build_pseudo_sample({}, Image(4, 4), Image(4, 5), {}), InputError);
  PseudoConfig bad;
  bad.motion_scale = 0;
  EXPECT_THROW(build_pseudo_sample({}, Image(4, 4), Image(4, 4), bad), ConfigError);
}

TEST(MaskedLoss, PerfectPredictionIsZero) {
  std::mt19937_64 rng(4);
  auto s = random_sample(10, 12, rng, 0.0);
  EXPECT_EQ(masked_loss(s.target, s).total, 0.0);
}

TEST(MaskedLoss, FullyMaskedIsZero) {
  std::mt19937_64 rng(5);
  auto s = random_sample(10, 12, rng, 2.0);
  const auto r = masked_loss(random_map(10, 12, rng), s);
  EXPECT_EQ(r.total, 0.0);
  EXPECT_EQ(r.masked_fraction, 1.0);
}

TEST(MaskedLoss, MatchesNaiveLoop) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = random_sample(9, 11, rng, 0.5);
    const auto pred = random_map(9, 11, rng);
    const auto r = masked_loss(pred, s);
    EXPECT_NEAR(r.total, naive_loss(pred, s), 1e-9);
    int masked = 0;
    for (auto v : s.ignore_mask.values()) masked += v;
    EXPECT_NEAR(r.masked_fraction, masked / 99.0, 1e-12);
    EXPECT_GE(r.total, 0.0);
  }
}

TEST(MaskedLoss, EmptyMaskEqualsUnmaskedLoss) {
  std::mt19937_64 rng(7);
  auto s = random_sample(8, 8, rng, 0.0);
  const auto pred = random_map(8, 8, rng);
  auto unmasked = s;
  unmasked.ignore_mask = Mask();
  EXPECT_DOUBLE_EQ(masked_loss(pred, s).total, masked_loss(pred, unmasked).total);
}

TEST(MaskedLoss, GradientMatchesFiniteDifferencesAndVanishesOnMask) {
  std::mt19937_64 rng(8);
  auto s = random_sample(7, 9, rng, 0.4);
  auto pred = random_map(7, 9, rng);
  MotionPositionMap grad;
  masked_loss(pred, s, &grad);
  const float eps = 1e-2f;
  for (std::size_t i = 0; i < s.ignore_mask.size(); ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      Image& p = ch == 0 ? pred.position : ch == 1 ? pred.motion_x : pred.motion_y;
      const Image& g = ch == 0 ? grad.position : ch == 1 ? grad.motion_x : grad.motion_y;
      const float keep = p[i];
      p[i] = keep + eps;
      const double up = masked_loss(pred, s).total;
      p[i] = keep - eps;
      const double down = masked_loss(pred, s).total;
      p[i] = keep;
      const double fd = (up - down) / (2.0 * eps);
      if (s.ignore_mask[i]) {
        EXPECT_EQ(fd, 0.0);
        EXPECT_EQ(g[i], 0.0f);
      } else {
        EXPECT_NEAR(g[i], fd, 1e-4);
      }
    }
  }
}

TEST(MaskedLoss, ShapeMismatch) {
  PseudoSample s{Image(), Image(), MotionPositionMap(4, 4), Mask(4, 4, 0)};
  EXPECT_THROW(masked_loss(MotionPositionMap(4, 5), s), InputError);
}
