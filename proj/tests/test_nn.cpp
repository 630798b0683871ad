#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "wsct/nn/graph.hpp"

using namespace wsct;
using namespace wsct::nn;

namespace {

using Builder = std::function<NodeId(Graph<double>&, NodeId)>;

Tensor<double> random_tensor(int c, int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(c, h, w);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

double objective(const ParamStore<double>& params, const Builder& build, const Tensor<double>& x,
                 const Tensor<double>& seed) {
  Graph<double> g(params);
  const NodeId out = build(g, g.input(x));
  double s = 0.0;
  for (std::size_t i = 0; i < seed.size(); ++i) s += g.value(out).data()[i] * seed.data()[i];
  return s;
}

// Compares input and parameter gradients of <build(x), seed> with central
// differences.
void check_gradients(ParamStore<double>& params, const Builder& build, Tensor<double> x, double tol = 1e-6) {
  std::mt19937_64 rng(17);
  Graph<double> g(params);
  const NodeId in = g.input(x);
  const NodeId out = build(g, in);
  const Tensor<double> seed = random_tensor(g.value(out).channels(), g.value(out).height(), g.value(out).width(), rng);
  ParamGrads<double> grads(params);
  g.backward(out, seed, BackwardMode::kGradient, &grads);
  const double h = 1e-6;

  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor<double> xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double fd = (objective(params, build, xp, seed) - objective(params, build, xm, seed)) / (2 * h);
    const double an = g.signal(in).empty() ? 0.0 : g.signal(in).data()[i];
    ASSERT_NEAR(an, fd, tol * std::max(1.0, std::abs(fd))) << "input " << i;
  }
  for (int p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].values.size(); ++i) {
      const double keep = params[p].values[i];
      params[p].values[i] = keep + h;
      const double fp = objective(params, build, x, seed);
      params[p].values[i] = keep - h;
      const double fm = objective(params, build, x, seed);
      params[p].values[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      ASSERT_NEAR(grads.values[static_cast<std::size_t>(p)][i], fd, tol * std::max(1.0, std::abs(fd)))
          << params[p].name << "[" << i << "]";
    }
}

}  // namespace

TEST(Graph, ConvGradients) {
  std::mt19937_64 rng(1);
  ParamStore<double> params;
  const auto c3 = add_conv<double>(params, rng, "c3", 2, 3, 3, 0.1);
  const auto c1 = add_conv<double>(params, rng, "c1", 3, 2, 1, -0.2);
  check_gradients(params, [&](Graph<double>& g, NodeId x) { return g.conv(g.conv(x, c3), c1); },
                  random_tensor(2, 5, 6, rng));
}

TEST(Graph, PoolUpsampleConcatSliceGradients) {
  std::mt19937_64 rng(2);
  ParamStore<double> params;
  const auto c = add_conv<double>(params, rng, "c", 4, 2, 3);
  check_gradients(params,
                  [&](Graph<double>& g, NodeId x) {
                    const NodeId up = g.upsample2(g.maxpool2(x));
                    return g.slice(g.conv(g.concat(up, x), c), 1, 1);
                  },
                  random_tensor(2, 4, 6, rng));
}

TEST(Graph, ActivationGradients) {
  std::mt19937_64 rng(3);
  ParamStore<double> params;
  const auto c = add_conv<double>(params, rng, "c", 1, 3, 3);
  check_gradients(params,
                  [&](Graph<double>& g, NodeId x) {
                    const NodeId a = g.conv(x, c);
                    return g.concat(g.sigmoid(g.relu(a)), g.tanh(a));
                  },
                  random_tensor(1, 5, 5, rng));
}

TEST(Graph, GuidedRuleAtARectifier) {
  ParamStore<double> params;
  Graph<double> g(params);
  Tensor<double> x(1, 1, 4);
  x.values()[0] = -1.0;  // pre <= 0
  x.values()[1] = 0.0;
  x.values()[2] = 2.0;   // pre > 0, signal > 0
  x.values()[3] = 3.0;   // pre > 0, signal < 0
  const NodeId in = g.input(x);
  const NodeId r = g.relu(in);
  Tensor<double> seed(1, 1, 4);
  seed.values()[0] = 1.0;
  seed.values()[1] = 1.0;
  seed.values()[2] = 0.5;
  seed.values()[3] = -0.5;
  g.backward(r, seed, BackwardMode::kGuided);
  EXPECT_EQ(g.signal(in).values()[0], 0.0);
  EXPECT_EQ(g.signal(in).values()[1], 0.0);
  EXPECT_EQ(g.signal(in).values()[2], 0.5);
  EXPECT_EQ(g.signal(in).values()[3], 0.0);
  g.backward(r, seed, BackwardMode::kGradient);
  EXPECT_EQ(g.signal(in).values()[3], -0.5);
}

TEST(Graph, RectifierTracesRecordGating) {
  std::mt19937_64 rng(4);
  ParamStore<double> params;
  const auto c1 = add_conv<double>(params, rng, "c1", 1, 4, 3);
  const auto c2 = add_conv<double>(params, rng, "c2", 4, 1, 3);
  Graph<double> g(params);
  g.set_trace_rectifiers(true);
  const NodeId out = g.conv(g.relu(g.conv(g.input(random_tensor(1, 6, 6, rng)), c1)), c2);
  g.backward(out, random_tensor(1, 6, 6, rng), BackwardMode::kGuided);
  ASSERT_EQ(g.rectifier_traces().size(), 1u);
  const auto& tr = g.rectifier_traces()[0];
  for (std::size_t i = 0; i < tr.gated.size(); ++i) {
    EXPECT_GE(tr.gated.data()[i], 0.0);
    if (tr.pre_activation->data()[i] <= 0.0) EXPECT_EQ(tr.gated.data()[i], 0.0);
  }
}

TEST(Graph, ShapeErrors) {
  std::mt19937_64 rng(5);
  ParamStore<double> params;
  const auto c = add_conv<double>(params, rng, "c", 2, 1, 3);
  Graph<double> g(params);
  const NodeId x = g.input(Tensor<double>(1, 3, 3));
  EXPECT_THROW(g.conv(x, c), InputError);
  EXPECT_THROW(g.maxpool2(x), InputError);
  EXPECT_THROW(g.concat(x, g.input(Tensor<double>(1, 4, 4))), InputError);
  EXPECT_THROW(g.slice(x, 0, 2), InputError);
  EXPECT_THROW(g.backward(x, Tensor<double>(1, 2, 2), BackwardMode::kGradient), InputError);
}

TEST(Adam, MinimisesAQuadratic) {
  ParamStore<double> params;
  params.add("w", {3}, 2.0);
  Adam<double> adam(params, 0.1);
  ParamGrads<double> grads(params);
  for (int step = 0; step < 300; ++step) {
    for (std::size_t i = 0; i < 3; ++i) grads.values[0][i] = 2.0 * (params[0].values[i] - 0.5);
    adam.step(params, grads);
  }
  for (double v : params[0].values) EXPECT_NEAR(v, 0.5, 1e-2);
  EXPECT_EQ(adam.steps(), 300);
}

TEST(Checkpoint, RoundTrip) {
  std::mt19937_64 rng(6);
  Checkpoint ckpt;
  ckpt.kind = "test";
  ckpt.metadata = {{"a", "1"}, {"b", "two"}};
  add_conv<float>(ckpt.params, rng, "layer", 2, 3, 3, 0.25f);
  const auto path = std::filesystem::temp_directory_path() / "wsct_ckpt_roundtrip.bin";
  save_checkpoint(ckpt, path.string());
  const Checkpoint back = load_checkpoint(path.string());
  EXPECT_EQ(back.kind, "test");
  EXPECT_EQ(back.metadata, ckpt.metadata);
  ASSERT_EQ(back.params.size(), ckpt.params.size());
  for (int i = 0; i < back.params.size(); ++i) {
    EXPECT_EQ(back.params[i].name, ckpt.params[i].name);
    EXPECT_EQ(back.params[i].shape, ckpt.params[i].shape);
    EXPECT_EQ(back.params[i].values, ckpt.params[i].values);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignAndTruncatedFiles) {
  const auto path = std::filesystem::temp_directory_path() / "wsct_not_a_ckpt.bin";
  std::ofstream(path) << "hello world, not a checkpoint";
  EXPECT_THROW(load_checkpoint(path.string()), IoError);
  std::ofstream(path, std::ios::binary) << "WSCTCKPT";
  EXPECT_THROW(load_checkpoint(path.string()), IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), IoError);
}

TEST(ParamStore, AssignFromChecksNames) {
  std::mt19937_64 rng(7);
  ParamStore<float> a, b;
  add_conv<float>(a, rng, "x", 1, 1, 3);
  add_conv<float>(b, rng, "y", 1, 1, 3);
  EXPECT_THROW(a.assign_from(b), InputError);
  ParamStore<double> d;
  add_conv<double>(d, rng, "x", 1, 1, 3);
  d.assign_from(a);
  EXPECT_EQ(static_cast<float>(d[0].values[4]), a[0].values[4]);
}
