// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "wsct/metrics.hpp"
#include "wsct/pipeline.hpp"
#include "wsct/pseudo.hpp"
#include "wsct/runtime.hpp"

using namespace wsct;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Image random_image(int h, int w, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Image img(h, w);
  for (auto& v : img.values()) v = u(rng);
  return img;
}

// 1. Matching against exhaustive enumeration.
Outcome lp_matching() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6), m = 1 + static_cast<int>(rng() % 6);
    std::vector<Image> responses;
    for (int i = 0; i < n; ++i) responses.push_back(random_image(24, 24, rng));
    std::vector<Point2> dets;
    for (int j = 0; j < m; ++j) dets.push_back({double(rng() % 24), double(rng() % 24)});
    const double sigma = 4.0, radius = 6.0;
    const AssociationSet set = match_one_by_one(responses, dets, sigma, radius);

    const CostMatrix cost = matching_costs(responses, dets, sigma, radius);
    const CostMatrix blank = matching_costs({Image(24, 24, 0.0f)}, dets, sigma, radius);
    double skip = blank(0, 0);
    for (int j = 1; j < m; ++j) skip = std::min(skip, blank(0, j));
    double got = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto* p = set.pair_for_cell(i);
      got += p ? p->cost : skip;
    }
    const double want = oracle::brute_force_partial_assignment(cost, std::vector<double>(static_cast<std::size_t>(n), skip));
    if (got != want) ++mismatches;

    // The rectangular solver on a raw random matrix, every pair forced.
    CostMatrix raw(n, m);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : raw.values) v = u(rng);
    const Assignment a = solve_assignment(raw);
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      if (a.row_to_col[static_cast<std::size_t>(i)] >= 0) sum += raw(i, a.row_to_col[static_cast<std::size_t>(i)]);
    if (std::abs(sum - oracle::brute_force_assignment(raw)) > 1e-12) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0, fmt("200 instances, %d mismatches, %.2f s", mismatches, secs)};
}

// 2. Guided backpropagation.
Outcome guided_backprop_checks() {
  std::mt19937_64 rng(7);
  double worst_rel = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto net = oracle::positive_network(seed);
    const Image a = random_image(16, 16, rng, 0.1f, 1.0f), b = random_image(16, 16, rng, 0.1f, 1.0f);
    const auto target = oracle::random_tensor(16, 16, rng, 0.0, 1.0);
    GuidedBackprop<double> gb(net, a, b);
    const auto [gt, gt1] = gb.propagate(target);
    nn::Tensor<double> ta(1, 16, 16), tb(1, 16, 16);
    for (std::size_t i = 0; i < a.size(); ++i) ta.data()[i] = a[i], tb.data()[i] = b[i];
    const auto fd = oracle::finite_difference_relevance(net, ta, tb, target);
    worst_rel = std::max(worst_rel, oracle::max_relative_error({gt.data(), gt.data() + gt.size()}, fd.first));
    worst_rel = std::max(worst_rel, oracle::max_relative_error({gt1.data(), gt1.data() + gt1.size()}, fd.second));
  }

  long violations = 0, rectifiers = 0;
  for (std::uint64_t seed : {11, 12, 13, 14}) {
    const CoDetectNetT<double> net(CoDetectArch{4, 8, 8, 8, 4}, seed);
    GuidedBackprop<double> gb(net, random_image(32, 32, rng), random_image(32, 32, rng));
    gb.graph().set_trace_rectifiers(true);
    gb.propagate(oracle::random_tensor(32, 32, rng, -1.0, 1.0));
    for (const auto& tr : gb.graph().rectifier_traces()) {
      ++rectifiers;
      for (std::size_t i = 0; i < tr.gated.size(); ++i) {
        const double g = tr.gated.data()[i];
        if (g < 0.0 || (tr.pre_activation->data()[i] <= 0.0 && g != 0.0)) ++violations;
      }
    }
  }
  return {worst_rel < 1e-3 && violations == 0 && rectifiers > 0,
          fmt("finite-difference rel. error %.2e; %ld gating violations over %ld rectifier passes", worst_rel,
              violations, rectifiers)};
}

// 3. Maximum projection.
Outcome max_projection_checks() {
  std::mt19937_64 rng(3);
  long bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<RelevancePair> raw;
    for (int k = 0; k < n; ++k) raw.push_back({k, random_image(12, 10, rng, -1, 1), random_image(12, 10, rng, -1, 1)});
    if (n > 1) raw[1].g_t.at(2, 2) = raw[0].g_t.at(2, 2) = 0.75f;  // a tie
    const auto got = max_projection(raw);
    const auto want = oracle::naive_max_projection(raw);
    for (int k = 0; k < n; ++k)
      if (!(got[static_cast<std::size_t>(k)].g_t == want[static_cast<std::size_t>(k)].g_t) ||
          !(got[static_cast<std::size_t>(k)].g_t1 == want[static_cast<std::size_t>(k)].g_t1))
        ++bad;
    for (int frame = 0; frame < 2; ++frame)
      for (std::size_t p = 0; p < raw[0].g_t.size(); ++p) {
        int nonzero = 0;
        float stack = 0.0f, kept = 0.0f;
        for (int k = 0; k < n; ++k) {
          const auto& r = raw[static_cast<std::size_t>(k)];
          const auto& g = got[static_cast<std::size_t>(k)];
          stack = std::max(stack, frame ? r.g_t1[p] : r.g_t[p]);
          const float v = frame ? g.g_t1[p] : g.g_t[p];
          if (v != 0.0f) ++nonzero, kept = v;
        }
        if (nonzero > 1 || (nonzero == 1 && kept != stack) || (nonzero == 0 && stack > 0.0f)) ++bad;
      }
  }
  return {bad == 0, fmt("100 random stacks, %ld disagreements", bad)};
}

// 4. Masked loss.
Outcome masked_loss_checks() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f), pos(0.0f, 1.0f);
  long nonzero_grad = 0, probes = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 16, w = 16;
    PseudoSample s{Image(h, w), Image(h, w), MotionPositionMap(h, w), Mask(h, w, 0)};
    MotionPositionMap pred(h, w);
    for (std::size_t i = 0; i < s.ignore_mask.size(); ++i) {
      s.target.position[i] = pos(rng);
      s.target.motion_x[i] = u(rng);
      s.target.motion_y[i] = u(rng);
      pred.position[i] = pos(rng);
      pred.motion_x[i] = u(rng);
      pred.motion_y[i] = u(rng);
      s.ignore_mask[i] = rng() % 3 == 0;
    }
    MotionPositionMap grad;
    masked_loss(pred, s, &grad);
    for (std::size_t i = 0; i < s.ignore_mask.size(); ++i) {
      if (!s.ignore_mask[i]) continue;
      for (Image* ch : {&pred.position, &pred.motion_x, &pred.motion_y}) {
        const float keep = (*ch)[i];
        (*ch)[i] = keep + 0.25f;
        const double up = masked_loss(pred, s).total;
        (*ch)[i] = keep - 0.25f;
        const double down = masked_loss(pred, s).total;
        (*ch)[i] = keep;
        ++probes;
        if (up != down) ++nonzero_grad;
      }
      if (grad.position[i] != 0.0f || grad.motion_x[i] != 0.0f || grad.motion_y[i] != 0.0f) ++nonzero_grad;
    }
    PseudoSample open = s;
    open.ignore_mask = Mask(h, w, 0);
    const double a = masked_loss(pred, open).total;
    const double b = oracle::naive_unmasked_loss(pred, s.target);
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  return {nonzero_grad == 0 && worst <= 4 * std::numeric_limits<double>::epsilon(),
          fmt("%ld probes at ignored pixels, %ld nonzero; empty-mask vs unmasked rel. diff %.1e", probes,
              nonzero_grad, worst)};
}

// 5. Metric fixtures.
Outcome metric_fixtures() {
  auto track = [](int id, int first, std::vector<Point2> pts) {
    Track t{id, {}, {}};
    for (std::size_t k = 0; k < pts.size(); ++k) t.points.push_back({first + static_cast<int>(k), pts[k].x, pts[k].y});
    return t;
  };
  TrackSet gt;
  gt.tracks = {track(1, 0, {{10, 10}, {20, 10}, {30, 10}, {40, 10}}), track(2, 0, {{10, 40}, {20, 40}, {30, 40}, {40, 40}})};
  TrackSet swapped;
  swapped.tracks = {track(1, 0, {{10, 10}, {20, 10}, {30, 40}, {40, 40}}), track(2, 0, {{10, 40}, {20, 40}, {30, 10}, {40, 10}})};
  const EvalConfig cfg;
  const LinkScore swap = association_accuracy(gt, swapped, cfg);

  TrackSet one;
  one.tracks = {track(1, 0, {{10, 10}, {12, 10}, {14, 10}, {16, 10}, {18, 10}, {20, 10}, {22, 10}, {24, 10}})};
  TrackSet split;
  split.tracks = {track(5, 0, {{10, 10}, {12, 10}, {14, 10}, {16, 10}}), track(6, 4, {{18, 10}, {20, 10}, {22, 10}, {24, 10}})};
  const double te = target_effectiveness(one, split, cfg);

  const EvalReport perfect = evaluate_tracks(gt, gt, cfg);
  const bool ok = swap.fp == 2 && swap.fn == 2 && std::abs(te - 0.5) <= 1e-9 &&
                  perfect.association_accuracy == 1.0 && perfect.target_effectiveness == 1.0 && perfect.f1 == 1.0;
  return {ok, fmt("swap FP %d FN %d; midpoint switch TE %.12f; perfect AA %.3f TE %.3f F1 %.3f", swap.fp, swap.fn, te,
                  perfect.association_accuracy, perfect.target_effectiveness, perfect.f1)};
}

PipelineConfig desk_config(const fs::path& work, int stride) {
  PipelineConfig c = parse_pipeline_config(R"([pipeline]
seed = 2
train_sequences = 2
resume = false
[sim]
height = 128
width = 128
frames = 20
cells = 15
division_prob = 0.02
)",
                                           false);
  c.work_dir = work;
  c.stride = stride;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  PipelineReport report;
  double seconds = 0.0;
  std::string error;
};

Run run(const PipelineConfig& cfg, bool verbose) {
  fs::remove_all(cfg.work_dir);
  Run r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.report = run_pipeline(cfg, [&](const std::string& m) {
      if (verbose) std::fprintf(stderr, "  [%s] %s\n", cfg.work_dir.filename().c_str(), m.c_str());
    });
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"acceptance checks"};
  fs::path work = fs::temp_directory_path() / "wsct_acceptance";
  bool quiet = false, skip_pipeline = false;
  app.add_option("--work-dir", work, "where pipeline runs are written");
  app.add_flag("--quiet", quiet, "no stage log");
  app.add_flag("--skip-pipeline", skip_pipeline, "only the property criteria (1-5)");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("error: ") + e.what()};
    }
  };

  report(1, "LP matching oracle", guarded(lp_matching));
  report(2, "guided backprop", guarded(guided_backprop_checks));
  report(3, "maximum projection", guarded(max_projection_checks));
  report(4, "masked loss", guarded(masked_loss_checks));
  report(5, "metric fixtures", guarded(metric_fixtures));
  if (skip_pipeline) return failures == 0 ? 0 : 1;

  fs::create_directories(work);
  const Run base = run(desk_config(work / "stride1", 1), !quiet);
  {
    Outcome o;
    if (!base.error.empty()) {
      o = {false, "pipeline error: " + base.error};
    } else {
      const auto& r = base.report;
      const bool det = r.codetect.f1 >= 0.90;
      const bool prec = r.mined.precision >= 0.90 && r.mined.precision >= r.mined.recall;
      const bool aa = r.tracker.association_accuracy >= r.mined.accuracy - 0.02;
      const bool div = r.tracker.division_recall > r.mined.division_recall;
      const bool fast = base.seconds <= 30 * 60;
      o.pass = det && prec && aa && div && fast;
      o.detail = fmt("co-detection F1 %.3f; mined P %.3f R %.3f; AA tracker %.3f vs mined %.3f; division recall "
                     "tracker %.3f vs mined %.3f (%d/%d divisions); %.0f s",
                     r.codetect.f1, r.mined.precision, r.mined.recall, r.tracker.association_accuracy,
                     r.mined.accuracy, r.tracker.division_recall, r.mined.division_recall, r.mined.divisions_found,
                     r.mined.divisions, base.seconds);
    }
    report(6, "desk-scale pipeline", o);
  }

  const Run wide = run(desk_config(work / "stride3", 3), !quiet);
  {
    Outcome o;
    if (!base.error.empty() || !wide.error.empty()) {
      o = {false, "pipeline error: " + (wide.error.empty() ? base.error : wide.error)};
    } else {
      const double drop = base.report.mined.f1 - wide.report.mined.f1;
      o = {drop <= 0.08, fmt("mined F1 stride 1 %.3f, stride 3 %.3f, drop %.3f", base.report.mined.f1,
                              wide.report.mined.f1, drop)};
    }
    report(7, "interval robustness", o);
  }

  const Run again = run(desk_config(work / "stride1_repeat", 1), !quiet);
  {
    Outcome o;
    if (!base.error.empty() || !again.error.empty()) {
      o = {false, "pipeline error: " + (again.error.empty() ? base.error : again.error)};
    } else {
      const std::string a = slurp(work / "stride1" / "tracks.csv");
      const std::string b = slurp(work / "stride1_repeat" / "tracks.csv");
      o = {!a.empty() && a == b, fmt("tracks.csv %zu and %zu bytes, %s", a.size(), b.size(), a == b ? "identical" : "different")};
    }
    report(8, "determinism", o);
  }

  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAILED" : "PASSED", failures);
  return failures == 0 ? 0 : 1;
}
