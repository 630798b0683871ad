#include "wsct/tracknet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include "wsct/augment.hpp"

namespace wsct {

template <typename T>
TrackNetT<T>::TrackNetT(const TrackArch& arch, std::uint64_t seed) : arch_(arch) {
  if (arch.width < 1) throw ConfigError("tracker width must be >= 1");
  if (!(arch.motion_scale > 0.0)) throw ConfigError("motion_scale must be > 0");
  std::mt19937_64 rng(seed);
  const int w = arch.width;
  down1_ = nn::add_conv<T>(params_, rng, "down1", 2, w, 3);
  down2_ = nn::add_conv<T>(params_, rng, "down2", w, 2 * w, 3);
  down3_ = nn::add_conv<T>(params_, rng, "down3", 2 * w, 4 * w, 3);
  bottleneck_ = nn::add_conv<T>(params_, rng, "bottleneck", 4 * w, 8 * w, 3);
  up3_ = nn::add_conv<T>(params_, rng, "up3", 8 * w + 4 * w, 4 * w, 3);
  up2_ = nn::add_conv<T>(params_, rng, "up2", 4 * w + 2 * w, 2 * w, 3);
  up1_ = nn::add_conv<T>(params_, rng, "up1", 2 * w + w, w, 3);
  position_head_ = nn::add_conv<T>(params_, rng, "head.position", w, 1, 1, T(-2));
  motion_head_ = nn::add_conv<T>(params_, rng, "head.motion", w, 2, 1);
  // Heads start silent. A random head puts ~0.5 on every pixel and the first
  // steps then switch off the whole last rectifier layer to pull it down.
  for (const nn::ConvLayer& layer : {position_head_, motion_head_})
    std::fill(params_[layer.weight].values.begin(), params_[layer.weight].values.end(), T{});
}

template <typename T>
typename TrackNetT<T>::Nodes TrackNetT<T>::build(nn::Graph<T>& g, const Image& image_t,
                                                 const Image& image_t1) const {
  if (!image_t.same_shape(image_t1)) throw InputError("tracker inputs differ in shape");
  if (image_t.height() % kDownsample != 0 || image_t.width() % kDownsample != 0)
    throw InputError("image size must be divisible by " + std::to_string(kDownsample));
  nn::Tensor<T> stacked(2, image_t.height(), image_t.width());
  const std::size_t plane = image_t.size();
  for (std::size_t i = 0; i < plane; ++i) {
    stacked.data()[i] = static_cast<T>(image_t[i]);
    stacked.data()[plane + i] = static_cast<T>(image_t1[i]);
  }
  Nodes nodes;
  nodes.input = g.input(std::move(stacked));
  const nn::NodeId a1 = g.relu(g.conv(nodes.input, down1_));
  const nn::NodeId a2 = g.relu(g.conv(g.maxpool2(a1), down2_));
  const nn::NodeId a3 = g.relu(g.conv(g.maxpool2(a2), down3_));
  const nn::NodeId b = g.relu(g.conv(g.maxpool2(a3), bottleneck_));
  const nn::NodeId u3 = g.relu(g.conv(g.concat(g.upsample2(b), a3), up3_));
  const nn::NodeId u2 = g.relu(g.conv(g.concat(g.upsample2(u3), a2), up2_));
  const nn::NodeId u1 = g.relu(g.conv(g.concat(g.upsample2(u2), a1), up1_));
  nodes.position = g.sigmoid(g.conv(u1, position_head_));
  nodes.motion = g.tanh(g.conv(u1, motion_head_));
  return nodes;
}

template class TrackNetT<float>;
template class TrackNetT<double>;

namespace {

MotionPositionMap read_maps(const nn::Graph<float>& g, const TrackParams::Nodes& nodes) {
  MotionPositionMap maps;
  maps.position = to_image(g.value(nodes.position));
  maps.motion_x = to_image(g.value(nodes.motion), 0);
  maps.motion_y = to_image(g.value(nodes.motion), 1);
  return maps;
}

PseudoSample transform(const PseudoSample& s, const Dihedral& d) {
  PseudoSample out;
  out.image_t = d.apply(s.image_t);
  out.image_t1 = d.apply(s.image_t1);
  out.target.position = d.apply(s.target.position);
  out.ignore_mask = s.ignore_mask.empty() ? s.ignore_mask : d.apply(s.ignore_mask);
  Image mx = d.apply(s.target.motion_x), my = d.apply(s.target.motion_y);
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const Point2 v = d.apply_vector({mx[i], my[i]});
    mx[i] = static_cast<float>(v.x);
    my[i] = static_cast<float>(v.y);
  }
  out.target.motion_x = std::move(mx);
  out.target.motion_y = std::move(my);
  return out;
}

}  // namespace

MotionPositionMap tracknet_forward(const TrackParams& params, const Image& image_t,
                                   const Image& image_t1) {
  nn::Graph<float> g(params.params());
  return read_maps(g, params.build(g, image_t, image_t1));
}

double tracknet_loss(const TrackParams& params, const std::vector<PseudoSample>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples)
    total += masked_loss(tracknet_forward(params, s.image_t, s.image_t1), s).total;
  return total / static_cast<double>(samples.size());
}

TrackParams train_tracknet(const std::vector<PseudoSample>& samples, const TrainConfig& cfg,
                           const TrackArch& arch, TrackTrainReport* report) {
  cfg.validate();
  if (samples.empty()) throw TrainingError("tracker training set is empty");
  for (const auto& s : samples)
    if (!s.image_t.same_shape(samples.front().image_t))
      throw InputError("tracker training images differ in shape");

  TrackParams net(arch, cfg.seed);
  const double initial = tracknet_loss(net, samples);
  nn::Adam<float> adam(net.params(), cfg.learning_rate);
  nn::ParamGrads<float> grads(net.params());
  std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
  const bool square = samples.front().image_t.height() == samples.front().image_t.width();
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> epoch_losses;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grads.zero();
      for (std::size_t k = start; k < stop; ++k) {
        const Dihedral d{cfg.augment ? static_cast<int>(rng() % (square ? 8 : 4)) : 0};
        const PseudoSample s = transform(samples[order[k]], d);
        nn::Graph<float> g(net.params());
        const auto nodes = net.build(g, s.image_t, s.image_t1);
        MotionPositionMap grad;
        const LossReport loss = masked_loss(read_maps(g, nodes), s, &grad);
        if (!std::isfinite(loss.total)) throw TrainingError("tracker loss is not finite", epoch);
        epoch_loss += loss.total;
        nn::Tensor<float> pos_seed(1, grad.height(), grad.width());
        nn::Tensor<float> motion_seed(2, grad.height(), grad.width());
        std::copy(grad.position.values().begin(), grad.position.values().end(), pos_seed.data());
        std::copy(grad.motion_x.values().begin(), grad.motion_x.values().end(), motion_seed.channel(0));
        std::copy(grad.motion_y.values().begin(), grad.motion_y.values().end(), motion_seed.channel(1));
        g.backward({{nodes.position, std::move(pos_seed)}, {nodes.motion, std::move(motion_seed)}},
                   nn::BackwardMode::kGradient, &grads);
      }
      grads.scale(1.0f / static_cast<float>(stop - start));
      if (!grads.all_finite()) throw TrainingError("tracker gradient is not finite", epoch);
      adam.step(net.params(), grads);
    }
    epoch_losses.push_back(epoch_loss / static_cast<double>(samples.size()));
  }

  if (report) {
    report->initial_loss = initial;
    report->final_loss = tracknet_loss(net, samples);
    report->epoch_losses = std::move(epoch_losses);
    if (!std::isfinite(report->final_loss)) throw TrainingError("tracker loss is not finite", cfg.epochs - 1);
  }
  return net;
}

std::vector<PairDetection> infer_pair(const TrackParams& params, const Image& image_t,
                                      const Image& image_t1, double peak_threshold,
                                      double min_distance) {
  const MotionPositionMap maps = tracknet_forward(params, image_t, image_t1);
  const double scale = params.arch().motion_scale;
  std::vector<PairDetection> out;
  for (const Point2& p : detect_peaks(maps.position, peak_threshold, min_distance)) {
    const int px = static_cast<int>(p.x), py = static_cast<int>(p.y);
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (int y = py - 1; y <= py + 1; ++y)
      for (int x = px - 1; x <= px + 1; ++x) {
        if (!maps.position.contains(x, y)) continue;
        sx += maps.motion_x.at(x, y);
        sy += maps.motion_y.at(x, y);
        ++n;
      }
    out.push_back({p, {p.x + scale * sx / n, p.y + scale * sy / n}});
  }
  return out;
}

TrackSet link_tracks(const std::vector<Point2>& initial,
                     const std::vector<std::vector<PairDetection>>& pairwise, double gate_radius) {
  TrackSet out;
  int next_id = 1;
  std::vector<std::size_t> active;  // indices into out.tracks with a point in the current frame
  auto start_track = [&](int frame, Point2 p, std::optional<int> parent) {
    out.tracks.push_back({next_id++, parent, {{frame, p.x, p.y}}});
    return out.tracks.size() - 1;
  };
  for (const Point2& p : initial) active.push_back(start_track(0, p, std::nullopt));

  const double gate2 = gate_radius * gate_radius;
  for (std::size_t t = 0; t < pairwise.size(); ++t) {
    const int frame = static_cast<int>(t) + 1;
    const auto& dets = pairwise[t];
    auto last_point = [&](std::size_t track) {
      const TrackPoint& q = out.tracks[track].points.back();
      return Point2{q.x, q.y};
    };

    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;  // (d2, det, active slot)
    for (std::size_t j = 0; j < dets.size(); ++j)
      for (std::size_t k = 0; k < active.size(); ++k) {
        const double d2 = squared_distance(dets[j].predicted_t, last_point(active[k]));
        if (d2 <= gate2) candidates.emplace_back(d2, j, k);
      }
    std::sort(candidates.begin(), candidates.end());

    std::vector<int> det_slot(dets.size(), -1);
    std::vector<int> slot_det(active.size(), -1);
    for (const auto& [d2, j, k] : candidates) {
      if (det_slot[j] >= 0 || slot_det[k] >= 0) continue;
      det_slot[j] = static_cast<int>(k);
      slot_det[k] = static_cast<int>(j);
    }

    // Leftover claims on an already continued track, nearest first.
    std::vector<int> second(active.size(), -1);
    std::vector<std::pair<double, std::size_t>> leftovers;
    std::vector<int> leftover_slot(dets.size(), -1);
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (det_slot[j] >= 0) continue;
      double best = gate2;
      int slot = -1;
      for (std::size_t k = 0; k < active.size(); ++k) {
        const double d2 = squared_distance(dets[j].predicted_t, last_point(active[k]));
        if (d2 <= best && (slot < 0 || d2 < best)) {
          best = d2;
          slot = static_cast<int>(k);
        }
      }
      if (slot >= 0) {
        leftovers.emplace_back(best, j);
        leftover_slot[j] = slot;
      }
    }
    std::sort(leftovers.begin(), leftovers.end());
    for (const auto& [d2, j] : leftovers) {
      const auto k = static_cast<std::size_t>(leftover_slot[j]);
      if (slot_det[k] >= 0 && second[k] < 0) second[k] = static_cast<int>(j);
    }

    std::vector<std::size_t> next(dets.size());
    std::vector<bool> placed(dets.size(), false);
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (slot_det[k] < 0) continue;
      const auto j = static_cast<std::size_t>(slot_det[k]);
      const std::size_t track = active[k];
      if (second[k] < 0) {
        out.tracks[track].points.push_back({frame, dets[j].position_t1.x, dets[j].position_t1.y});
        next[j] = track;
      } else {
        const int parent = out.tracks[track].track_id;
        const auto j2 = static_cast<std::size_t>(second[k]);
        const auto [first, later] = std::minmax(j, j2);
        next[first] = start_track(frame, dets[first].position_t1, parent);
        next[later] = start_track(frame, dets[later].position_t1, parent);
        placed[j2] = true;
      }
      placed[j] = true;
    }
    for (std::size_t j = 0; j < dets.size(); ++j)
      if (!placed[j]) next[j] = start_track(frame, dets[j].position_t1, std::nullopt);
    active = std::move(next);
  }
  return out;
}

TrackSet track_sequence(const TrackParams& params, const std::vector<Image>& frames,
                        double peak_threshold, double min_distance, double gate_radius) {
  if (frames.empty()) return {};
  std::vector<Point2> initial;
  for (const auto& d : infer_pair(params, frames[0], frames[0], peak_threshold, min_distance))
    initial.push_back(d.position_t1);
  std::vector<std::vector<PairDetection>> pairwise;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t)
    pairwise.push_back(infer_pair(params, frames[t], frames[t + 1], peak_threshold, min_distance));
  return link_tracks(initial, pairwise, gate_radius);
}

nn::Checkpoint tracknet_checkpoint(const TrackParams& params) {
  nn::Checkpoint ckpt;
  ckpt.kind = "tracknet";
  char scale[64];
  std::snprintf(scale, sizeof scale, "%.17g", params.arch().motion_scale);
  ckpt.metadata = {{"width", std::to_string(params.arch().width)}, {"motion_scale", scale}};
  ckpt.params = params.params();
  return ckpt;
}

TrackParams tracknet_from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "tracknet") throw IoError("checkpoint holds '" + ckpt.kind + "', not tracknet");
  TrackArch a;
  try {
    a.width = std::stoi(ckpt.metadata.at("width"));
    a.motion_scale = std::stod(ckpt.metadata.at("motion_scale"));
  } catch (const std::exception&) {
    throw IoError("tracknet checkpoint metadata incomplete");
  }
  TrackParams net(a, 0);
  net.params().assign_from(ckpt.params);
  return net;
}

}  // namespace wsct
