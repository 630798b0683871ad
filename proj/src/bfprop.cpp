#include "wsct/bfprop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wsct {

void BfPropConfig::validate() const {
  if (!(th > 0.0)) throw ConfigError("th must be > 0");
  if (!(th_conf > 0.0 && th_conf < 1.0)) throw ConfigError("th_conf must lie in (0,1)");
  if (!(radius >= 0.0)) throw ConfigError("radius must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (!(peak_threshold > 0.0 && peak_threshold < 1.0))
    throw ConfigError("peak_threshold must lie in (0,1)");
  if (!(min_distance >= 0.0)) throw ConfigError("min_distance must be >= 0");
}

namespace {

void check_inside(Point2 p, int height, int width) {
  if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1))
    throw InputError("cell position outside the image");
}

// Pixels within `radius` of the pixel nearest to `center`.
std::vector<int> disk_pixels(Point2 center, double radius, int height, int width) {
  const int cx = static_cast<int>(std::lround(center.x));
  const int cy = static_cast<int>(std::lround(center.y));
  const int reach = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  std::vector<int> out;
  for (int y = std::max(0, cy - reach); y <= std::min(height - 1, cy + reach); ++y)
    for (int x = std::max(0, cx - reach); x <= std::min(width - 1, cx + reach); ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r2) out.push_back(y * width + x);
    }
  return out;
}

template <typename T>
nn::Tensor<T> tensor_of(const Image& image) {
  nn::Tensor<T> t(1, image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) t.data()[i] = static_cast<T>(image[i]);
  return t;
}

template <typename T>
Image image_of(const nn::Tensor<T>& t, int height, int width) {
  Image out(height, width, 0.0f);
  if (t.empty()) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(t.data()[i]);
  return out;
}

}  // namespace

TargetRegion TargetRegion::make(int cell_index, Point2 center, double radius, int height, int width) {
  check_inside(center, height, width);
  if (!(radius >= 0.0)) throw InputError("region radius must be >= 0");
  return {cell_index, center, radius, disk_pixels(center, radius, height, width)};
}

const AssociationPair* AssociationSet::pair_for_cell(int cell_index) const {
  for (const auto& p : pairs)
    if (p.cell_index == cell_index) return &p;
  return nullptr;
}

LikelihoodMap init_target_map(const LikelihoodMap& l_t1, Point2 cell, double radius) {
  const int h = l_t1.values.height(), w = l_t1.values.width();
  const auto region = TargetRegion::make(0, cell, radius, h, w);
  LikelihoodMap out{Image(h, w, 0.0f), l_t1.frame_index};
  for (int idx : region.pixels) out.values[static_cast<std::size_t>(idx)] = l_t1.values[static_cast<std::size_t>(idx)];
  return out;
}

template <typename T>
GuidedBackprop<T>::GuidedBackprop(const CoDetectNetT<T>& net, const Image& image_t, const Image& image_t1)
    : graph_(net.params()) {
  if (!image_t.same_shape(image_t1)) throw InputError("guided backprop inputs differ in shape");
  nodes_ = net.build(graph_, tensor_of<T>(image_t), tensor_of<T>(image_t1));
}

template <typename T>
std::pair<nn::Tensor<T>, nn::Tensor<T>> GuidedBackprop<T>::propagate(const nn::Tensor<T>& target,
                                                                     nn::BackwardMode mode) {
  const auto& out = graph_.value(nodes_.output_t1);
  if (!target.same_shape(out)) throw InputError("relevance target does not match the output map");
  graph_.backward(nodes_.output_t1, target, mode);
  auto fetch = [&](nn::NodeId id) {
    const auto& s = graph_.signal(id);
    return s.empty() ? nn::Tensor<T>(1, out.height(), out.width()) : s;
  };
  return {fetch(nodes_.input_t), fetch(nodes_.input_t1)};
}

template <typename T>
RelevancePair GuidedBackprop<T>::relevance(int cell_index, const Image& target) {
  auto [gt, gt1] = propagate(tensor_of<T>(target));
  return {cell_index, image_of(gt, target.height(), target.width()),
          image_of(gt1, target.height(), target.width())};
}

template class GuidedBackprop<float>;
template class GuidedBackprop<double>;

RelevancePair guided_backprop(const CoDetectParams& params, const Image& image_t,
                              const Image& image_t1, const LikelihoodMap& target, int cell_index) {
  if (!target.values.same_shape(image_t)) throw InputError("relevance target does not match the images");
  GuidedBackprop<float> gb(params, image_t, image_t1);
  return gb.relevance(cell_index, target.values);
}

std::vector<RelevancePair> max_projection(const std::vector<RelevancePair>& raw) {
  if (raw.empty()) throw InputError("max projection needs at least one relevance pair");
  const Image& ref = raw.front().g_t;
  for (const auto& r : raw)
    if (!r.g_t.same_shape(ref) || !r.g_t1.same_shape(ref))
      throw InputError("relevance maps differ in shape");

  std::vector<RelevancePair> out;
  out.reserve(raw.size());
  for (const auto& r : raw)
    out.push_back({r.cell_index, Image(ref.height(), ref.width(), 0.0f), Image(ref.height(), ref.width(), 0.0f)});

  for (int frame = 0; frame < 2; ++frame) {
    auto map_of = [frame](const RelevancePair& r) -> const Image& { return frame == 0 ? r.g_t : r.g_t1; };
    for (std::size_t p = 0; p < ref.size(); ++p) {
      std::size_t best = 0;
      float best_value = std::max(0.0f, map_of(raw[0])[p]);
      for (std::size_t k = 1; k < raw.size(); ++k) {
        const float v = std::max(0.0f, map_of(raw[k])[p]);
        if (v > best_value) {
          best_value = v;
          best = k;
        }
      }
      Image& dst = frame == 0 ? out[best].g_t : out[best].g_t1;
      dst[p] = best_value;
    }
  }
  return out;
}

void normalize_relevance(std::vector<RelevancePair>& raw) {
  float peak = 0.0f;
  for (const auto& r : raw)
    for (const Image* g : {&r.g_t, &r.g_t1})
      for (float v : g->values()) peak = std::max(peak, v);
  if (!(peak > 0.0f)) return;
  for (auto& r : raw)
    for (Image* g : {&r.g_t, &r.g_t1})
      for (float& v : g->values()) v /= peak;
}

MaskedImagePair make_masked_images(const Image& image_t, const Image& image_t1,
                                   const RelevancePair& relevance, const BackgroundModel& bg_t,
                                   const BackgroundModel& bg_t1, double th) {
  if (!image_t.same_shape(image_t1) || !relevance.g_t.same_shape(image_t) ||
      !relevance.g_t1.same_shape(image_t))
    throw InputError("masked-image inputs differ in shape");
  MaskedImagePair out{relevance.cell_index, image_t, image_t1};
  for (int y = 0; y < image_t.height(); ++y) {
    for (int x = 0; x < image_t.width(); ++x) {
      if (!(relevance.g_t.at(x, y) > th)) out.image_t.at(x, y) = static_cast<float>(bg_t.evaluate(x, y));
      if (!(relevance.g_t1.at(x, y) > th)) out.image_t1.at(x, y) = static_cast<float>(bg_t1.evaluate(x, y));
    }
  }
  return out;
}

LikelihoodMap forward_propagate(const CoDetectParams& params, const MaskedImagePair& masked) {
  auto maps = codetect_forward(params, masked.image_t, masked.image_t1);
  return std::move(maps.first);
}

namespace {

struct Window {
  std::vector<int> pixels;
  std::vector<double> gaussian;  // template value per window pixel
};

Window matching_window(Point2 det, double sigma, double radius, int height, int width) {
  Window w;
  w.pixels = disk_pixels(det, radius, height, width);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int idx : w.pixels) {
    const Point2 p{double(idx % width), double(idx / width)};
    w.gaussian.push_back(std::exp(-squared_distance(p, det) * inv));
  }
  return w;
}

double window_mse(const Image& response, const Window& w) {
  if (w.pixels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < w.pixels.size(); ++k) {
    const double d = response[static_cast<std::size_t>(w.pixels[k])] - w.gaussian[k];
    sum += d * d;
  }
  return sum / static_cast<double>(w.pixels.size());
}

}  // namespace

CostMatrix matching_costs(const std::vector<Image>& responses, const std::vector<Point2>& detections_t,
                          double sigma, double radius) {
  CostMatrix cost(static_cast<int>(responses.size()), static_cast<int>(detections_t.size()));
  if (responses.empty() || detections_t.empty()) return cost;
  const int h = responses.front().height(), w = responses.front().width();
  for (std::size_t j = 0; j < detections_t.size(); ++j) {
    check_inside(detections_t[j], h, w);
    const Window win = matching_window(detections_t[j], sigma, radius, h, w);
    for (std::size_t i = 0; i < responses.size(); ++i) {
      if (!responses[i].same_shape(responses.front())) throw InputError("responses differ in shape");
      cost(static_cast<int>(i), static_cast<int>(j)) = window_mse(responses[i], win);
    }
  }
  return cost;
}

AssociationSet match_one_by_one(const std::vector<Image>& responses,
                                const std::vector<Point2>& detections_t, double sigma, double radius) {
  AssociationSet set;
  set.detections_t = detections_t;
  if (responses.empty() || detections_t.empty()) return set;
  const int h = responses.front().height(), w = responses.front().width();
  const CostMatrix cost = matching_costs(responses, detections_t, sigma, radius);

  // An all-zero response scores mean(G^2) against any window; leaving a cell
  // unmatched costs the cheapest such score.
  double zero_cost = std::numeric_limits<double>::infinity();
  std::vector<Window> windows;
  for (const auto& det : detections_t) {
    windows.push_back(matching_window(det, sigma, radius, h, w));
    zero_cost = std::min(zero_cost, window_mse(Image(h, w, 0.0f), windows.back()));
  }
  const auto assignment =
      solve_assignment(cost, std::vector<double>(responses.size(), zero_cost));
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const int j = assignment.row_to_col[i];
    if (j < 0) continue;
    double confidence = 0.0;
    for (int idx : windows[static_cast<std::size_t>(j)].pixels)
      confidence = std::max(confidence, static_cast<double>(responses[i][static_cast<std::size_t>(idx)]));
    set.pairs.push_back({static_cast<int>(i), j, cost(static_cast<int>(i), j), confidence});
  }
  return set;
}

AssociationSet filter_low_confidence(const AssociationSet& assoc, double th_conf,
                                     const std::vector<TargetRegion>& regions, int height, int width) {
  AssociationSet out = assoc;
  out.pairs.clear();
  for (const auto& p : assoc.pairs)
    if (!(p.confidence < th_conf)) out.pairs.push_back(p);
  out.gamma = Mask(height, width, 0);
  for (const auto& region : regions) {
    if (out.pair_for_cell(region.cell_index)) continue;
    for (int idx : region.pixels) out.gamma[static_cast<std::size_t>(idx)] = 1;
  }
  return out;
}

AssociationSet mine_associations(const CoDetectParams& params, const Image& image_t,
                                 const Image& image_t1, const BfPropConfig& cfg) {
  cfg.validate();
  const int h = image_t.height(), w = image_t.width();
  GuidedBackprop<float> gb(params, image_t, image_t1);
  const LikelihoodMap l_t{to_image(gb.graph().value(gb.nodes().output_t)), 0};
  const LikelihoodMap l_t1{to_image(gb.graph().value(gb.nodes().output_t1)), 1};
  const auto detections_t = detect_peaks(l_t.values, cfg.peak_threshold, cfg.min_distance);
  const auto cells_t1 = detect_peaks(l_t1.values, cfg.peak_threshold, cfg.min_distance);

  AssociationSet empty;
  empty.detections_t = detections_t;
  empty.cells_t1 = cells_t1;
  empty.gamma = Mask(h, w, 0);
  if (cells_t1.empty()) return empty;

  std::vector<TargetRegion> regions;
  std::vector<RelevancePair> raw;
  for (std::size_t i = 0; i < cells_t1.size(); ++i) {
    regions.push_back(TargetRegion::make(static_cast<int>(i), cells_t1[i], cfg.radius, h, w));
    const LikelihoodMap target = init_target_map(l_t1, cells_t1[i], cfg.radius);
    raw.push_back(gb.relevance(static_cast<int>(i), target.values));
  }
  normalize_relevance(raw);
  const auto projected = max_projection(raw);

  const BackgroundModel bg_t = estimate_background(image_t);
  const BackgroundModel bg_t1 = estimate_background(image_t1);
  std::vector<Image> responses;
  for (const auto& g : projected) {
    const auto masked = make_masked_images(image_t, image_t1, g, bg_t, bg_t1, cfg.th);
    responses.push_back(forward_propagate(params, masked).values);
  }

  AssociationSet matched = match_one_by_one(responses, detections_t, cfg.sigma, cfg.radius);
  matched.cells_t1 = cells_t1;
  AssociationSet filtered = filter_low_confidence(matched, cfg.th_conf, regions, h, w);
  return filtered;
}

}  // namespace wsct
