#include "wsct/pseudo.hpp"

#include <cmath>
#include <limits>

#include "wsct/heatmap.hpp"

namespace wsct {

void PseudoConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("pseudo sigma must be > 0");
  if (!(radius >= 0.0)) throw ConfigError("pseudo radius must be >= 0");
  if (!(motion_scale > 0.0)) throw ConfigError("motion_scale must be > 0");
}

PseudoSample build_pseudo_sample(const AssociationSet& assoc, const Image& image_t,
                                 const Image& image_t1, const PseudoConfig& cfg) {
  cfg.validate();
  if (!image_t.same_shape(image_t1)) throw InputError("pseudo-sample images differ in shape");
  const int h = image_t1.height(), w = image_t1.width();
  if (!assoc.gamma.empty() && !assoc.gamma.same_shape(image_t1))
    throw InputError("gamma does not match the images");

  std::vector<Point2> cells, sources;
  for (const auto& p : assoc.pairs) {
    cells.push_back(assoc.cells_t1.at(static_cast<std::size_t>(p.cell_index)));
    sources.push_back(assoc.detections_t.at(static_cast<std::size_t>(p.detection_index)));
  }

  PseudoSample out{image_t, image_t1, MotionPositionMap(h, w), Mask(h, w, 0)};
  if (!cells.empty()) out.target.position = render_likelihood(cells, cfg.sigma, h, w);
  if (!assoc.gamma.empty()) out.ignore_mask = assoc.gamma;

  const double r2 = cfg.radius * cfg.radius;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Point2 p{double(x), double(y)};
      int owner = -1;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const double d = squared_distance(p, cells[i]);
        if (d <= r2 && d < best) {
          best = d;
          owner = static_cast<int>(i);
        }
      }
      if (owner < 0) continue;
      const auto i = static_cast<std::size_t>(owner);
      double mx = (sources[i].x - cells[i].x) / cfg.motion_scale;
      double my = (sources[i].y - cells[i].y) / cfg.motion_scale;
      const double norm = std::hypot(mx, my);
      if (norm > 1.0) {
        mx /= norm;
        my /= norm;
      }
      out.target.motion_x.at(x, y) = static_cast<float>(mx);
      out.target.motion_y.at(x, y) = static_cast<float>(my);
      out.ignore_mask.at(x, y) = 0;
    }
  }
  return out;
}

LossReport masked_loss(const MotionPositionMap& pred, const PseudoSample& sample,
                       MotionPositionMap* grad) {
  const MotionPositionMap& target = sample.target;
  if (!pred.position.same_shape(target.position) || !pred.motion_x.same_shape(target.position) ||
      !pred.motion_y.same_shape(target.position) || !target.motion_x.same_shape(target.position) ||
      !target.motion_y.same_shape(target.position) ||
      (!sample.ignore_mask.empty() && !sample.ignore_mask.same_shape(target.position)))
    throw InputError("masked loss inputs differ in shape");

  const std::size_t n = target.position.size();
  const bool has_mask = !sample.ignore_mask.empty();
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!has_mask || sample.ignore_mask[i] == 0) ++kept;

  if (grad) *grad = MotionPositionMap(target.height(), target.width());
  LossReport report;
  report.masked_fraction = n == 0 ? 1.0 : 1.0 - static_cast<double>(kept) / static_cast<double>(n);
  if (kept == 0) return report;

  const double inv = 1.0 / static_cast<double>(kept);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (has_mask && sample.ignore_mask[i] != 0) continue;
    const double dp = static_cast<double>(pred.position[i]) - target.position[i];
    double pixel = dp * dp;
    const bool motion = target.position[i] > kMotionSupportLevel;
    double dx = 0.0, dy = 0.0;
    if (motion) {
      dx = static_cast<double>(pred.motion_x[i]) - target.motion_x[i];
      dy = static_cast<double>(pred.motion_y[i]) - target.motion_y[i];
      pixel += 0.5 * (dx * dx + dy * dy);
    }
    sum += pixel;
    if (grad) {
      grad->position[i] = static_cast<float>(2.0 * dp * inv);
      grad->motion_x[i] = static_cast<float>(dx * inv);
      grad->motion_y[i] = static_cast<float>(dy * inv);
    }
  }
  report.total = sum / static_cast<double>(kept);
  return report;
}

}  // namespace wsct
