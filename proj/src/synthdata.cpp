#include "wsct/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <opencv2/imgproc.hpp>

namespace wsct {

void SimConfig::validate() const {
  if (height < 64 || width < 64) throw ConfigError("image_size must be at least 64x64");
  if (n_frames < 2) throw ConfigError("n_frames must be >= 2");
  if (initial_cells < 0) throw ConfigError("initial_cells must be >= 0");
  if (!(motion_sigma >= 0.0)) throw ConfigError("motion_sigma must be >= 0");
  if (!(division_prob >= 0.0 && division_prob <= 1.0))
    throw ConfigError("division_prob must lie in [0,1]");
  if (!(radius_min > 0.0) || !(radius_min <= radius_max))
    throw ConfigError("cell_radius_range must satisfy 0 < min <= max");
  if (radius_max * 4.0 >= std::min(height, width))
    throw ConfigError("cell radius too large for the image");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
}

namespace {

struct Cell {
  std::size_t track = 0;  // index into TrackSet::tracks
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  double aspect = 1.0;  // minor/major axis ratio
  double angle = 0.0;
  double amplitude = 0.0;
};

class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    margin_ = cfg.radius_max;
    const double area = static_cast<double>(cfg.height) * cfg.width;
    max_cells_ = static_cast<std::size_t>(
        std::max(1.0, area / (std::numbers::pi * cfg.radius_max * cfg.radius_max) / 3.0));
  }

  TrackSet run(std::vector<std::vector<Cell>>& per_frame) {
    std::vector<Cell> live = seed_cells();
    record(live, 0);
    per_frame.push_back(live);
    for (int t = 1; t < cfg_.n_frames; ++t) {
      live = step(live, t);
      record(live, t);
      per_frame.push_back(live);
    }
    return std::move(tracks_);
  }

 private:
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }

  bool inside(double x, double y) const {
    return x >= margin_ && y >= margin_ && x <= cfg_.width - 1 - margin_ &&
           y <= cfg_.height - 1 - margin_;
  }

  static bool separated(double x, double y, const std::vector<Cell>& placed, double min_sep) {
    const double min2 = min_sep * min_sep;
    return std::ranges::all_of(placed, [&](const Cell& c) {
      return (c.x - x) * (c.x - x) + (c.y - y) * (c.y - y) >= min2;
    });
  }

  Cell new_cell(double x, double y, double radius) {
    Cell c;
    c.x = x;
    c.y = y;
    c.radius = radius;
    c.aspect = uniform(0.75, 1.0);
    c.angle = uniform(0.0, std::numbers::pi);
    c.amplitude = uniform(0.35, 0.5);
    c.track = tracks_.tracks.size();
    Track t;
    t.track_id = static_cast<int>(tracks_.tracks.size()) + 1;
    tracks_.tracks.push_back(std::move(t));
    return c;
  }

  std::vector<Cell> seed_cells() {
    std::vector<Cell> cells;
    const double spacing = 2.0 * cfg_.radius_max;
    for (int i = 0; i < cfg_.initial_cells; ++i) {
      for (int attempt = 0; attempt < 1000; ++attempt) {
        const double x = uniform(margin_, cfg_.width - 1 - margin_);
        const double y = uniform(margin_, cfg_.height - 1 - margin_);
        const double need = attempt < 500 ? spacing : kMinCentroidSeparation;
        if (!separated(x, y, cells, need)) continue;
        cells.push_back(new_cell(x, y, uniform(cfg_.radius_min, cfg_.radius_max)));
        break;
      }
    }
    return cells;
  }

  std::vector<Cell> step(const std::vector<Cell>& previous, int /*frame*/) {
    std::vector<Cell> next;
    next.reserve(previous.size() * 2);
    const double clip = 3.0 * cfg_.motion_sigma;
    for (const Cell& cell : previous) {
      const bool wants_division = uniform(0.0, 1.0) < cfg_.division_prob;
      if (wants_division && previous.size() + next.size() < max_cells_ && try_divide(cell, next))
        continue;
      Cell moved = cell;
      moved.angle += normal(0.05);
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        // Late attempts widen the search so a crowded cell always finds room.
        const double scale = attempt < 100 ? 1.0 : 1.0 + (attempt - 100) * 0.1;
        double dx = 0.0, dy = 0.0;
        if (cfg_.motion_sigma > 0.0) {
          dx = std::clamp(normal(cfg_.motion_sigma), -clip, clip) * scale;
          dy = std::clamp(normal(cfg_.motion_sigma), -clip, clip) * scale;
        } else if (attempt > 0) {
          dx = normal(0.5 * scale);
          dy = normal(0.5 * scale);
        }
        double x = reflect(cell.x + dx, margin_, cfg_.width - 1 - margin_);
        double y = reflect(cell.y + dy, margin_, cfg_.height - 1 - margin_);
        if (!separated(x, y, next, kMinCentroidSeparation)) continue;
        moved.x = x;
        moved.y = y;
        placed = true;
      }
      if (!placed) throw InputError("simulator could not place a cell; scene too crowded");
      next.push_back(moved);
    }
    return next;
  }

  bool try_divide(const Cell& mother, std::vector<Cell>& next) {
    const double child_radius = std::clamp(mother.radius * 0.9, cfg_.radius_min, cfg_.radius_max);
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double axis = uniform(0.0, std::numbers::pi);
      const double ux = std::cos(axis) * mother.radius;
      const double uy = std::sin(axis) * mother.radius;
      const double x1 = mother.x + ux, y1 = mother.y + uy;
      const double x2 = mother.x - ux, y2 = mother.y - uy;
      if (!inside(x1, y1) || !inside(x2, y2)) continue;
      if (!separated(x1, y1, next, kMinCentroidSeparation) ||
          !separated(x2, y2, next, kMinCentroidSeparation))
        continue;
      const int mother_id = tracks_.tracks[mother.track].track_id;
      for (auto [x, y] : {std::pair{x1, y1}, std::pair{x2, y2}}) {
        Cell child = new_cell(x, y, child_radius);
        child.angle = axis + std::numbers::pi / 2.0;
        child.amplitude = mother.amplitude;
        tracks_.tracks[child.track].parent_id = mother_id;
        next.push_back(child);
      }
      return true;
    }
    return false;
  }

  static double reflect(double v, double lo, double hi) {
    if (v < lo) v = lo + (lo - v);
    if (v > hi) v = hi - (v - hi);
    return std::clamp(v, lo, hi);
  }

  void record(const std::vector<Cell>& cells, int frame) {
    for (const Cell& c : cells) tracks_.tracks[c.track].points.push_back({frame, c.x, c.y});
  }

  SimConfig cfg_;
  std::mt19937_64 rng_;
  double margin_ = 0.0;
  std::size_t max_cells_ = 0;
  TrackSet tracks_;
};

struct Background {
  double base, gx, gy, curvature;
  double at(double x, double y, int w, int h) const {
    const double u = x / w - 0.5;
    const double v = y / h - 0.5;
    return base + gx * u + gy * v + curvature * (u * u + v * v);
  }
};

// Adds one cell to the phase image and its nucleus to the fluorescence image.
void render_cell(const Cell& c, IntensityProfile profile, Image& phase, Image& fluo) {
  const double major = c.radius;
  const double minor = c.radius * c.aspect;
  const double ca = std::cos(c.angle), sa = std::sin(c.angle);
  const int reach = static_cast<int>(std::ceil(2.0 * c.radius));
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x)) - reach);
  const int x1 = std::min(phase.width() - 1, static_cast<int>(std::ceil(c.x)) + reach);
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y)) - reach);
  const int y1 = std::min(phase.height() - 1, static_cast<int>(std::ceil(c.y)) + reach);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - c.x, dy = y - c.y;
      const double u = (ca * dx + sa * dy) / major;
      const double v = (-sa * dx + ca * dy) / minor;
      const double rho2 = u * u + v * v;
      double value = 0.0;
      if (profile == IntensityProfile::kBlob) {
        value = c.amplitude * std::exp(-0.5 * rho2 / (0.6 * 0.6));
      } else {
        const double rho = std::sqrt(rho2);
        value = c.amplitude * std::exp(-0.5 * (rho - 1.0) * (rho - 1.0) / (0.18 * 0.18)) -
                0.12 * std::exp(-0.5 * rho2 / (0.5 * 0.5));
      }
      phase.at(x, y) += static_cast<float>(value);
      // stained nuclei sit apart even when the cell bodies touch
      const float nucleus = static_cast<float>(0.05 + 0.8 * std::exp(-0.5 * rho2 / (0.28 * 0.28)));
      fluo.at(x, y) = std::max(fluo.at(x, y), nucleus);
    }
  }
}

}  // namespace

ImageSequence generate_sequence(const SimConfig& config) {
  config.validate();
  Simulator sim(config);
  std::vector<std::vector<Cell>> per_frame;
  TrackSet tracks = sim.run(per_frame);

  // Rendering draws from its own stream so noise never perturbs the dynamics.
  std::mt19937_64 render_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const Background bg{0.3, 0.05 * uni(render_rng), 0.05 * uni(render_rng), 0.1 * uni(render_rng)};
  std::normal_distribution<double> noise(0.0, config.noise_sigma > 0 ? config.noise_sigma : 1.0);

  ImageSequence seq;
  for (const auto& cells : per_frame) {
    Image phase(config.height, config.width);
    Image fluo(config.height, config.width, 0.05f);
    for (int y = 0; y < config.height; ++y)
      for (int x = 0; x < config.width; ++x)
        phase.at(x, y) = static_cast<float>(bg.at(x, y, config.width, config.height));
    for (const Cell& c : cells) render_cell(c, config.profile, phase, fluo);
    for (auto* img : {&phase, &fluo}) {
      for (float& v : img->values()) {
        const double n = config.noise_sigma > 0 ? noise(render_rng) : 0.0;
        v = static_cast<float>(std::clamp(v + n, 0.0, 1.0));
      }
    }
    seq.frames.push_back(std::move(phase));
    seq.fluorescence.push_back(std::move(fluo));
  }
  seq.tracks = std::move(tracks);
  return seq;
}

std::vector<Point2> extract_points_from_fluorescence(const Image& image, double threshold,
                                                     int min_area) {
  if (image.empty()) return {};
  cv::Mat binary(image.height(), image.width(), CV_8U);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      binary.at<std::uint8_t>(y, x) = image.at(x, y) > threshold ? 255 : 0;
  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(binary, labels, stats, centroids, 8, CV_32S);
  std::vector<Point2> out;
  for (int label = 1; label < n; ++label) {
    if (stats.at<int>(label, cv::CC_STAT_AREA) < min_area) continue;
    out.push_back({centroids.at<double>(label, 0), centroids.at<double>(label, 1)});
  }
  return out;
}

}  // namespace wsct
