#include "wsct/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace wsct {

Rgb track_color(int track_id) {
  const double hue = std::fmod(0.61803398875 * track_id, 1.0) * 180.0;
  cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(hue, 220, 255)), bgr;
  cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
  const auto c = bgr.at<cv::Vec3b>(0, 0);
  return {c[2], c[1], c[0]};
}

namespace {

cv::Scalar bgr(const Rgb& c) { return cv::Scalar(c.b, c.g, c.r); }

cv::Mat to_canvas(const Image& image, int scale) {
  cv::Mat gray(image.height(), image.width(), CV_8UC1);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      gray.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::lround(std::clamp(image.at(x, y), 0.0f, 1.0f) * 255.0f));
  cv::Mat big, color;
  cv::resize(gray, big, cv::Size(), scale, scale, cv::INTER_NEAREST);
  cv::cvtColor(big, color, cv::COLOR_GRAY2BGR);
  return color;
}

void write(const std::filesystem::path& path, const cv::Mat& m) {
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write " + path.string());
}

}  // namespace

void plot_tracks(const TrackSet& tracks, const std::vector<Image>& frames,
                 const std::filesystem::path& out_dir, int scale) {
  if (scale < 1) throw InputError("plot scale must be >= 1");
  std::filesystem::create_directories(out_dir);
  const double s = scale;
  auto px = [&](double x, double y) {
    return cv::Point(static_cast<int>(std::lround((x + 0.5) * s)), static_cast<int>(std::lround((y + 0.5) * s)));
  };

  for (std::size_t f = 0; f < frames.size(); ++f) {
    cv::Mat canvas = to_canvas(frames[f], scale);
    const int frame = static_cast<int>(f);
    for (const auto& t : tracks.tracks) {
      if (t.first_frame() > frame) continue;
      const cv::Scalar color = bgr(track_color(t.track_id));
      std::vector<cv::Point> line;
      if (t.parent_id)
        if (const Track* parent = tracks.find(*t.parent_id); parent && !parent->points.empty()) {
          const auto& q = parent->points.back();
          line.push_back(px(q.x, q.y));
        }
      for (const auto& p : t.points)
        if (p.frame <= frame) line.push_back(px(p.x, p.y));
      if (line.size() > 1) cv::polylines(canvas, line, false, color, 2, cv::LINE_8);
      if (const TrackPoint* now = t.point_at(frame))
        cv::circle(canvas, px(now->x, now->y), std::max(2, scale), color, -1, cv::LINE_8);
    }
    char name[64];
    std::snprintf(name, sizeof name, "overlay_%04d.png", frame);
    write(out_dir / name, canvas);
  }

  // Oblique projection: x to the right, y receding, time upward.
  const int w = frames.empty() ? 128 : frames.front().width();
  const int h = frames.empty() ? 128 : frames.front().height();
  const int n = std::max<int>(tracks.frame_count(), static_cast<int>(frames.size()));
  const double step = 12.0, depth = 0.5, margin = 40.0;
  const int width = static_cast<int>(w * s + h * depth * s * 0.7 + 2 * margin);
  const int height = static_cast<int>(h * depth * s * 0.7 + std::max(n - 1, 1) * step + 2 * margin);
  auto project = [&](double x, double y, double t) {
    const double u = margin + x * s + y * depth * s * 0.7;
    const double v = height - margin - y * depth * s * 0.7 - t * step;
    return cv::Point(static_cast<int>(std::lround(u)), static_cast<int>(std::lround(v)));
  };
  cv::Mat view(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Scalar axis(90, 90, 90);
  cv::line(view, project(0, 0, 0), project(w, 0, 0), axis, 1, cv::LINE_AA);
  cv::line(view, project(0, 0, 0), project(0, h, 0), axis, 1, cv::LINE_AA);
  cv::line(view, project(0, 0, 0), project(0, 0, n - 1), axis, 1, cv::LINE_AA);
  cv::putText(view, "x", project(w, 0, 0) + cv::Point(4, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, axis);
  cv::putText(view, "y", project(0, h, 0) + cv::Point(4, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, axis);
  cv::putText(view, "time", project(0, 0, n - 1) + cv::Point(-10, -6), cv::FONT_HERSHEY_SIMPLEX, 0.4, axis);
  for (const auto& t : tracks.tracks) {
    const cv::Scalar color = bgr(track_color(t.track_id));
    std::vector<cv::Point> line;
    if (t.parent_id)
      if (const Track* parent = tracks.find(*t.parent_id); parent && !parent->points.empty()) {
        const auto& q = parent->points.back();
        line.push_back(project(q.x, q.y, q.frame));
      }
    for (const auto& p : t.points) line.push_back(project(p.x, p.y, p.frame));
    if (line.size() > 1) cv::polylines(view, line, false, color, 2, cv::LINE_AA);
    else if (line.size() == 1) cv::circle(view, line.front(), 2, color, -1, cv::LINE_AA);
  }
  write(out_dir / "trajectories_3d.png", view);
}

}  // namespace wsct
