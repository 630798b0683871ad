#include "wsct/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

namespace wsct {

namespace {

std::string numbered(const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem, index, ext);
  return buf;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Data rows of a CSV with the given header.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header,
                                               std::size_t columns) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw IoError(path.string() + ": expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != columns) throw IoError(path.string() + ": malformed row '" + line + "'");
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad number '" + s + "'");
  }
}

int to_int(const std::string& s, const fs::path& path) {
  const double v = to_double(s, path);
  if (v != std::floor(v)) throw IoError(path.string() + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

std::vector<fs::path> numbered_files(const fs::path& dir, const std::string& prefix,
                                     const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with(prefix) && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void write_image(const fs::path& path, const Image& image) {
  cv::Mat m(image.height(), image.width(), CV_16UC1);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const double v = std::clamp(static_cast<double>(image.at(x, y)), 0.0, 1.0);
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write " + path.string());
}

Image read_image(const fs::path& path) {
  const cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw IoError("cannot read image " + path.string());
  cv::Mat f;
  const double scale = m.depth() == CV_16U ? 1.0 / 65535.0 : m.depth() == CV_8U ? 1.0 / 255.0 : 1.0;
  m.convertTo(f, CV_32F, scale);
  Image out(f.rows, f.cols);
  for (int y = 0; y < f.rows; ++y)
    for (int x = 0; x < f.cols; ++x) out.at(x, y) = f.at<float>(y, x);
  return out;
}

void write_float_image(const fs::path& path, const Image& image) {
  cv::Mat m(image.height(), image.width(), CV_32FC1, const_cast<float*>(image.data()));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write " + path.string());
}

Image read_float_image(const fs::path& path) {
  const cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty() || m.type() != CV_32FC1) throw IoError("cannot read float image " + path.string());
  Image out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) out.at(x, y) = m.at<float>(y, x);
  return out;
}

void write_tracks_csv(const fs::path& path, const TrackSet& tracks) {
  std::vector<std::tuple<int, int, const Track*, const TrackPoint*>> rows;
  for (const auto& t : tracks.tracks)
    for (const auto& p : t.points) rows.emplace_back(p.frame, t.track_id, &t, &p);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  auto out = open_out(path);
  out << "frame,track_id,parent_id,x,y\n";
  for (const auto& [frame, id, track, point] : rows) {
    out << frame << ',' << id << ',' << (track->parent_id ? std::to_string(*track->parent_id) : "") << ','
        << fixed(point->x) << ',' << fixed(point->y) << '\n';
  }
}

TrackSet read_tracks_csv(const fs::path& path) {
  std::map<int, Track> by_id;
  for (const auto& row : read_csv(path, "frame,track_id,parent_id,x,y", 5)) {
    const int frame = to_int(row[0], path);
    const int id = to_int(row[1], path);
    auto [it, fresh] = by_id.try_emplace(id);
    Track& t = it->second;
    if (fresh) {
      t.track_id = id;
      if (!row[2].empty()) t.parent_id = to_int(row[2], path);
    }
    t.points.push_back({frame, to_double(row[3], path), to_double(row[4], path)});
  }
  TrackSet out;
  for (auto& [id, t] : by_id) {
    std::sort(t.points.begin(), t.points.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
    out.tracks.push_back(std::move(t));
  }
  validate_tracks(out);
  return out;
}

void write_points_csv(const fs::path& path, const std::vector<std::vector<Point2>>& points) {
  auto out = open_out(path);
  out << "frame,x,y\n";
  for (std::size_t f = 0; f < points.size(); ++f)
    for (const auto& p : points[f]) out << f << ',' << fixed(p.x) << ',' << fixed(p.y) << '\n';
}

std::vector<std::vector<Point2>> read_points_csv(const fs::path& path, int frame_count) {
  std::vector<std::vector<Point2>> out(static_cast<std::size_t>(frame_count));
  for (const auto& row : read_csv(path, "frame,x,y", 3)) {
    const int f = to_int(row[0], path);
    if (f < 0 || f >= frame_count) throw IoError(path.string() + ": frame out of range");
    out[static_cast<std::size_t>(f)].push_back({to_double(row[1], path), to_double(row[2], path)});
  }
  return out;
}

void write_sequence(const fs::path& dir, const ImageSequence& seq) {
  fs::create_directories(dir);
  for (int i = 0; i < seq.size(); ++i) write_image(dir / numbered("frame", i, "png"), seq.frames[i]);
  for (std::size_t i = 0; i < seq.fluorescence.size(); ++i)
    write_image(dir / numbered("fluo", static_cast<int>(i), "png"), seq.fluorescence[i]);
  if (seq.tracks) write_tracks_csv(dir / "tracks.csv", *seq.tracks);
}

ImageSequence read_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("no such data directory: " + dir.string());
  ImageSequence seq;
  for (const auto& p : numbered_files(dir, "frame_", ".png")) seq.frames.push_back(read_image(p));
  if (seq.frames.empty()) throw IoError("no frame_*.png images in " + dir.string());
  for (const auto& p : numbered_files(dir, "fluo_", ".png")) seq.fluorescence.push_back(read_image(p));
  if (!seq.fluorescence.empty() && seq.fluorescence.size() != seq.frames.size())
    throw IoError("fluorescence and frame counts differ in " + dir.string());
  for (const auto& f : seq.frames)
    if (!f.same_shape(seq.frames.front())) throw IoError("frames differ in size in " + dir.string());
  if (fs::exists(dir / "tracks.csv")) seq.tracks = read_tracks_csv(dir / "tracks.csv");
  return seq;
}

void write_mask_rle(const fs::path& path, const Mask& mask) {
  auto out = open_out(path);
  out << mask.height() << ' ' << mask.width() << '\n';
  std::uint8_t current = 0;
  std::size_t run = 0;
  bool first = true;
  auto flush = [&] {
    out << (first ? "" : " ") << run;
    first = false;
  };
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const std::uint8_t v = mask[i] ? 1 : 0;
    if (v != current) {
      flush();
      current = v;
      run = 0;
    }
    ++run;
  }
  flush();
  out << '\n';
}

Mask read_mask_rle(const fs::path& path) {
  auto in = open_in(path);
  int h = 0, w = 0;
  if (!(in >> h >> w) || h < 0 || w < 0) throw IoError(path.string() + ": bad mask header");
  Mask mask(h, w, 0);
  std::size_t pos = 0, run = 0;
  std::uint8_t value = 0;
  while (in >> run) {
    if (pos + run > mask.size()) throw IoError(path.string() + ": mask runs overflow");
    std::fill_n(mask.data() + pos, run, value);
    pos += run;
    value ^= 1;
  }
  if (pos != mask.size()) throw IoError(path.string() + ": mask runs do not cover the image");
  return mask;
}

void write_associations(const fs::path& dir, const std::vector<AssociationSet>& sets, int height,
                        int width, int frame_step) {
  fs::create_directories(dir);
  auto out = open_out(dir / "associations.csv");
  out << "frame_t,det_x_t,det_y_t,frame_t1,cell_x_t1,cell_y_t1,cost,confidence\n";
  for (const auto& s : sets) {
    for (const auto& p : s.pairs) {
      const Point2 d = s.detections_t.at(static_cast<std::size_t>(p.detection_index));
      const Point2 c = s.cells_t1.at(static_cast<std::size_t>(p.cell_index));
      out << s.frame_index << ',' << fixed(d.x) << ',' << fixed(d.y) << ',' << s.frame_index + frame_step << ','
          << fixed(c.x) << ',' << fixed(c.y) << ',' << full(p.cost) << ',' << full(p.confidence) << '\n';
    }
    write_mask_rle(dir / numbered("gamma", s.frame_index, "rle"),
                   s.gamma.empty() ? Mask(height, width, 0) : s.gamma);
  }
}

std::vector<AssociationSet> read_associations(const fs::path& dir) {
  std::map<int, AssociationSet> sets;
  for (const auto& p : numbered_files(dir, "gamma_", ".rle")) {
    const int frame = to_int(p.stem().string().substr(6), p);
    sets[frame].frame_index = frame;
    sets[frame].gamma = read_mask_rle(p);
  }
  const fs::path csv = dir / "associations.csv";
  for (const auto& row :
       read_csv(csv, "frame_t,det_x_t,det_y_t,frame_t1,cell_x_t1,cell_y_t1,cost,confidence", 8)) {
    const int frame = to_int(row[0], csv);
    auto it = sets.find(frame);
    if (it == sets.end()) throw IoError(csv.string() + ": no gamma file for frame " + row[0]);
    AssociationSet& s = it->second;
    const int index = static_cast<int>(s.pairs.size());
    s.detections_t.push_back({to_double(row[1], csv), to_double(row[2], csv)});
    s.cells_t1.push_back({to_double(row[4], csv), to_double(row[5], csv)});
    s.pairs.push_back({index, index, to_double(row[6], csv), to_double(row[7], csv)});
  }
  std::vector<AssociationSet> out;
  for (auto& [frame, s] : sets) out.push_back(std::move(s));
  return out;
}

void write_pseudo_samples(const fs::path& dir, const std::vector<PseudoSample>& samples) {
  fs::create_directories(dir);
  auto index = open_out(dir / "index.csv");
  index << "sample,image_t,image_t1,position,motion_x,motion_y,ignore\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const int k = static_cast<int>(i);
    const std::string names[] = {numbered("image_t", k, "tiff"), numbered("image_t1", k, "tiff"),
                                 numbered("position", k, "tiff"), numbered("motion_x", k, "tiff"),
                                 numbered("motion_y", k, "tiff"), numbered("ignore", k, "rle")};
    write_float_image(dir / names[0], s.image_t);
    write_float_image(dir / names[1], s.image_t1);
    write_float_image(dir / names[2], s.target.position);
    write_float_image(dir / names[3], s.target.motion_x);
    write_float_image(dir / names[4], s.target.motion_y);
    write_mask_rle(dir / names[5], s.ignore_mask.empty() ? Mask(s.image_t.height(), s.image_t.width(), 0)
                                                         : s.ignore_mask);
    index << i;
    for (const auto& n : names) index << ',' << n;
    index << '\n';
  }
}

std::vector<PseudoSample> read_pseudo_samples(const fs::path& dir) {
  std::vector<PseudoSample> out;
  for (const auto& row :
       read_csv(dir / "index.csv", "sample,image_t,image_t1,position,motion_x,motion_y,ignore", 7)) {
    PseudoSample s;
    s.image_t = read_float_image(dir / row[1]);
    s.image_t1 = read_float_image(dir / row[2]);
    s.target.position = read_float_image(dir / row[3]);
    s.target.motion_x = read_float_image(dir / row[4]);
    s.target.motion_y = read_float_image(dir / row[5]);
    s.ignore_mask = read_mask_rle(dir / row[6]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace wsct
