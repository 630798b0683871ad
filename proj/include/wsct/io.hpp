#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wsct/bfprop.hpp"
#include "wsct/pseudo.hpp"
#include "wsct/synthdata.hpp"
#include "wsct/tracks.hpp"

namespace wsct {

namespace fs = std::filesystem;

// 16-bit grayscale PNG holding values in [0,1].
void write_image(const fs::path& path, const Image& image);
Image read_image(const fs::path& path);

// 32-bit float TIFF, values stored unscaled.
void write_float_image(const fs::path& path, const Image& image);
Image read_float_image(const fs::path& path);

// frame,track_id,parent_id,x,y with an empty parent_id for roots.
void write_tracks_csv(const fs::path& path, const TrackSet& tracks);
TrackSet read_tracks_csv(const fs::path& path);

// frame,x,y
void write_points_csv(const fs::path& path, const std::vector<std::vector<Point2>>& points);
std::vector<std::vector<Point2>> read_points_csv(const fs::path& path, int frame_count);

// Directory layout: frame_0000.png ..., optional fluo_0000.png ..., optional
// tracks.csv.
void write_sequence(const fs::path& dir, const ImageSequence& seq);
ImageSequence read_sequence(const fs::path& dir);

// One row per surviving pair:
// frame_t,det_x_t,det_y_t,frame_t1,cell_x_t1,cell_y_t1,cost,confidence
// frame_t1 is frame_t + frame_step. Gamma masks go next to it as
// gamma_<frame_t>.rle.
void write_associations(const fs::path& dir, const std::vector<AssociationSet>& sets, int height,
                        int width, int frame_step = 1);
// Rebuilds one set per frame pair listed in the gamma files. Detection lists
// hold only the matched endpoints.
std::vector<AssociationSet> read_associations(const fs::path& dir);

// Run-length mask file: "height width" then alternating 0/1 run lengths,
// starting with zeros.
void write_mask_rle(const fs::path& path, const Mask& mask);
Mask read_mask_rle(const fs::path& path);

// Pseudo samples as float TIFFs per pair plus index.csv.
void write_pseudo_samples(const fs::path& dir, const std::vector<PseudoSample>& samples);
std::vector<PseudoSample> read_pseudo_samples(const fs::path& dir);

}  // namespace wsct
