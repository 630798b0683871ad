#pragma once

#include <filesystem>
#include <vector>

#include "wsct/grid.hpp"
#include "wsct/tracks.hpp"

namespace wsct {

struct Rgb {
  int r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Stable per-track color.
Rgb track_color(int track_id);

// overlay_0000.png ... (each frame upscaled by `scale` with every track drawn
// up to that frame; children start from their parent's last point) and
// trajectories_3d.png (oblique x-y-time view, time rising upward).
void plot_tracks(const TrackSet& tracks, const std::vector<Image>& frames,
                 const std::filesystem::path& out_dir, int scale = 3);

}  // namespace wsct
