#pragma once

#include <utility>

#include "wsct/grid.hpp"

namespace wsct {

// The eight symmetries of the square: bit 0 mirrors x, bit 1 mirrors y,
// bit 2 transposes (applied last). Non-square images only admit 0..3.
struct Dihedral {
  int code = 0;

  bool flip_x() const { return (code & 1) != 0; }
  bool flip_y() const { return (code & 2) != 0; }
  bool transpose() const { return (code & 4) != 0; }

  template <typename T>
  Grid<T> apply(const Grid<T>& in) const {
    const int h = in.height(), w = in.width();
    Grid<T> out(transpose() ? w : h, transpose() ? h : w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int fx = flip_x() ? w - 1 - x : x;
        const int fy = flip_y() ? h - 1 - y : y;
        if (transpose())
          out.at(fy, fx) = in.at(x, y);
        else
          out.at(fx, fy) = in.at(x, y);
      }
    }
    return out;
  }

  // Maps a displacement vector the way `apply` maps positions.
  Point2 apply_vector(Point2 v) const {
    if (flip_x()) v.x = -v.x;
    if (flip_y()) v.y = -v.y;
    if (transpose()) std::swap(v.x, v.y);
    return v;
  }
};

}  // namespace wsct
