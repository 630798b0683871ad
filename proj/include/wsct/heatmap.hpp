#pragma once

#include <array>
#include <vector>

#include "wsct/grid.hpp"

namespace wsct {

// Per-pixel cell-position likelihood in [0,1], aligned to a frame.
struct LikelihoodMap {
  Image values;
  int frame_index = 0;
};

// b(x,y) = a0 + a1 x + a2 y + a3 x^2 + a4 x y + a5 y^2 in pixel coordinates.
struct BackgroundModel {
  std::array<double, 6> coefficients{};

  double evaluate(double x, double y) const {
    const auto& a = coefficients;
    return a[0] + a[1] * x + a[2] * y + a[3] * x * x + a[4] * x * y + a[5] * y * y;
  }
  Image render(int height, int width) const;
};

// Max-composition of isotropic Gaussians: value(p) = max_i exp(-|p - pos_i|^2 / 2 sigma^2).
// Throws InputError for positions outside the image or sigma <= 0.
Image render_likelihood(const std::vector<Point2>& positions, double sigma, int height, int width);

// Least-squares quadratic surface over every pixel. Throws InputError on an
// empty image.
BackgroundModel estimate_background(const Image& image);

}  // namespace wsct
