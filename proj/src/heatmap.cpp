#include "wsct/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace wsct {

Image BackgroundModel::render(int height, int width) const {
  Image out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.at(x, y) = static_cast<float>(evaluate(x, y));
  return out;
}

Image render_likelihood(const std::vector<Point2>& positions, double sigma, int height,
                        int width) {
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  Image out(height, width, 0.0f);
  for (const auto& p : positions) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1))
      throw InputError("likelihood position outside image");
  }
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Nearest cell gives the maximum; exp is evaluated once per pixel.
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : positions) best = std::min(best, squared_distance({double(x), double(y)}, p));
      if (!positions.empty()) out.at(x, y) = static_cast<float>(std::exp(-best * inv));
    }
  }
  return out;
}

BackgroundModel estimate_background(const Image& image) {
  if (image.empty()) throw InputError("cannot fit background to an empty image");
  const Eigen::Index n = static_cast<Eigen::Index>(image.size());
  Eigen::MatrixXd design(n, 6);
  Eigen::VectorXd rhs(n);
  Eigen::Index row = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x, ++row) {
      const double xd = x, yd = y;
      design.row(row) << 1.0, xd, yd, xd * xd, xd * yd, yd * yd;
      rhs(row) = image.at(x, y);
    }
  }
  // Fewer than six distinct pixel positions leaves the quadratic underdetermined;
  // complete orthogonal decomposition returns the minimum-norm fit in that case.
  const Eigen::VectorXd coef = design.completeOrthogonalDecomposition().solve(rhs);
  BackgroundModel model;
  for (int i = 0; i < 6; ++i) model.coefficients[static_cast<std::size_t>(i)] = coef(i);
  return model;
}

}  // namespace wsct
