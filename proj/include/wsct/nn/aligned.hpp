#pragma once

#include <vector>

#include <Eigen/Core>

namespace wsct::nn {

// Eigen's vector kernels peel a different number of leading scalars depending
// on where a buffer starts, which changes summation order between otherwise
// identical runs. Every buffer handed to Eigen uses this.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

}  // namespace wsct::nn
