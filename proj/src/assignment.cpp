#include "wsct/assignment.hpp"

#include <limits>

#include "wsct/error.hpp"

namespace wsct {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path Hungarian method for rows <= cols. Returns, for
// each row, its column. O(rows^2 * cols).
std::vector<int> hungarian(const CostMatrix& a) {
  const int n = a.rows, m = a.cols;
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 < 0 || delta == kInf) throw InputError("assignment problem is infeasible");
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return row_to_col;
}

}  // namespace

Assignment solve_assignment(const CostMatrix& cost, std::optional<std::vector<double>> unassigned_row_cost) {
  if (cost.values.size() != static_cast<std::size_t>(cost.rows) * cost.cols)
    throw InputError("cost matrix storage does not match its shape");
  Assignment result;
  result.row_to_col.assign(static_cast<std::size_t>(cost.rows), -1);
  if (cost.rows == 0) return result;

  if (unassigned_row_cost) {
    if (unassigned_row_cost->size() != static_cast<std::size_t>(cost.rows))
      throw InputError("one unassigned cost per row required");
    // Row i may take its private dummy column cols + i.
    CostMatrix ext(cost.rows, cost.cols + cost.rows, kInf);
    for (int i = 0; i < cost.rows; ++i) {
      for (int j = 0; j < cost.cols; ++j) ext(i, j) = cost(i, j);
      ext(i, cost.cols + i) = (*unassigned_row_cost)[static_cast<std::size_t>(i)];
    }
    const auto cols = hungarian(ext);
    for (int i = 0; i < cost.rows; ++i) {
      const int c = cols[static_cast<std::size_t>(i)];
      if (c < cost.cols) {
        result.row_to_col[static_cast<std::size_t>(i)] = c;
        result.total_cost += cost(i, c);
      } else {
        result.total_cost += (*unassigned_row_cost)[static_cast<std::size_t>(i)];
      }
    }
    return result;
  }

  if (cost.cols == 0) return result;
  if (cost.rows <= cost.cols) {
    result.row_to_col = hungarian(cost);
  } else {
    CostMatrix t(cost.cols, cost.rows);
    for (int i = 0; i < cost.rows; ++i)
      for (int j = 0; j < cost.cols; ++j) t(j, i) = cost(i, j);
    const auto col_to_row = hungarian(t);
    for (int j = 0; j < cost.cols; ++j)
      result.row_to_col[static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(j)])] = j;
  }
  for (int i = 0; i < cost.rows; ++i) {
    const int c = result.row_to_col[static_cast<std::size_t>(i)];
    if (c >= 0) result.total_cost += cost(i, c);
  }
  return result;
}

}  // namespace wsct
