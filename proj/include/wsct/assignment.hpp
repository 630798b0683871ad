#pragma once

#include <optional>
#include <vector>

namespace wsct {

// Dense row-major cost matrix.
struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  CostMatrix() = default;
  CostMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}
  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct Assignment {
  std::vector<int> row_to_col;  // -1 when a row is left unassigned
  double total_cost = 0.0;      // row-order sum of assigned (or unassigned) costs
};

// Minimum-cost one-to-one assignment (the linear program over the assignment
// polytope, solved exactly by shortest augmenting paths with potentials).
// A rectangular matrix assigns min(rows, cols) pairs. When `unassigned_row_cost`
// is given, each row may instead stay unassigned at that cost; unassigned
// columns are free.
Assignment solve_assignment(const CostMatrix& cost,
                            std::optional<std::vector<double>> unassigned_row_cost = std::nullopt);

}  // namespace wsct
