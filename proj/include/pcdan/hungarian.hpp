#pragma once

#include <Eigen/Core>
#include <vector>

namespace pcdan {

/// Minimum-cost linear assignment on a rectangular cost matrix (shortest
/// augmenting paths with potentials, O(n^2 m)). Returns, for every row, the
/// assigned column or -1. min(rows, cols) pairs are always assigned.
/// Scans run in ascending index order, so equal-cost optima resolve the same
/// way on every run.
std::vector<int> solve_min_cost_assignment(const Eigen::MatrixXd& cost);

}  // namespace pcdan
