#pragma once

#include <vector>

namespace vsl::ot {

using PointSet = std::vector<std::vector<double>>;  // equal-weight samples, row = point

// Exact p-Wasserstein distance between two equal-weight empirical
// distributions (sizes may differ). The transport problem is solved exactly
// by successive shortest paths on the complete bipartite graph with integer
// masses (m units per source point, n per sink point), so the result is the
// true optimum of the underlying linear program. Ground cost: Euclidean.
// Throws on empty inputs or mismatched dimensions.
double wasserstein_distance(const PointSet& a, const PointSet& b, double order = 2.0);

// Minimum transport cost for explicit integer supplies/demands and a dense
// cost matrix (sum of supplies must equal sum of demands).
double min_cost_transport(const std::vector<std::vector<double>>& cost,
                          const std::vector<long long>& supply,
                          const std::vector<long long>& demand);

// Pairwise distance matrix: symmetric with a zero diagonal.
std::vector<std::vector<double>> mismatch_matrix(const std::vector<PointSet>& datasets,
                                                 double order = 2.0);

}  // namespace vsl::ot
