#include "vsl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace vsl::ot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Successive shortest paths with node potentials on the complete bipartite
// transport graph. Sources 0..n-1 precede sinks in the node numbering;
// residual backward arcs exist where flow is positive. Reduced costs stay
// nonnegative, so plain Dijkstra applies; every augmentation saturates a
// source, a sink, or empties a backward arc.
class TransportSolver {
 public:
  TransportSolver(const std::vector<std::vector<double>>& cost, std::vector<long long> supply,
                  std::vector<long long> demand)
      : cost_(cost),
        supply_(std::move(supply)),
        demand_(std::move(demand)),
        n_(supply_.size()),
        m_(demand_.size()),
        flow_(n_, std::vector<long long>(m_, 0)),
        pot_(n_ + m_, 0.0) {}

  double solve() {
    long long total_supply = 0, total_demand = 0;
    for (const auto s : supply_) total_supply += s;
    for (const auto d : demand_) total_demand += d;
    if (total_supply != total_demand) {
      throw std::invalid_argument("transport supplies and demands must balance");
    }
    long long remaining = total_supply;
    while (remaining > 0) {
      const long long pushed = augment();
      if (pushed <= 0) throw std::runtime_error("transport augmentation failed");
      remaining -= pushed;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        if (flow_[i][j] > 0) total += static_cast<double>(flow_[i][j]) * cost_[i][j];
      }
    }
    return total;
  }

 private:
  double reduced_fwd(std::size_t i, std::size_t j) const {
    return cost_[i][j] + pot_[i] - pot_[n_ + j];
  }

  long long augment() {
    const std::size_t nodes = n_ + m_;
    std::vector<double> dist(nodes, kInf);
    std::vector<int> prev(nodes, -1);
    std::vector<char> done(nodes, 0);

    using QItem = std::pair<double, std::size_t>;
    std::priority_queue<QItem, std::vector<QItem>, std::greater<>> queue;
    for (std::size_t i = 0; i < n_; ++i) {
      if (supply_[i] > 0) {
        dist[i] = 0.0;
        queue.push({0.0, i});
      }
    }

    while (!queue.empty()) {
      const auto [d, u] = queue.top();
      queue.pop();
      if (done[u]) continue;
      done[u] = 1;
      if (u < n_) {
        for (std::size_t j = 0; j < m_; ++j) {
          const double nd = d + std::max(reduced_fwd(u, j), 0.0);
          const std::size_t v = n_ + j;
          if (nd < dist[v]) {
            dist[v] = nd;
            prev[v] = static_cast<int>(u);
            queue.push({nd, v});
          }
        }
      } else {
        const std::size_t j = u - n_;
        for (std::size_t i = 0; i < n_; ++i) {
          if (flow_[i][j] <= 0) continue;
          const double nd = d + std::max(-reduced_fwd(i, j), 0.0);
          if (nd < dist[i]) {
            dist[i] = nd;
            prev[i] = static_cast<int>(u);
            queue.push({nd, i});
          }
        }
      }
    }

    // Cheapest reachable sink with remaining demand.
    int best = -1;
    for (std::size_t j = 0; j < m_; ++j) {
      if (demand_[j] <= 0 || dist[n_ + j] == kInf) continue;
      if (best < 0 || dist[n_ + j] < dist[n_ + static_cast<std::size_t>(best)]) {
        best = static_cast<int>(j);
      }
    }
    if (best < 0) return 0;
    const std::size_t sink = n_ + static_cast<std::size_t>(best);

    // Walk back to the origin source, collecting arcs and the bottleneck.
    std::vector<std::pair<std::size_t, std::size_t>> fwd, bwd;
    long long bottleneck = demand_[static_cast<std::size_t>(best)];
    std::size_t node = sink;
    while (prev[node] >= 0) {
      const auto p = static_cast<std::size_t>(prev[node]);
      if (node >= n_) {
        fwd.push_back({p, node - n_});  // source p -> this sink
      } else {
        bwd.push_back({node, p - n_});  // backward arc: reduce flow[node][p - n_]
        bottleneck = std::min(bottleneck, flow_[node][p - n_]);
      }
      node = p;
    }
    const std::size_t src = node;
    bottleneck = std::min(bottleneck, supply_[src]);
    if (bottleneck <= 0) return 0;

    for (const auto& [i, j] : fwd) flow_[i][j] += bottleneck;
    for (const auto& [i, j] : bwd) flow_[i][j] -= bottleneck;
    supply_[src] -= bottleneck;
    demand_[static_cast<std::size_t>(best)] -= bottleneck;

    // Potential update capped at the target distance keeps reduced costs
    // nonnegative on every residual arc.
    const double dt = dist[sink];
    for (std::size_t v = 0; v < nodes; ++v) {
      pot_[v] += std::min(dist[v], dt);
    }
    return bottleneck;
  }

  const std::vector<std::vector<double>>& cost_;
  std::vector<long long> supply_;
  std::vector<long long> demand_;
  std::size_t n_, m_;
  std::vector<std::vector<long long>> flow_;
  std::vector<double> pot_;
};

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double min_cost_transport(const std::vector<std::vector<double>>& cost,
                          const std::vector<long long>& supply,
                          const std::vector<long long>& demand) {
  if (cost.size() != supply.size()) throw std::invalid_argument("cost rows != supply size");
  for (const auto& row : cost) {
    if (row.size() != demand.size()) throw std::invalid_argument("cost cols != demand size");
  }
  TransportSolver solver(cost, supply, demand);
  return solver.solve();
}

double wasserstein_distance(const PointSet& a, const PointSet& b, double order) {
  if (a.empty() || b.empty()) throw std::invalid_argument("point sets must be nonempty");
  if (order <= 0.0) throw std::invalid_argument("order must be positive");
  const std::size_t dim = a.front().size();
  for (const auto& p : a) {
    if (p.size() != dim) throw std::invalid_argument("dimension mismatch within first set");
  }
  for (const auto& p : b) {
    if (p.size() != dim) throw std::invalid_argument("dimension mismatch between sets");
  }
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      cost[i][j] = std::pow(euclidean(a[i], b[j]), order);
    }
  }
  // Integer masses make the solution exact: every source carries m units,
  // every sink n, so one unit is 1/(n*m) of the total mass.
  const std::vector<long long> supply(n, static_cast<long long>(m));
  const std::vector<long long> demand(m, static_cast<long long>(n));
  const double total = min_cost_transport(cost, supply, demand);
  const double mean = total / static_cast<double>(n * m);
  return std::pow(mean, 1.0 / order);
}

std::vector<std::vector<double>> mismatch_matrix(const std::vector<PointSet>& datasets,
                                                 double order) {
  if (datasets.size() < 2) throw std::invalid_argument("need at least two datasets");
  const std::size_t n = datasets.size();
  std::vector<std::vector<double>> mat(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = wasserstein_distance(datasets[i], datasets[j], order);
      mat[i][j] = d;
      mat[j][i] = d;
    }
  }
  return mat;
}

}  // namespace vsl::ot
