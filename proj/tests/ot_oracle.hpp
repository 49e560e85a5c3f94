#pragma once

// Successive-shortest-path min-cost flow (Bellman-Ford on the residual graph).
// Independent of the simplex in measures.hpp; used only to check it.

#include <algorithm>
#include <limits>
#include <vector>

#include "dmfg/measures.hpp"

namespace oracle {

inline double min_cost_flow(const dmfg::DiscreteMeasure& mu, dmfg::DiscreteMeasure nu) {
  const std::size_t n = mu.points.size(), m = nu.points.size();
  const double ta = mu.total(), tb = nu.total();
  for (double& v : nu.masses) v *= ta / tb;
  // nodes: 0 source, 1..n rows, n+1..n+m columns, n+m+1 sink
  struct Arc {
    std::size_t to, rev;
    double cap, cost;
  };
  const std::size_t N = n + m + 2, S = 0, T = n + m + 1;
  std::vector<std::vector<Arc>> G(N);
  const auto add = [&G](std::size_t a, std::size_t b, double cap, double cost) {
    G[a].push_back({b, G[b].size(), cap, cost});
    G[b].push_back({a, G[a].size() - 1, 0.0, -cost});
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) add(S, 1 + i, mu.masses[i], 0.0);
  for (std::size_t j = 0; j < m; ++j) add(1 + n + j, T, nu.masses[j], 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) add(1 + i, 1 + n + j, inf, dmfg::euclid(mu.points[i], nu.points[j]));
  double remaining = ta, cost = 0.0;
  const double eps = 1e-15 * std::max(1.0, ta);
  while (remaining > eps) {
    std::vector<double> dist(N, inf);
    std::vector<std::size_t> pv(N, N), pe(N, 0);
    dist[S] = 0.0;
    for (std::size_t round = 0; round < N; ++round) {
      bool changed = false;
      for (std::size_t v = 0; v < N; ++v) {
        if (dist[v] == inf) continue;
        for (std::size_t e = 0; e < G[v].size(); ++e) {
          const Arc& a = G[v][e];
          if (a.cap > eps && dist[v] + a.cost < dist[a.to] - 1e-14) {
            dist[a.to] = dist[v] + a.cost;
            pv[a.to] = v;
            pe[a.to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[T] == inf) break;
    double push = remaining;
    for (std::size_t v = T; v != S; v = pv[v]) push = std::min(push, G[pv[v]][pe[v]].cap);
    for (std::size_t v = T; v != S; v = pv[v]) {
      Arc& a = G[pv[v]][pe[v]];
      a.cap -= push;
      G[v][a.rev].cap += push;
    }
    cost += push * dist[T];
    remaining -= push;
  }
  return cost;
}

}  // namespace oracle
