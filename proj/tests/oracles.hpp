#pragma once

// Independent reference implementations used only by the tests. None of
// these share code paths with the library routines they check.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "spbp/spbp.hpp"

namespace oracle {

using spbp::Count;

/// reach[u][v]: v reachable from u, by BFS from every node.
inline std::vector<std::vector<char>> reachability(int n, const std::vector<spbp::Link>& links) {
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : links) adj[l.from].push_back(l.to);
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (int s = 0; s < n; ++s) {
    std::queue<int> q;
    q.push(s);
    reach[s][s] = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (!reach[s][v]) {
          reach[s][v] = 1;
          q.push(v);
        }
    }
  }
  return reach;
}

/// Minimum hop count from every node to `dest` (BFS on reversed edges).
inline std::vector<int> hops_to(int n, const std::vector<spbp::Link>& links, int dest) {
  std::vector<std::vector<int>> radj(n);
  for (const auto& l : links) radj[l.to].push_back(l.from);
  std::vector<int> h(n, -1);
  std::queue<int> q;
  h[dest] = 0;
  q.push(dest);
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int u : radj[v])
      if (h[u] < 0) {
        h[u] = h[v] + 1;
        q.push(u);
      }
  }
  return h;
}

/// Bellman-Ford distances from every node to `dest`.
inline std::vector<double> bellman_ford_to(int n, const std::vector<spbp::Link>& links,
                                           const std::vector<double>& w, int dest) {
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  d[dest] = 0.0;
  for (int round = 0; round < n - 1; ++round) {
    bool changed = false;
    for (std::size_t e = 0; e < links.size(); ++e) {
      double cand = w[e] + d[links[e].to];
      if (cand < d[links[e].from]) {
        d[links[e].from] = cand;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

/// Best objective sum_c g_c * U_c over all integer allocations with
/// 0 <= g_c <= Q_c and sum g_c <= rate, by full enumeration.
inline double best_allocation(const std::vector<Count>& q, const std::vector<double>& u, Count rate) {
  double best = 0.0;
  std::vector<Count> g(q.size(), 0);
  auto rec = [&](auto&& self, std::size_t k, Count used, double value) -> void {
    if (k == q.size()) {
      best = std::max(best, value);
      return;
    }
    for (Count x = 0; x <= q[k] && used + x <= rate; ++x) self(self, k + 1, used + x, value + x * u[k]);
  };
  rec(rec, 0, 0, 0.0);
  return best;
}

/// Max-weight independent set by enumerating all 2^m subsets.
inline double brute_force_mwis(const std::vector<double>& w, const spbp::ConflictGraph& g) {
  const int m = static_cast<int>(w.size());
  double best = 0.0;
  for (std::uint32_t s = 0; s < (1u << m); ++s) {
    bool ok = true;
    double total = 0.0;
    for (int e = 0; e < m && ok; ++e) {
      if (!((s >> e) & 1u)) continue;
      total += w[e];
      for (int f : g[e])
        if ((s >> f) & 1u) ok = false;
    }
    if (ok) best = std::max(best, total);
  }
  return best;
}

/// Random symmetric, irreflexive conflict graph with edge probability p.
template <class Rng>
spbp::ConflictGraph random_conflict_graph(int m, double p, Rng& rng) {
  spbp::ConflictGraph g(m);
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (rng.uniform01() < p) {
        g[a].push_back(b);
        g[b].push_back(a);
      }
  return g;
}

}  // namespace oracle
