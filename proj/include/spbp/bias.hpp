#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netgen.hpp"
#include "types.hpp"

namespace spbp {

enum class BiasKind { SpRbar, SpRbarRmaxOverR, Zero };

inline std::string_view to_string(BiasKind k) {
  switch (k) {
    case BiasKind::SpRbar: return "sp_rbar";
    case BiasKind::SpRbarRmaxOverR: return "sp_rbar_rmax_over_r";
    case BiasKind::Zero: return "zero";
  }
  return "?";
}

inline BiasKind parse_bias_kind(std::string_view s) {
  if (s == "sp_rbar") return BiasKind::SpRbar;
  if (s == "sp_rbar_rmax_over_r") return BiasKind::SpRbarRmaxOverR;
  if (s == "zero") return BiasKind::Zero;
  throw ConfigError("unknown bias scheme '" + std::string(s) + "'");
}

inline double mean_link_rate(const NetworkInstance& net) {
  if (net.links.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : net.links) s += l.rate;
  return s / static_cast<double>(net.links.size());
}

inline double max_link_rate(const NetworkInstance& net) {
  double m = 0.0;
  for (const auto& l : net.links) m = std::max(m, l.rate);
  return m;
}

/// Edge weights of a bias scheme. Zero yields all-zero weights.
inline std::vector<double> edge_weights(const NetworkInstance& net, BiasKind kind) {
  const double rbar = mean_link_rate(net);
  const double rmax = max_link_rate(net);
  std::vector<double> w(net.links.size(), 0.0);
  for (std::size_t e = 0; e < w.size(); ++e) {
    switch (kind) {
      case BiasKind::SpRbar: w[e] = rbar; break;
      case BiasKind::SpRbarRmaxOverR: w[e] = rbar * rmax / net.links[e].rate; break;
      case BiasKind::Zero: w[e] = 0.0; break;
    }
  }
  return w;
}

/// Dense node x commodity matrix of shortest-path distances.
class BiasMatrix {
public:
  BiasMatrix() = default;
  explicit BiasMatrix(int n) : n_(n), d_(static_cast<std::size_t>(n) * n, 0.0) {}

  int size() const { return n_; }
  double operator()(NodeId i, CommodityId c) const { return d_[index(i, c)]; }
  double& operator()(NodeId i, CommodityId c) { return d_[index(i, c)]; }

  // Row of node i over all commodities.
  std::span<const double> row(NodeId i) const {
    return {d_.data() + static_cast<std::size_t>(i) * n_, static_cast<std::size_t>(n_)};
  }

  void write_csv(std::ostream& os) const {
    os << "node";
    for (CommodityId c = 0; c < n_; ++c) os << ",c" << c;
    os << '\n';
    char buf[32];
    for (NodeId i = 0; i < n_; ++i) {
      os << i;
      for (CommodityId c = 0; c < n_; ++c) {
        std::snprintf(buf, sizeof buf, "%.9g", (*this)(i, c));
        os << ',' << buf;
      }
      os << '\n';
    }
  }

private:
  std::size_t index(NodeId i, CommodityId c) const {
    return static_cast<std::size_t>(i) * n_ + c;
  }
  int n_ = 0;
  std::vector<double> d_;
};

/// Shortest-path distances from every node to commodity `dest` under the
/// given per-link weights (Dijkstra on the reversed graph).
inline std::vector<double> distances_to(const NetworkInstance& net, std::span<const double> weights,
                                        NodeId dest) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(net.node_count(), inf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[dest] = 0.0;
  pq.emplace(0.0, dest);
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (LinkId e : net.in_links[v]) {
      NodeId u = net.links[e].from;
      double nd = d + weights[e];
      if (nd < dist[u]) {
        dist[u] = nd;
        pq.emplace(nd, u);
      }
    }
  }
  return dist;
}

inline BiasMatrix compute_bias(const NetworkInstance& net, std::span<const double> weights) {
  const int n = net.node_count();
  BiasMatrix b(n);
  for (CommodityId c = 0; c < n; ++c) {
    auto dist = distances_to(net, weights, c);
    for (NodeId i = 0; i < n; ++i) {
      if (!std::isfinite(dist[i]))
        throw UnreachableCommodity("node " + std::to_string(i) + " cannot reach commodity " +
                                   std::to_string(c));
      b(i, c) = dist[i];
    }
  }
  return b;
}

inline BiasMatrix compute_bias(const NetworkInstance& net, BiasKind kind) {
  if (kind == BiasKind::Zero) {
    if (!strongly_connected(net)) throw UnreachableCommodity("network is not strongly connected");
    return BiasMatrix(net.node_count());
  }
  auto w = edge_weights(net, kind);
  return compute_bias(net, w);
}

/// next_hop[i * n + c]: out-neighbour of i minimising w(i,j) + B_j^(c),
/// ties to the smallest NodeId; kNoNode on the diagonal.
class NextHopTable {
public:
  NextHopTable() = default;
  NextHopTable(int n) : n_(n), hop_(static_cast<std::size_t>(n) * n, kNoNode) {}

  NodeId operator()(NodeId i, CommodityId c) const {
    return hop_[static_cast<std::size_t>(i) * n_ + c];
  }
  NodeId& operator()(NodeId i, CommodityId c) { return hop_[static_cast<std::size_t>(i) * n_ + c]; }
  int size() const { return n_; }

private:
  int n_ = 0;
  std::vector<NodeId> hop_;
};

inline NextHopTable next_hop_table(const NetworkInstance& net, std::span<const double> weights,
                                   const BiasMatrix& bias) {
  const int n = net.node_count();
  NextHopTable t(n);
  for (NodeId i = 0; i < n; ++i) {
    for (CommodityId c = 0; c < n; ++c) {
      if (i == c) continue;
      double best = std::numeric_limits<double>::infinity();
      NodeId best_j = kNoNode;
      for (LinkId e : net.out_links[i]) {
        NodeId j = net.links[e].to;
        double cost = weights[e] + bias(j, c);
        if (cost < best || (cost == best && j < best_j)) {
          best = cost;
          best_j = j;
        }
      }
      t(i, c) = best_j;
    }
  }
  return t;
}

}  // namespace spbp
