#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rng.hpp"
#include "types.hpp"

namespace spbp {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct Link {
  NodeId from = 0;
  NodeId to = 0;
  double rate = 0.0;  // long-term rate, packets/slot
};

struct NetGenParams {
  double connect_radius = 0.3;
  // <= 0 means "same as connect_radius".
  double interference_radius = 0.0;
  double r_min = 10.0;
  double r_max = 50.0;
  double rate_exponent = 1.0;
  int max_retries = 100;

  double effective_interference_radius() const {
    return interference_radius > 0.0 ? interference_radius : connect_radius;
  }
};

/// Connect radius giving roughly `mean_degree` neighbours per node for
/// uniform placement in the unit square (boundary effects ignored).
inline double radius_for_mean_degree(int n_nodes, double mean_degree) {
  if (n_nodes < 2) return 1.0;
  return std::sqrt(mean_degree / (std::numbers::pi * (n_nodes - 1)));
}

/// Distance-to-rate map: r_min at the edge of the connect radius, growing
/// as (d/R)^-exponent toward r_max for short links, rounded to whole packets.
inline double link_rate_for_distance(double d, const NetGenParams& p) {
  const double rel = std::max(d / p.connect_radius, 1e-9);
  const double raw = p.r_min * std::pow(rel, -p.rate_exponent);
  return std::round(std::clamp(raw, p.r_min, p.r_max));
}

struct NetworkInstance {
  std::vector<Point> positions;
  std::vector<Link> links;
  std::vector<std::vector<LinkId>> conflicts;  // sorted, symmetric, irreflexive
  std::uint64_t seed = 0;
  NetGenParams params;

  // Derived adjacency, rebuilt by index().
  std::vector<std::vector<LinkId>> out_links;
  std::vector<std::vector<LinkId>> in_links;

  int node_count() const { return static_cast<int>(positions.size()); }
  int link_count() const { return static_cast<int>(links.size()); }

  void index() {
    out_links.assign(positions.size(), {});
    in_links.assign(positions.size(), {});
    for (LinkId e = 0; e < link_count(); ++e) {
      out_links[links[e].from].push_back(e);
      in_links[links[e].to].push_back(e);
    }
  }

  LinkId find_link(NodeId i, NodeId j) const {
    for (LinkId e : out_links[i])
      if (links[e].to == j) return e;
    return -1;
  }
};

/// Interface conflicts (shared endpoint) plus protocol-model interference:
/// two links conflict when the transmitter of either lies within
/// `interference_radius` of the other's receiver.
inline std::vector<std::vector<LinkId>> build_conflict_graph(const NetworkInstance& net,
                                                              double interference_radius) {
  const int m = net.link_count();
  std::vector<std::vector<LinkId>> adj(m);
  for (LinkId a = 0; a < m; ++a) {
    const Link& la = net.links[a];
    for (LinkId b = a + 1; b < m; ++b) {
      const Link& lb = net.links[b];
      bool conflict = la.from == lb.from || la.from == lb.to || la.to == lb.from ||
                      la.to == lb.to;
      if (!conflict) {
        conflict = distance(net.positions[la.from], net.positions[lb.to]) <= interference_radius ||
                   distance(net.positions[lb.from], net.positions[la.to]) <= interference_radius;
      }
      if (conflict) {
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    }
  }
  return adj;
}

inline bool strongly_connected(int n_nodes, const std::vector<Link>& links) {
  if (n_nodes <= 1) return true;
  std::vector<std::vector<NodeId>> fwd(n_nodes), rev(n_nodes);
  for (const auto& l : links) {
    fwd[l.from].push_back(l.to);
    rev[l.to].push_back(l.from);
  }
  auto reaches_all = [n_nodes](const std::vector<std::vector<NodeId>>& g) {
    std::vector<char> seen(n_nodes, 0);
    std::vector<NodeId> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : g[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n_nodes;
  };
  return reaches_all(fwd) && reaches_all(rev);
}

inline bool strongly_connected(const NetworkInstance& net) {
  return strongly_connected(net.node_count(), net.links);
}

/// Builds an instance from fixed positions: bidirectional links between
/// every pair within connect_radius, rates from the distance map, and the
/// conflict graph. Does not check connectivity.
inline NetworkInstance make_network(std::vector<Point> positions, const NetGenParams& params,
                                    std::uint64_t seed = 0) {
  NetworkInstance net;
  net.positions = std::move(positions);
  net.params = params;
  net.seed = seed;
  const int n = net.node_count();
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) {
      if (i == j) continue;
      double d = distance(net.positions[i], net.positions[j]);
      if (d <= params.connect_radius) net.links.push_back({i, j, link_rate_for_distance(d, params)});
    }
  }
  net.index();
  net.conflicts = build_conflict_graph(net, params.effective_interference_radius());
  return net;
}

inline NetworkInstance generate_network(int n_nodes, const NetGenParams& params,
                                        std::uint64_t seed) {
  if (n_nodes < 2) throw std::invalid_argument("generate_network: n_nodes must be >= 2");
  if (!(params.connect_radius > 0.0))
    throw std::invalid_argument("generate_network: connect_radius must be positive");

  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    SplitMix64 rng(mix_seed({seed, 0x6e6574ULL, static_cast<std::uint64_t>(attempt)}));
    std::vector<Point> pos(n_nodes);
    for (auto& p : pos) {
      p.x = rng.uniform01();
      p.y = rng.uniform01();
    }
    NetworkInstance net = make_network(std::move(pos), params, seed);
    if (strongly_connected(net)) return net;
  }
  throw GenerationFailed("no strongly connected instance with " + std::to_string(n_nodes) +
                         " nodes after " + std::to_string(params.max_retries) + " attempts");
}

// ---- JSON ----------------------------------------------------------------

inline void to_json(nlohmann::json& j, const NetGenParams& p) {
  j = nlohmann::json{{"connect_radius", p.connect_radius},
                     {"interference_radius", p.interference_radius},
                     {"r_min", p.r_min},
                     {"r_max", p.r_max},
                     {"rate_exponent", p.rate_exponent},
                     {"max_retries", p.max_retries}};
}

inline void from_json(const nlohmann::json& j, NetGenParams& p) {
  NetGenParams d;
  p.connect_radius = j.value("connect_radius", d.connect_radius);
  p.interference_radius = j.value("interference_radius", d.interference_radius);
  p.r_min = j.value("r_min", d.r_min);
  p.r_max = j.value("r_max", d.r_max);
  p.rate_exponent = j.value("rate_exponent", d.rate_exponent);
  p.max_retries = j.value("max_retries", d.max_retries);
}

inline nlohmann::json network_to_json(const NetworkInstance& net) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& p : net.positions) nodes.push_back({p.x, p.y});
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : net.links) links.push_back({{"from", l.from}, {"to", l.to}, {"rate", l.rate}});
  return {{"seed", net.seed},
          {"params", net.params},
          {"nodes", nodes},
          {"links", links},
          {"conflicts", net.conflicts}};
}

inline NetworkInstance network_from_json(const nlohmann::json& j) {
  NetworkInstance net;
  net.seed = j.at("seed").get<std::uint64_t>();
  net.params = j.at("params").get<NetGenParams>();
  for (const auto& p : j.at("nodes")) net.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  for (const auto& l : j.at("links"))
    net.links.push_back({l.at("from").get<NodeId>(), l.at("to").get<NodeId>(), l.at("rate").get<double>()});
  net.conflicts = j.at("conflicts").get<std::vector<std::vector<LinkId>>>();
  net.index();
  return net;
}

}  // namespace spbp
