#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "types.hpp"

namespace spbp {

enum class Routing { ExclSPBP, MaxUSPBP, SPR };

inline std::string_view to_string(Routing r) {
  switch (r) {
    case Routing::ExclSPBP: return "excl";
    case Routing::MaxUSPBP: return "maxu";
    case Routing::SPR: return "spr";
  }
  return "?";
}

inline Routing parse_routing(std::string_view s) {
  if (s == "excl") return Routing::ExclSPBP;
  if (s == "maxu") return Routing::MaxUSPBP;
  if (s == "spr") return Routing::SPR;
  throw ConfigError("unknown routing policy '" + std::string(s) + "'");
}

/// Slot-start view of one directed link (i, j): queue and bias rows of
/// both endpoints over all commodities, plus the real-time rate.
struct LinkState {
  std::span<const Count> q_from;
  std::span<const Count> q_to;
  std::span<const double> bias_from;
  std::span<const double> bias_to;
  Count rate = 0;

  std::size_t commodity_count() const { return q_from.size(); }

  /// Biased backlog difference U_i^(c) - U_j^(c).
  double pressure(CommodityId c) const {
    const double u_from = static_cast<double>(q_from[c]) + bias_from[c];
    const double u_to = static_cast<double>(q_to[c]) + bias_to[c];
    return u_from - u_to;
  }
};

/// Preliminary rate of one commodity on one link.
struct Allocation {
  CommodityId commodity = 0;
  Count gamma = 0;
  double pressure = 0.0;

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// Classic exclusive selection: the max-pressure commodity (smallest id on
/// ties) takes min(rate, Q) if its pressure is positive. The argmax runs
/// over every commodity, empty queues included.
inline void excl_select(const LinkState& s, std::vector<Allocation>& out) {
  out.clear();
  const auto n = static_cast<CommodityId>(s.commodity_count());
  if (n == 0) return;
  CommodityId best = 0;
  double best_u = s.pressure(0);
  for (CommodityId c = 1; c < n; ++c) {
    const double u = s.pressure(c);
    if (u > best_u) {
      best_u = u;
      best = c;
    }
  }
  if (!(best_u > 0.0)) return;
  const Count g = std::min(s.rate, s.q_from[best]);
  if (g > 0) out.push_back({best, g, best_u});
}

inline std::vector<Allocation> excl_select(const LinkState& s) {
  std::vector<Allocation> out;
  excl_select(s, out);
  return out;
}

/// Link-sharing selection: keep commodities with positive pressure and a
/// non-empty queue, sort by decreasing pressure (smallest id on ties), and
/// hand out the residual rate in that order.
///
/// `out` lists the commodities that received a positive rate, in
/// allocation order. Every served commodity gets at least one packet, so
/// only the top min(rate, |candidates|) entries are ordered:
/// O(|C| log min(rate, |C|)).
inline void maxu_select(const LinkState& s, std::vector<Allocation>& out) {
  out.clear();
  const auto n = static_cast<CommodityId>(s.commodity_count());
  for (CommodityId c = 0; c < n; ++c) {
    if (s.q_from[c] <= 0) continue;
    const double u = s.pressure(c);
    if (u > 0.0) out.push_back({c, 0, u});
  }
  auto by_pressure = [](const Allocation& a, const Allocation& b) {
    return a.pressure > b.pressure || (a.pressure == b.pressure && a.commodity < b.commodity);
  };
  const auto top = static_cast<std::size_t>(std::clamp<Count>(s.rate, 0, static_cast<Count>(out.size())));
  if (top == out.size())
    std::sort(out.begin(), out.end(), by_pressure);
  else
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(top), out.end(), by_pressure);
  Count residual = std::max<Count>(s.rate, 0);
  std::size_t kept = 0;
  for (auto& a : out) {
    if (residual == 0) break;
    a.gamma = std::min(residual, s.q_from[a.commodity]);
    residual -= a.gamma;
    ++kept;
  }
  out.resize(kept);
}

inline std::vector<Allocation> maxu_select(const LinkState& s) {
  std::vector<Allocation> out;
  maxu_select(s, out);
  return out;
}

inline void select(Routing r, const LinkState& s, std::vector<Allocation>& out) {
  if (r == Routing::MaxUSPBP)
    maxu_select(s, out);
  else
    excl_select(s, out);
}

/// w = sum_c gamma^(c) * max(U^(c), 0).
inline double link_utility(std::span<const Allocation> allocs) {
  double w = 0.0;
  for (const auto& a : allocs) w += static_cast<double>(a.gamma) * std::max(a.pressure, 0.0);
  return w;
}

}  // namespace spbp
