#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rng.hpp"
#include "types.hpp"

namespace spbp {

enum class FlowKind { Streaming, Bursty };

inline std::string_view to_string(FlowKind k) {
  return k == FlowKind::Streaming ? "streaming" : "bursty";
}

inline constexpr Slot kDefaultBurstLen = 30;

struct FlowSpec {
  NodeId source = 0;
  CommodityId commodity = 0;
  double rate = 0.0;  // lambda, packets/slot
  FlowKind kind = FlowKind::Streaming;
  Slot burst_start = 0;
  Slot burst_len = kDefaultBurstLen;

  bool active(Slot t) const {
    if (kind == FlowKind::Streaming) return true;
    return t >= burst_start && t < burst_start + burst_len;
  }
};

/// Per-flow rate: a fixed lambda, or lambda ~ U(lo, hi) drawn per flow.
struct RateSpec {
  bool uniform = false;
  double value = 1.0;
  double lo = 0.1;
  double hi = 1.0;

  static RateSpec fixed(double v) { return {false, v, 0.0, 0.0}; }
  static RateSpec uniform_between(double lo, double hi) { return {true, 0.0, lo, hi}; }

  std::string label() const;
};

inline std::string RateSpec::label() const {
  char buf[64];
  if (uniform)
    std::snprintf(buf, sizeof buf, "U(%g:%g)", lo, hi);
  else
    std::snprintf(buf, sizeof buf, "%g", value);
  return buf;
}

struct TrafficMix {
  int streaming = 0;
  int bursty = 0;
  Slot burst_len = kDefaultBurstLen;
};

/// Knuth's product method for small means, the standard library otherwise.
template <class Rng>
Count poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean < 30.0) {
    const double limit = std::exp(-mean);
    double prod = rng.uniform01();
    Count k = 0;
    while (prod > limit) {
      ++k;
      prod *= rng.uniform01();
    }
    return k;
  }
  std::poisson_distribution<Count> d(mean);
  return d(rng);
}

/// Samples distinct (source, destination) pairs uniformly without
/// replacement: the first `mix.streaming` become streaming flows, the rest
/// bursty with start ~ U{0..horizon-100}.
inline std::vector<FlowSpec> draw_flows(int n_nodes, const TrafficMix& mix, const RateSpec& rate,
                                        Slot horizon, std::uint64_t seed) {
  const std::int64_t n_pairs = static_cast<std::int64_t>(n_nodes) * (n_nodes - 1);
  const int n_flows = mix.streaming + mix.bursty;
  if (n_flows > n_pairs)
    throw TooManyFlows(std::to_string(n_flows) + " flows requested but only " +
                       std::to_string(n_pairs) + " ordered pairs exist");
  if (mix.bursty > 0 && horizon <= 100)
    throw std::invalid_argument("draw_flows: bursty traffic needs horizon > 100");

  SplitMix64 rng(mix_seed({seed, 0x666c6f77ULL}));
  auto below = [&rng](std::int64_t n) {
    return static_cast<std::int64_t>(rng.uniform01() * static_cast<double>(n));
  };

  // Partial Fisher-Yates over the pair index space, sparse.
  std::vector<std::int64_t> chosen;
  std::vector<std::pair<std::int64_t, std::int64_t>> swapped;  // (pos, value)
  auto value_at = [&swapped](std::int64_t pos) {
    for (auto it = swapped.rbegin(); it != swapped.rend(); ++it)
      if (it->first == pos) return it->second;
    return pos;
  };
  for (int k = 0; k < n_flows; ++k) {
    std::int64_t pick = k + below(n_pairs - k);
    std::int64_t v_pick = value_at(pick);
    std::int64_t v_k = value_at(k);
    swapped.emplace_back(pick, v_k);
    swapped.emplace_back(k, v_pick);
    chosen.push_back(v_pick);
  }

  std::vector<FlowSpec> flows;
  flows.reserve(n_flows);
  for (int k = 0; k < n_flows; ++k) {
    const std::int64_t p = chosen[k];
    FlowSpec f;
    f.source = static_cast<NodeId>(p / (n_nodes - 1));
    const auto off = static_cast<NodeId>(p % (n_nodes - 1));
    f.commodity = off < f.source ? off : off + 1;
    f.rate = rate.uniform ? rate.lo + (rate.hi - rate.lo) * rng.uniform01() : rate.value;
    if (k < mix.streaming) {
      f.kind = FlowKind::Streaming;
    } else {
      f.kind = FlowKind::Bursty;
      f.burst_len = mix.burst_len;
      f.burst_start = below(horizon - 100 + 1);
    }
    flows.push_back(f);
  }
  return flows;
}

struct Arrival {
  std::int32_t flow = 0;
  NodeId source = 0;
  CommodityId commodity = 0;
  Count count = 0;
};

/// Poisson(lambda) arrivals of every active flow in slot t, in flow order.
/// Keyed by (seed, flow, t).
inline void arrivals_at(std::span<const FlowSpec> flows, Slot t, std::uint64_t seed,
                        std::vector<Arrival>& out) {
  out.clear();
  for (std::size_t k = 0; k < flows.size(); ++k) {
    const FlowSpec& f = flows[k];
    if (!f.active(t)) continue;
    SplitMix64 rng(mix_seed({seed, 0x61727276ULL, k, static_cast<std::uint64_t>(t)}));
    const Count n = poisson(rng, f.rate);
    if (n > 0) out.push_back({static_cast<std::int32_t>(k), f.source, f.commodity, n});
  }
}

inline std::vector<Arrival> arrivals_at(std::span<const FlowSpec> flows, Slot t,
                                        std::uint64_t seed) {
  std::vector<Arrival> out;
  arrivals_at(flows, t, seed, out);
  return out;
}

}  // namespace spbp
