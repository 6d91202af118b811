#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "traffic.hpp"
#include "types.hpp"

namespace spbp {

/// Latency x delivery ratio + horizon x (1 - delivery ratio).
inline double composite_latency(double mean_latency, double delivery_ratio, double horizon) {
  return mean_latency * delivery_ratio + horizon * (1.0 - delivery_ratio);
}

struct FlowCounters {
  Count generated = 0;
  Count delivered = 0;
  Count latency_sum = 0;  // slots, over delivered packets
};

struct FlowMetrics {
  FlowSpec spec;
  Count generated = 0;
  Count delivered = 0;
  double mean_latency = 0.0;
  double delivery_ratio = 1.0;
  double throughput = 0.0;
  double composite_latency = 0.0;
  bool empty = false;  // nothing generated; ratio and composite set by convention
};

/// Averages over the flows of one traffic kind. mean_latency averages only
/// flows with at least one delivery.
struct KindSummary {
  FlowKind kind = FlowKind::Streaming;
  int flows = 0;
  double throughput = 0.0;
  double delivery_ratio = 0.0;
  double mean_latency = 0.0;
  double composite_latency = 0.0;
};

struct MetricsRecord {
  Slot horizon = 0;
  std::vector<FlowMetrics> flows;
  std::vector<KindSummary> by_kind;
  Count generated = 0;
  Count delivered = 0;
  Count enqueued_at_end = 0;
  Count clamp_events = 0;
  std::int64_t lgs_rounds = 0;
  std::int64_t lgs_messages = 0;

  const KindSummary* kind(FlowKind k) const {
    for (const auto& s : by_kind)
      if (s.kind == k) return &s;
    return nullptr;
  }
};

inline FlowMetrics flow_metrics(const FlowSpec& spec, const FlowCounters& c, Slot horizon) {
  FlowMetrics m;
  m.spec = spec;
  m.generated = c.generated;
  m.delivered = c.delivered;
  m.throughput = horizon > 0 ? static_cast<double>(c.delivered) / static_cast<double>(horizon) : 0.0;
  if (c.generated == 0) {
    m.empty = true;
    m.delivery_ratio = 1.0;
    m.composite_latency = 0.0;
    return m;
  }
  m.delivery_ratio = static_cast<double>(c.delivered) / static_cast<double>(c.generated);
  m.mean_latency =
      c.delivered > 0 ? static_cast<double>(c.latency_sum) / static_cast<double>(c.delivered) : 0.0;
  m.composite_latency = composite_latency(m.mean_latency, m.delivery_ratio, static_cast<double>(horizon));
  return m;
}

inline MetricsRecord finalize(std::span<const FlowSpec> flows, std::span<const FlowCounters> counters,
                              Slot horizon) {
  MetricsRecord r;
  r.horizon = horizon;
  for (std::size_t k = 0; k < flows.size(); ++k) {
    r.flows.push_back(flow_metrics(flows[k], counters[k], horizon));
    r.generated += counters[k].generated;
    r.delivered += counters[k].delivered;
  }
  for (FlowKind kind : {FlowKind::Streaming, FlowKind::Bursty}) {
    KindSummary s;
    s.kind = kind;
    int with_latency = 0;
    for (const auto& f : r.flows) {
      if (f.spec.kind != kind) continue;
      ++s.flows;
      s.throughput += f.throughput;
      s.delivery_ratio += f.delivery_ratio;
      s.composite_latency += f.composite_latency;
      if (f.delivered > 0) {
        s.mean_latency += f.mean_latency;
        ++with_latency;
      }
    }
    if (s.flows == 0) continue;
    s.throughput /= s.flows;
    s.delivery_ratio /= s.flows;
    s.composite_latency /= s.flows;
    if (with_latency > 0) s.mean_latency /= with_latency;
    r.by_kind.push_back(s);
  }
  return r;
}

// ---- aggregation ---------------------------------------------------------

struct SampleRow {
  std::vector<std::string> key;
  std::vector<double> values;
};

struct GroupSummary {
  std::vector<std::string> key;
  std::size_t n = 0;
  std::vector<double> mean;
  std::vector<double> ci95;  // half-width, 1.96 s / sqrt(n)
};

/// Groups rows by key (sorted key order) and reports per-column mean with a
/// normal-approximation 95% confidence half-width.
inline std::vector<GroupSummary> aggregate(std::span<const SampleRow> rows) {
  std::map<std::vector<std::string>, std::vector<const SampleRow*>> groups;
  for (const auto& r : rows) groups[r.key].push_back(&r);

  std::vector<GroupSummary> out;
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) {
      std::string k;
      for (const auto& part : key) k += (k.empty() ? "" : "/") + part;
      throw InsufficientSamples("group " + k + " has " + std::to_string(members.size()) +
                                " sample(s); need at least 2");
    }
    const std::size_t cols = members.front()->values.size();
    GroupSummary g;
    g.key = key;
    g.n = members.size();
    g.mean.assign(cols, 0.0);
    g.ci95.assign(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
      double sum = 0.0;
      for (const auto* m : members) sum += m->values[c];
      const double mean = sum / static_cast<double>(g.n);
      double ss = 0.0;
      for (const auto* m : members) ss += (m->values[c] - mean) * (m->values[c] - mean);
      const double sd = std::sqrt(ss / static_cast<double>(g.n - 1));
      g.mean[c] = mean;
      g.ci95[c] = 1.96 * sd / std::sqrt(static_cast<double>(g.n));
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json metrics_to_json(const MetricsRecord& r) {
  using nlohmann::json;
  json flows = json::array();
  for (const auto& f : r.flows) {
    flows.push_back({{"source", f.spec.source},
                     {"commodity", f.spec.commodity},
                     {"kind", to_string(f.spec.kind)},
                     {"lambda", f.spec.rate},
                     {"burst_start", f.spec.burst_start},
                     {"burst_len", f.spec.burst_len},
                     {"generated", f.generated},
                     {"delivered", f.delivered},
                     {"mean_latency", f.mean_latency},
                     {"delivery_ratio", f.delivery_ratio},
                     {"throughput", f.throughput},
                     {"composite_latency", f.composite_latency},
                     {"empty", f.empty}});
  }
  json kinds = json::array();
  for (const auto& s : r.by_kind) {
    kinds.push_back({{"kind", to_string(s.kind)},
                     {"flows", s.flows},
                     {"throughput", s.throughput},
                     {"delivery_ratio", s.delivery_ratio},
                     {"mean_latency", s.mean_latency},
                     {"composite_latency", s.composite_latency}});
  }
  return {{"horizon", r.horizon},
          {"generated", r.generated},
          {"delivered", r.delivered},
          {"enqueued_at_end", r.enqueued_at_end},
          {"clamp_events", r.clamp_events},
          {"lgs_rounds", r.lgs_rounds},
          {"lgs_messages", r.lgs_messages},
          {"arrival_law", "poisson"},
          {"by_kind", kinds},
          {"flows", flows}};
}

}  // namespace spbp
