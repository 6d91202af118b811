#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bias.hpp"
#include "commodity.hpp"
#include "linkrate.hpp"
#include "metrics.hpp"
#include "netgen.hpp"
#include "queueing.hpp"
#include "scheduler.hpp"
#include "traffic.hpp"
#include "types.hpp"

namespace spbp {

struct PolicyConfig {
  Routing routing = Routing::MaxUSPBP;
  BiasKind bias = BiasKind::SpRbarRmaxOverR;
  SchedulerKind scheduler = SchedulerKind::LGS;

  std::string label() const {
    return std::string(to_string(routing)) + "-" + std::string(to_string(bias)) + "-" +
           std::string(to_string(scheduler));
  }
};

/// Preliminary assignment, utilities and schedule of one slot. gamma is
/// stored flat: link e owns gamma[begin[e] .. begin[e+1]).
struct SlotPlan {
  std::vector<std::uint32_t> begin;
  std::vector<Allocation> gamma;
  std::vector<double> weights;
  Schedule schedule;

  std::span<const Allocation> gamma_of(LinkId e) const {
    return {gamma.data() + begin[e], gamma.data() + begin[e + 1]};
  }

  /// Final assignment: gamma * x.
  Count mu(LinkId e, CommodityId c) const {
    if (!schedule[e]) return 0;
    for (const auto& a : gamma_of(e))
      if (a.commodity == c) return a.gamma;
    return 0;
  }
};

/// Runs steps 1-4 of SP-BP (Excl or MaxU) for one slot against a queue
/// snapshot `q` (n x n, row-major by node) and real-time rates.
inline SlotPlan plan_bp_slot(const NetworkInstance& net, const BiasMatrix& bias, Routing routing,
                             SchedulerKind sched, std::span<const Count> q,
                             std::span<const Count> rates) {
  const int n = net.node_count();
  const int m = net.link_count();
  SlotPlan plan;
  plan.begin.reserve(m + 1);
  plan.weights.assign(m, 0.0);
  std::vector<Allocation> scratch;
  for (LinkId e = 0; e < m; ++e) {
    plan.begin.push_back(static_cast<std::uint32_t>(plan.gamma.size()));
    const Link& l = net.links[e];
    LinkState s{q.subspan(static_cast<std::size_t>(l.from) * n, n),
                q.subspan(static_cast<std::size_t>(l.to) * n, n), bias.row(l.from), bias.row(l.to),
                rates[e]};
    select(routing, s, scratch);
    plan.weights[e] = link_utility(scratch);
    plan.gamma.insert(plan.gamma.end(), scratch.begin(), scratch.end());
  }
  plan.begin.push_back(static_cast<std::uint32_t>(plan.gamma.size()));
  plan.schedule = schedule(sched, plan.weights, net.conflicts);
  return plan;
}

// ---- per-slot trace and audit ---------------------------------------------

struct TraceEntry {
  LinkId link = 0;
  double utility = 0.0;
  bool scheduled = false;
  std::vector<Allocation> gamma;
  std::vector<Count> mu;  // parallel to gamma, as dispatched
};

struct SlotTrace {
  Slot t = 0;
  std::vector<Count> rates;
  std::vector<TraceEntry> links;  // links with a non-empty preliminary assignment
  std::vector<LinkId> scheduled;
  std::vector<std::pair<CommodityId, Count>> delivered;  // per commodity, this slot
  std::vector<Arrival> arrivals;
  Count clamp_events = 0;
};

struct AuditReport {
  bool ok = true;
  // nonnegative | link_rate | queue_length | conflict | activation |
  // final_assignment
  std::string constraint;
  std::string detail;

  explicit operator bool() const { return ok; }
};

/// Checks one slot's final assignment against the per-slot constraint
/// system: mu >= 0, per-link sum <= real-time rate, per (node, commodity)
/// outflow <= slot-start queue, no two conflicting links active, x_e set
/// exactly when link e carries traffic, and (absent a dispatch clamp)
/// mu == gamma * x.
inline AuditReport audit_constraints(const SlotTrace& tr, const NetworkInstance& net,
                                     std::span<const Count> q_start) {
  const int n = net.node_count();
  auto fail = [](std::string id, std::string detail) {
    return AuditReport{false, std::move(id), std::move(detail)};
  };
  std::vector<char> x(net.link_count(), 0);
  for (LinkId e : tr.scheduled) x[e] = 1;

  std::vector<Count> out_sum(static_cast<std::size_t>(n) * n, 0);
  std::vector<char> carries(net.link_count(), 0);
  for (const auto& le : tr.links) {
    if (le.mu.size() != le.gamma.size()) return fail("final_assignment", "mu/gamma size mismatch");
    Count total = 0;
    for (std::size_t k = 0; k < le.gamma.size(); ++k) {
      const Count mu = le.mu[k];
      if (mu < 0 || le.gamma[k].gamma < 0)
        return fail("nonnegative", "negative rate on link " + std::to_string(le.link));
      const Count expected = le.scheduled ? le.gamma[k].gamma : 0;
      if (tr.clamp_events == 0 && mu != expected)
        return fail("final_assignment", "mu != gamma * x on link " + std::to_string(le.link));
      if (mu > expected)
        return fail("final_assignment", "mu exceeds gamma * x on link " + std::to_string(le.link));
      total += mu;
      out_sum[static_cast<std::size_t>(net.links[le.link].from) * n + le.gamma[k].commodity] += mu;
    }
    if (total > tr.rates[le.link])
      return fail("link_rate", "link " + std::to_string(le.link) + " carries " + std::to_string(total) +
                            " > rate " + std::to_string(tr.rates[le.link]));
    if (le.scheduled != (x[le.link] != 0)) return fail("activation", "schedule flag mismatch");
    carries[le.link] = total > 0;
  }
  for (std::size_t k = 0; k < out_sum.size(); ++k)
    if (out_sum[k] > q_start[k])
      return fail("queue_length", "node " + std::to_string(k / n) + " commodity " + std::to_string(k % n) +
                            " sends " + std::to_string(out_sum[k]) + " > Q " +
                            std::to_string(q_start[k]));
  for (LinkId e : tr.scheduled)
    for (LinkId f : net.conflicts[e])
      if (x[f])
        return fail("conflict", "conflicting links " + std::to_string(e) + " and " + std::to_string(f) +
                              " both active");
  for (LinkId e = 0; e < net.link_count(); ++e)
    if (x[e] != carries[e])
      return fail("activation", "link " + std::to_string(e) + " x=" + std::to_string(x[e]) +
                            " but carries " + (carries[e] ? "traffic" : "nothing"));
  return {};
}

inline nlohmann::json trace_to_json(const SlotTrace& tr) {
  using nlohmann::json;
  json links = json::array();
  for (const auto& le : tr.links) {
    json alloc = json::array();
    for (std::size_t k = 0; k < le.gamma.size(); ++k)
      alloc.push_back({{"c", le.gamma[k].commodity},
                       {"gamma", le.gamma[k].gamma},
                       {"U", le.gamma[k].pressure},
                       {"mu", le.mu[k]}});
    links.push_back({{"link", le.link}, {"w", le.utility}, {"x", le.scheduled}, {"alloc", alloc}});
  }
  json delivered = json::array();
  for (const auto& [c, k] : tr.delivered) delivered.push_back({c, k});
  json arrivals = json::array();
  for (const auto& a : tr.arrivals) arrivals.push_back({{"flow", a.flow}, {"source", a.source}, {"c", a.commodity}, {"n", a.count}});
  return {{"t", tr.t},
          {"rates", tr.rates},
          {"links", links},
          {"scheduled", tr.scheduled},
          {"delivered", delivered},
          {"arrivals", arrivals},
          {"clamp_events", tr.clamp_events}};
}

// ---- simulation -----------------------------------------------------------

struct RunOptions {
  RateKind rate_kind = RateKind::Static;
  double jitter = 0.0;
  bool audit = false;
  std::function<void(const SlotTrace&)> on_trace;
  // Queue lengths (n x n, node-major) after each slot's update.
  std::function<void(Slot, std::span<const Count>)> on_queues;
};

/// One simulation run. Each step(): snapshot Q, sample rates, plan (BP) or
/// route (SPR), dispatch FIFO, deliver or enqueue receptions, inject
/// arrivals. Receptions and arrivals become eligible in the next slot.
class Simulation {
public:
  Simulation(const NetworkInstance& net, PolicyConfig policy, std::vector<FlowSpec> flows,
             std::uint64_t seed, RunOptions opts = {})
      : net_(net),
        policy_(policy),
        flows_(std::move(flows)),
        seed_(seed),
        opts_(std::move(opts)),
        rates_(opts_.rate_kind, opts_.jitter, long_term_rates(net), mix_seed({seed, 0x7261ULL})),
        counters_(flows_.size()) {
    const int n = net_.node_count();
    if (policy_.routing == Routing::SPR) {
      if (policy_.bias == BiasKind::Zero)
        throw ConfigError("spr routing needs a non-zero bias scheme for its route table");
      auto w = edge_weights(net_, policy_.bias);
      bias_ = compute_bias(net_, w);
      next_hop_ = next_hop_table(net_, w, bias_);
      route_link_.assign(static_cast<std::size_t>(n) * n, -1);
      for (NodeId i = 0; i < n; ++i)
        for (CommodityId c = 0; c < n; ++c)
          if (i != c) route_link_[static_cast<std::size_t>(i) * n + c] = net_.find_link(i, next_hop_(i, c));
      nq_ = NeighborQueues(n, net_.link_count());
    } else {
      bias_ = compute_bias(net_, policy_.bias);
      q_ = QueueState(n);
    }
  }

  Slot now() const { return t_; }
  const BiasMatrix& bias() const { return bias_; }
  const NextHopTable& next_hops() const { return next_hop_; }
  const QueueState& queues() const { return q_; }
  const NeighborQueues& neighbor_queues() const { return nq_; }
  std::span<const FlowCounters> counters() const { return counters_; }
  Count created() const { return created_; }
  Count delivered() const { return delivered_; }
  Count clamp_events() const { return clamp_events_; }

  Count enqueued() const {
    return policy_.routing == Routing::SPR ? nq_.total_enqueued() : q_.total_enqueued();
  }

  std::span<const Count> queue_lengths() const {
    return policy_.routing == Routing::SPR ? nq_.lengths() : q_.lengths();
  }

  /// Injects explicit packets at their sources, bypassing the flow model.
  void inject(NodeId source, CommodityId commodity, Count n, std::int32_t flow = -1) {
    for (Count k = 0; k < n; ++k) add_packet(source, commodity, flow);
  }

  void step() {
    const Slot t = t_;
    snapshot_.assign(queue_lengths().begin(), queue_lengths().end());
    rates_.sample(t, slot_rates_);

    const bool want_trace = opts_.audit || static_cast<bool>(opts_.on_trace);
    SlotTrace trace;
    if (want_trace) {
      trace.t = t;
      trace.rates = slot_rates_;
    }
    in_flight_.clear();
    in_flight_begin_.clear();
    Count clamps = 0;

    if (policy_.routing == Routing::SPR)
      clamps = dispatch_spr(want_trace ? &trace : nullptr);
    else
      clamps = dispatch_bp(want_trace ? &trace : nullptr);
    clamp_events_ += clamps;

    // Receptions land after all transmissions of the slot.
    delivered_now_.clear();
    for (std::size_t k = 0; k < in_flight_links_.size(); ++k) {
      const LinkId e = in_flight_links_[k];
      const NodeId j = net_.links[e].to;
      std::span<const Packet> pk(in_flight_.data() + in_flight_begin_[k],
                                 in_flight_.data() + in_flight_begin_[k + 1]);
      receive(j, pk, t);
    }

    arrivals_at(flows_, t, mix_seed({seed_, 0x6172ULL}), arrivals_);
    for (const auto& a : arrivals_)
      for (Count k = 0; k < a.count; ++k) add_packet(a.source, a.commodity, a.flow);

    if (created_ != delivered_ + enqueued())
      throw InvariantViolation("conservation", t,
                               "created " + std::to_string(created_) + " != delivered " +
                                   std::to_string(delivered_) + " + enqueued " +
                                   std::to_string(enqueued()));

    if (want_trace) {
      trace.clamp_events = clamps;
      trace.arrivals = arrivals_;
      std::map<CommodityId, Count> per_c;
      for (const auto& p : delivered_now_) ++per_c[p.commodity];
      trace.delivered.assign(per_c.begin(), per_c.end());
      if (opts_.audit) {
        auto rep = audit_constraints(trace, net_, snapshot_);
        if (!rep) throw InvariantViolation(rep.constraint, t, rep.detail);
      }
      if (opts_.on_trace) opts_.on_trace(trace);
    }
    if (opts_.on_queues) opts_.on_queues(t, queue_lengths());
    ++t_;
  }

  MetricsRecord finish() const {
    MetricsRecord r = finalize(flows_, counters_, t_);
    r.enqueued_at_end = enqueued();
    r.clamp_events = clamp_events_;
    r.lgs_rounds = lgs_rounds_;
    r.lgs_messages = lgs_messages_;
    return r;
  }

private:
  static std::vector<double> long_term_rates(const NetworkInstance& net) {
    std::vector<double> r;
    r.reserve(net.links.size());
    for (const auto& l : net.links) r.push_back(l.rate);
    return r;
  }

  void add_packet(NodeId source, CommodityId commodity, std::int32_t flow) {
    Packet p;
    p.id = next_packet_id_++;
    p.source = source;
    p.commodity = commodity;
    p.flow = flow;
    p.created_at = t_;
    ++created_;
    if (flow >= 0) ++counters_[flow].generated;
    receive(source, std::span<const Packet>(&p, 1), t_);
  }

  void receive(NodeId j, std::span<const Packet> pk, Slot t) {
    const std::size_t before = delivered_now_.size();
    if (policy_.routing == Routing::SPR) {
      const int n = net_.node_count();
      for (const Packet& p : pk) {
        if (p.commodity == j) {
          Packet d = p;
          d.delivered_at = t;
          delivered_now_.push_back(d);
        } else {
          nq_.push(j, route_link_[static_cast<std::size_t>(j) * n + p.commodity], p);
        }
      }
    } else {
      q_.deliver_or_enqueue(j, pk, t, delivered_now_);
    }
    for (std::size_t k = before; k < delivered_now_.size(); ++k) {
      const Packet& p = delivered_now_[k];
      ++delivered_;
      if (p.flow >= 0) {
        ++counters_[p.flow].delivered;
        counters_[p.flow].latency_sum += p.latency();
      }
    }
  }

  void account_schedule(const Schedule& s) {
    lgs_rounds_ += s.rounds;
    lgs_messages_ += s.messages;
  }

  Count dispatch_bp(SlotTrace* trace) {
    SlotPlan plan = plan_bp_slot(net_, bias_, policy_.routing, policy_.scheduler, snapshot_, slot_rates_);
    account_schedule(plan.schedule);
    Count clamps = 0;
    in_flight_links_.clear();
    in_flight_begin_.push_back(0);
    for (LinkId e = 0; e < net_.link_count(); ++e) {
      auto gamma = plan.gamma_of(e);
      if (gamma.empty()) continue;
      TraceEntry* te = nullptr;
      if (trace) {
        trace->links.push_back({e, plan.weights[e], plan.schedule[e], {gamma.begin(), gamma.end()}, {}});
        te = &trace->links.back();
      }
      if (!plan.schedule[e]) {
        if (te) te->mu.assign(gamma.size(), 0);
        continue;
      }
      if (trace) trace->scheduled.push_back(e);
      const NodeId i = net_.links[e].from;
      for (const auto& a : gamma) {
        // Node-level clamp: earlier links of node i may already have
        // drained this commodity.
        const Count take = std::min(a.gamma, q_.length(i, a.commodity));
        if (take < a.gamma) ++clamps;
        q_.dequeue_transmit(i, a.commodity, take, in_flight_);
        if (te) te->mu.push_back(take);
      }
      in_flight_links_.push_back(e);
      in_flight_begin_.push_back(in_flight_.size());
    }
    return clamps;
  }

  Count dispatch_spr(SlotTrace* trace) {
    const int m = net_.link_count();
    spr_weights_.assign(m, 0.0);
    for (LinkId e = 0; e < m; ++e)
      spr_weights_[e] = static_cast<double>(std::min(slot_rates_[e], nq_.link_backlog(e)));
    Schedule s = schedule(policy_.scheduler, spr_weights_, net_.conflicts);
    account_schedule(s);
    in_flight_links_.clear();
    in_flight_begin_.push_back(0);
    std::map<CommodityId, Count> per_c;
    for (LinkId e = 0; e < m; ++e) {
      const Count send = static_cast<Count>(spr_weights_[e]);
      if (send == 0) continue;
      if (trace) {
        // Per-commodity view of the head-of-line packets; unit pressure so
        // that utility equals the packet count.
        per_c.clear();
        const auto& fifo = nq_.fifo(e);
        for (Count k = 0; k < send; ++k) ++per_c[fifo[k].commodity];
        TraceEntry entry{e, spr_weights_[e], s[e], {}, {}};
        for (const auto& [c, g] : per_c) {
          entry.gamma.push_back({c, g, 1.0});
          entry.mu.push_back(s[e] ? g : 0);
        }
        trace->links.push_back(std::move(entry));
      }
      if (!s[e]) continue;
      if (trace) trace->scheduled.push_back(e);
      nq_.dequeue(net_.links[e].from, e, send, in_flight_);
      in_flight_links_.push_back(e);
      in_flight_begin_.push_back(in_flight_.size());
    }
    return 0;
  }

  const NetworkInstance& net_;
  PolicyConfig policy_;
  std::vector<FlowSpec> flows_;
  std::uint64_t seed_;
  RunOptions opts_;
  RateProcess rates_;
  BiasMatrix bias_;
  NextHopTable next_hop_;
  std::vector<LinkId> route_link_;
  QueueState q_;
  NeighborQueues nq_;

  std::vector<FlowCounters> counters_;
  Slot t_ = 0;
  std::int64_t next_packet_id_ = 0;
  Count created_ = 0;
  Count delivered_ = 0;
  Count clamp_events_ = 0;
  std::int64_t lgs_rounds_ = 0;
  std::int64_t lgs_messages_ = 0;

  // Per-slot scratch.
  std::vector<Count> snapshot_;
  std::vector<Count> slot_rates_;
  std::vector<double> spr_weights_;
  std::vector<Packet> in_flight_;
  std::vector<std::size_t> in_flight_begin_;
  std::vector<LinkId> in_flight_links_;
  std::vector<Packet> delivered_now_;
  std::vector<Arrival> arrivals_;
};

/// Runs `horizon` slots and returns the metrics. Deterministic in all
/// arguments.
inline MetricsRecord run(const NetworkInstance& net, const PolicyConfig& policy,
                         std::span<const FlowSpec> flows, Slot horizon, std::uint64_t seed,
                         const RunOptions& opts = {}) {
  Simulation sim(net, policy, {flows.begin(), flows.end()}, seed, opts);
  for (Slot t = 0; t < horizon; ++t) sim.step();
  return sim.finish();
}

}  // namespace spbp
