#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "types.hpp"

namespace spbp {

struct Packet {
  std::int64_t id = 0;
  NodeId source = 0;
  CommodityId commodity = 0;
  std::int32_t flow = -1;
  Slot created_at = 0;
  std::optional<Slot> delivered_at;

  Slot latency() const { return *delivered_at - created_at; }
};

/// Per-node, per-commodity FIFO queues. Q_i^(i) is identically zero: a
/// packet reaching its destination is delivered, never enqueued.
class QueueState {
public:
  QueueState() = default;
  explicit QueueState(int n_nodes)
      : n_(n_nodes),
        fifo_(static_cast<std::size_t>(n_nodes) * n_nodes),
        len_(static_cast<std::size_t>(n_nodes) * n_nodes, 0) {}

  int node_count() const { return n_; }

  Count length(NodeId i, CommodityId c) const { return len_[idx(i, c)]; }

  /// Queue lengths of node i over all commodities.
  std::span<const Count> row(NodeId i) const {
    return {len_.data() + static_cast<std::size_t>(i) * n_, static_cast<std::size_t>(n_)};
  }

  /// Full n x n length matrix, row-major by node.
  std::span<const Count> lengths() const { return len_; }

  const std::deque<Packet>& fifo(NodeId i, CommodityId c) const { return fifo_[idx(i, c)]; }

  Count total_enqueued() const { return total_; }

  /// Injects new packets at their source node (in the given order, which
  /// callers keep sorted by packet id). Self-addressed packets are
  /// delivered on the spot and returned.
  std::vector<Packet> enqueue_arrivals(std::span<const Packet> arrivals, Slot t) {
    std::vector<Packet> delivered;
    for (const Packet& p : arrivals) {
      if (p.commodity == p.source) {
        Packet d = p;
        d.delivered_at = t;
        delivered.push_back(d);
      } else {
        push(p.source, p);
      }
    }
    return delivered;
  }

  /// Removes and returns the n oldest packets of fifo(i, c).
  std::vector<Packet> dequeue_transmit(NodeId i, CommodityId c, Count n) {
    std::vector<Packet> out;
    dequeue_transmit(i, c, n, out);
    return out;
  }

  void dequeue_transmit(NodeId i, CommodityId c, Count n, std::vector<Packet>& out) {
    auto& q = fifo_[idx(i, c)];
    if (n < 0 || n > static_cast<Count>(q.size()))
      throw InsufficientQueue("dequeue of " + std::to_string(n) + " packets from (" +
                              std::to_string(i) + "," + std::to_string(c) + ") holding " +
                              std::to_string(q.size()));
    for (Count k = 0; k < n; ++k) {
      out.push_back(std::move(q.front()));
      q.pop_front();
    }
    len_[idx(i, c)] -= n;
    total_ -= n;
  }

  /// Packets received by node j: those addressed to j are delivered at t
  /// and returned, the rest join fifo(j, c) in their given order.
  std::vector<Packet> deliver_or_enqueue(NodeId j, std::span<const Packet> packets, Slot t) {
    std::vector<Packet> delivered;
    deliver_or_enqueue(j, packets, t, delivered);
    return delivered;
  }

  void deliver_or_enqueue(NodeId j, std::span<const Packet> packets, Slot t,
                          std::vector<Packet>& delivered) {
    for (const Packet& p : packets) {
      if (p.commodity == j) {
        Packet d = p;
        d.delivered_at = t;
        delivered.push_back(d);
      } else {
        push(j, p);
      }
    }
  }

private:
  std::size_t idx(NodeId i, CommodityId c) const { return static_cast<std::size_t>(i) * n_ + c; }

  void push(NodeId i, const Packet& p) {
    fifo_[idx(i, p.commodity)].push_back(p);
    ++len_[idx(i, p.commodity)];
    ++total_;
  }

  int n_ = 0;
  std::vector<std::deque<Packet>> fifo_;
  std::vector<Count> len_;
  Count total_ = 0;
};

/// Per-neighbour FIFOs for shortest-path routing: node i keeps one queue
/// per outgoing link, mixing every commodity routed through it. Per
/// (node, commodity) counts are tracked alongside for auditing.
class NeighborQueues {
public:
  NeighborQueues() = default;
  NeighborQueues(int n_nodes, int n_links)
      : n_(n_nodes),
        fifo_(n_links),
        len_(static_cast<std::size_t>(n_nodes) * n_nodes, 0) {}

  Count length(NodeId i, CommodityId c) const { return len_[static_cast<std::size_t>(i) * n_ + c]; }
  std::span<const Count> lengths() const { return len_; }
  Count link_backlog(LinkId e) const { return static_cast<Count>(fifo_[e].size()); }
  const std::deque<Packet>& fifo(LinkId e) const { return fifo_[e]; }
  Count total_enqueued() const { return total_; }

  /// Packet p now sits at node `at` and leaves over link `via`.
  void push(NodeId at, LinkId via, const Packet& p) {
    fifo_[via].push_back(p);
    ++len_[static_cast<std::size_t>(at) * n_ + p.commodity];
    ++total_;
  }

  void dequeue(NodeId at, LinkId via, Count n, std::vector<Packet>& out) {
    auto& q = fifo_[via];
    if (n < 0 || n > static_cast<Count>(q.size()))
      throw InsufficientQueue("dequeue of " + std::to_string(n) + " packets from link " +
                              std::to_string(via));
    for (Count k = 0; k < n; ++k) {
      --len_[static_cast<std::size_t>(at) * n_ + q.front().commodity];
      out.push_back(std::move(q.front()));
      q.pop_front();
    }
    total_ -= n;
  }

private:
  int n_ = 0;
  std::vector<std::deque<Packet>> fifo_;
  std::vector<Count> len_;
  Count total_ = 0;
};

}  // namespace spbp
