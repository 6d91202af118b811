#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "types.hpp"

namespace spbp {

enum class SchedulerKind { LGS, ExactMWIS };

inline std::string_view to_string(SchedulerKind k) {
  return k == SchedulerKind::LGS ? "lgs" : "exact";
}

inline SchedulerKind parse_scheduler(std::string_view s) {
  if (s == "lgs") return SchedulerKind::LGS;
  if (s == "exact") return SchedulerKind::ExactMWIS;
  throw ConfigError("unknown scheduler '" + std::string(s) + "'");
}

using ConflictGraph = std::vector<std::vector<LinkId>>;

struct Schedule {
  std::vector<char> active;  // x_e
  int rounds = 0;            // LGS only
  std::int64_t messages = 0; // LGS only: weight announcements exchanged

  bool operator[](LinkId e) const { return active[e] != 0; }

  double total(std::span<const double> weights) const {
    double s = 0.0;
    for (std::size_t e = 0; e < active.size(); ++e)
      if (active[e]) s += weights[e];
    return s;
  }

  std::vector<LinkId> links() const {
    std::vector<LinkId> out;
    for (std::size_t e = 0; e < active.size(); ++e)
      if (active[e]) out.push_back(static_cast<LinkId>(e));
    return out;
  }
};

inline bool is_independent(const Schedule& s, const ConflictGraph& conflicts) {
  for (LinkId e = 0; e < static_cast<LinkId>(conflicts.size()); ++e) {
    if (!s.active[e]) continue;
    for (LinkId f : conflicts[e])
      if (s.active[f]) return false;
  }
  return true;
}

/// Every positive-weight link is either scheduled or blocked by a
/// scheduled conflict neighbour.
inline bool is_maximal(const Schedule& s, std::span<const double> weights,
                       const ConflictGraph& conflicts) {
  for (LinkId e = 0; e < static_cast<LinkId>(conflicts.size()); ++e) {
    if (s.active[e] || !(weights[e] > 0.0)) continue;
    bool blocked = false;
    for (LinkId f : conflicts[e]) blocked = blocked || s.active[f];
    if (!blocked) return false;
  }
  return true;
}

/// Local greedy scheduling, emulated centrally as synchronous rounds: an
/// undecided link whose (weight, -id) beats every undecided conflict
/// neighbour joins the schedule and its neighbours drop out. Zero-weight
/// links never join.
inline Schedule lgs_schedule(std::span<const double> weights, const ConflictGraph& conflicts) {
  enum : char { Undecided = 0, In = 1, Out = 2 };
  const auto m = static_cast<LinkId>(weights.size());
  std::vector<char> state(m, Undecided);
  std::vector<LinkId> pending;
  for (LinkId e = 0; e < m; ++e) {
    if (weights[e] > 0.0)
      pending.push_back(e);
    else
      state[e] = Out;
  }

  auto beats = [&](LinkId a, LinkId b) {
    return weights[a] > weights[b] || (weights[a] == weights[b] && a < b);
  };

  Schedule s;
  std::vector<LinkId> winners;
  while (!pending.empty()) {
    ++s.rounds;
    winners.clear();
    for (LinkId e : pending) {
      bool local_max = true;
      for (LinkId f : conflicts[e]) {
        if (state[f] != Undecided) continue;
        ++s.messages;
        if (!beats(e, f)) local_max = false;
      }
      if (local_max) winners.push_back(e);
    }
    for (LinkId e : winners) {
      state[e] = In;
      for (LinkId f : conflicts[e])
        if (state[f] == Undecided) state[f] = Out;
    }
    std::erase_if(pending, [&](LinkId e) { return state[e] != Undecided; });
  }

  s.active.assign(m, 0);
  for (LinkId e = 0; e < m; ++e) s.active[e] = state[e] == In;
  return s;
}

inline constexpr int kExactMwisCap = 24;

/// Maximum weight independent set by depth-first branch and bound over
/// positive-weight links in id order (include before exclude). Among
/// optimal sets the lexicographically smallest is returned.
inline Schedule exact_mwis(std::span<const double> weights, const ConflictGraph& conflicts,
                           int cap = kExactMwisCap) {
  const auto m = static_cast<int>(weights.size());
  if (m > cap || m > 32)
    throw TooLarge("exact_mwis: " + std::to_string(m) + " links exceeds cap " + std::to_string(cap));

  std::vector<std::uint32_t> nbr(m, 0);
  for (int e = 0; e < m; ++e)
    for (LinkId f : conflicts[e]) nbr[e] |= std::uint32_t{1} << f;

  std::vector<int> cand;
  for (int e = 0; e < m; ++e)
    if (weights[e] > 0.0) cand.push_back(e);
  std::vector<double> suffix(cand.size() + 1, 0.0);
  for (int k = static_cast<int>(cand.size()) - 1; k >= 0; --k) suffix[k] = suffix[k + 1] + weights[cand[k]];

  double best = 0.0;
  std::uint32_t best_set = 0;

  auto search = [&](auto&& self, std::size_t k, std::uint32_t chosen, std::uint32_t blocked,
                    double total) -> void {
    if (total > best) {
      best = total;
      best_set = chosen;
    }
    if (k == cand.size() || total + suffix[k] <= best) return;
    const int e = cand[k];
    const std::uint32_t bit = std::uint32_t{1} << e;
    if (!(blocked & bit)) self(self, k + 1, chosen | bit, blocked | nbr[e], total + weights[e]);
    self(self, k + 1, chosen, blocked, total);
  };
  search(search, 0, 0, 0, 0.0);

  Schedule s;
  s.active.assign(m, 0);
  for (int e = 0; e < m; ++e) s.active[e] = (best_set >> e) & 1u;
  return s;
}

inline Schedule schedule(SchedulerKind k, std::span<const double> weights,
                         const ConflictGraph& conflicts) {
  return k == SchedulerKind::LGS ? lgs_schedule(weights, conflicts)
                                 : exact_mwis(weights, conflicts);
}

}  // namespace spbp
