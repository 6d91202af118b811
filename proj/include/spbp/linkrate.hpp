#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "rng.hpp"
#include "types.hpp"

namespace spbp {

enum class RateKind { Static, UniformJitter };

inline std::string_view to_string(RateKind k) {
  return k == RateKind::Static ? "static" : "uniform_jitter";
}

/// Per-slot real-time link rates whose long-run mean equals the long-term
/// rate of each link. Draws are keyed by (seed, link, slot), so sample(t)
/// is a pure function of t.
class RateProcess {
public:
  RateProcess(RateKind kind, double jitter, std::vector<double> long_term, std::uint64_t seed)
      : kind_(kind), jitter_(jitter), long_term_(std::move(long_term)), seed_(seed) {
    if (jitter_ < 0.0 || jitter_ >= 1.0)
      throw std::invalid_argument("RateProcess: jitter fraction must lie in [0, 1)");
  }

  RateKind kind() const { return kind_; }
  double jitter() const { return jitter_; }
  std::span<const double> long_term() const { return long_term_; }

  Count sample_one(LinkId e, Slot t) const {
    const double r = long_term_[e];
    if (kind_ == RateKind::Static || jitter_ == 0.0) return static_cast<Count>(std::llround(r));
    SplitMix64 rng(mix_seed({seed_, 0x72617465ULL, static_cast<std::uint64_t>(e),
                             static_cast<std::uint64_t>(t)}));
    const double lo = r * (1.0 - jitter_);
    const double hi = r * (1.0 + jitter_);
    const double v = lo + (hi - lo) * rng.uniform01();
    // Probabilistic rounding keeps E[sample] == v.
    const double fl = std::floor(v);
    return static_cast<Count>(fl) + (rng.uniform01() < v - fl ? 1 : 0);
  }

  void sample(Slot t, std::vector<Count>& out) const {
    out.resize(long_term_.size());
    for (LinkId e = 0; e < static_cast<LinkId>(long_term_.size()); ++e) out[e] = sample_one(e, t);
  }

  std::vector<Count> sample(Slot t) const {
    std::vector<Count> out;
    sample(t, out);
    return out;
  }

  /// Per-slot variance of link e's samples (continuous uniform part plus
  /// the Bernoulli rounding, bounded by 1/4).
  double variance_bound(LinkId e) const {
    if (kind_ == RateKind::Static || jitter_ == 0.0) return 0.0;
    const double w = 2.0 * jitter_ * long_term_[e];
    return w * w / 12.0 + 0.25;
  }

private:
  RateKind kind_;
  double jitter_;
  std::vector<double> long_term_;
  std::uint64_t seed_;
};

}  // namespace spbp
