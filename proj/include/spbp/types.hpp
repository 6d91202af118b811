#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spbp {

// Dense indices. Commodities are destination nodes, so CommodityId shares
// the NodeId range.
using NodeId = std::int32_t;
using LinkId = std::int32_t;
using CommodityId = std::int32_t;
using Slot = std::int64_t;
using Count = std::int64_t;

inline constexpr NodeId kNoNode = -1;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define SPBP_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
  public:                                \
    using Error::Error;                  \
  }

SPBP_DEFINE_ERROR(GenerationFailed);
SPBP_DEFINE_ERROR(UnreachableCommodity);
SPBP_DEFINE_ERROR(InsufficientQueue);
SPBP_DEFINE_ERROR(TooLarge);
SPBP_DEFINE_ERROR(TooManyFlows);
SPBP_DEFINE_ERROR(InsufficientSamples);
SPBP_DEFINE_ERROR(ConfigError);

#undef SPBP_DEFINE_ERROR

// Raised by the engine when a per-slot constraint audit fails.
class InvariantViolation : public Error {
public:
  InvariantViolation(std::string constraint, Slot slot, const std::string& detail)
      : Error("invariant violation (" + constraint + ") at slot " +
              std::to_string(slot) + ": " + detail),
        constraint_(std::move(constraint)),
        slot_(slot) {}

  const std::string& constraint() const noexcept { return constraint_; }
  Slot slot() const noexcept { return slot_; }

private:
  std::string constraint_;
  Slot slot_;
};

}  // namespace spbp
