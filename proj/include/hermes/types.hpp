#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>

namespace hermes {

using NodeId = std::uint32_t;
using KeyId = std::uint32_t;
using OpId = std::uint64_t;
using Epoch = std::uint64_t;

// Simulated time in nanoseconds.
using SimTime = std::int64_t;

inline constexpr SimTime kNanosecond = 1;
inline constexpr SimTime kMicrosecond = 1000;
inline constexpr SimTime kMillisecond = 1000 * kMicrosecond;
inline constexpr SimTime kSecond = 1000 * kMillisecond;
inline constexpr SimTime kTimeNever = std::numeric_limits<SimTime>::max();

// Pseudo-node standing for the reliable membership service.
inline constexpr NodeId kMembershipEndpoint = 0xFFFFFFFEu;

// Per-key Lamport clock. Members are declared in comparison order so the
// defaulted <=> is the lexicographic (version, cid) order.
struct Timestamp {
  std::uint32_t version = 0;
  std::uint32_t cid = 0;

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

enum class Ordering { Less, Equal, Greater };

constexpr Ordering ts_compare(Timestamp a, Timestamp b) {
  auto c = a <=> b;
  if (c < 0) return Ordering::Less;
  if (c > 0) return Ordering::Greater;
  return Ordering::Equal;
}

inline std::ostream& operator<<(std::ostream& os, Timestamp ts) {
  return os << '[' << ts.version << ',' << ts.cid << ']';
}

}  // namespace hermes
