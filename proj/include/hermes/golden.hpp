#pragma once

#include <string>
#include <vector>

#include "hermes/protocol.hpp"

namespace hermes {

// Replica snapshot rendered as value plus 'b' (Valid) or 'o' (any other
// state), or "X" once crashed.
struct GoldenStep {
  std::string action;
  std::vector<std::string> cells;
};

struct GoldenResult {
  std::vector<GoldenStep> steps;
  // Snapshots with consecutive repeats removed, starting with the initial one.
  std::vector<std::string> strip;
  std::vector<Completion> completions;
  bool matches = false;
  // First divergence from the expected strip, empty on a match.
  std::string mismatch;
};

// The three-node concurrent-write example: writes of 1 (node 1) and 3
// (node 3), a stalled read at node 2, a lost VAL to node 1, node 3 crashing,
// the membership update, and node 1 replaying node 3's write on a read.
// `steps` limits the schedule to a prefix.
GoldenResult run_concurrent_write_example(std::size_t steps = ~std::size_t{0});
std::size_t concurrent_write_example_length();
std::size_t concurrent_write_example_crash_step();

// Expected strip, columns joined per snapshot, e.g. "1o,0b,3o".
const std::vector<std::string>& concurrent_write_expected_strip();

}  // namespace hermes
