#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hermes/history.hpp"

namespace hermes {

struct RandomHistoryParams {
  std::uint32_t clients = 3;
  std::uint32_t ops = 6;
  double pending_probability = 0.1;
  double abort_probability = 0.05;
  // Value width in decimal digits; initial value is all zeros.
  std::size_t width = 2;
};

// Concurrent single-key history produced by executing each op atomically at
// a random instant inside its interval, so it is linearizable by construction
// and every completion carries its commit timestamp.
History random_register_history(std::uint64_t seed, const RandomHistoryParams& params = {});

// Same history with one read result replaced by another value written in the
// run. The result may or may not still be linearizable.
History perturb_read(const History& history, std::uint64_t seed);

struct Mutant {
  std::string name;
  History history;
};

// Corrupted histories that are non-linearizable by construction: swapped
// completions, corrupted reads, real-time reorderings, double RMW winners.
std::vector<Mutant> mutation_suite(std::uint64_t seed);

}  // namespace hermes
