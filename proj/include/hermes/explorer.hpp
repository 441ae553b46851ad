#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hermes/protocol.hpp"

namespace hermes {

struct ExplorerOp {
  NodeId node = 1;
  OpKind kind = OpKind::Write;
  std::string value;
  RmwSpec rmw;
};

struct ExplorerConfig {
  std::string name;
  std::uint32_t nodes = 3;
  ProtocolConfig protocol;
  std::vector<ExplorerOp> ops;
  std::uint32_t max_drops = 0;
  std::uint32_t max_duplicates = 0;
  // Timer firings allowed while messages are still in flight. Beyond this,
  // timers fire only once the network is quiet.
  std::uint32_t early_timer_fires = 0;
  // Node that may crash at any point; its removal is then delivered to each
  // survivor as a separate step.
  std::optional<NodeId> crash;
  // With this off the removal never arrives, so writes blocked on the crashed
  // node stay blocked.
  bool reconfigure = true;
  // Once everything settles, every live replica reads the key once, which
  // drives any outstanding replay.
  bool probe_reads = true;
  std::uint64_t state_bound = 5'000'000;

  // Throws std::invalid_argument outside the supported envelope.
  void validate() const;
};

struct ExplorationReport {
  std::string name;
  std::uint64_t states = 0;
  std::uint64_t transitions = 0;
  std::uint64_t terminals = 0;
  // False if the state bound cut the search short; coverage is then partial.
  bool complete = true;
  std::uint64_t violations = 0;
  std::uint64_t deadlocks = 0;
  // Terminal states in which at least one RMW committed.
  std::uint64_t rmw_commit_terminals = 0;
  std::vector<std::string> examples;

  bool ok() const { return complete && violations == 0 && deadlocks == 0; }
};

ExplorationReport explore(const ExplorerConfig& config);

// The four acceptance configurations: concurrent writes, write/RMW race,
// VAL loss with replay, crash mid-write with reconfiguration.
std::vector<ExplorerConfig> standard_explorations();

// key = value lines, `#` comments. Keys: name, nodes, op (repeatable:
// "write N V", "read N", "cas N EXPECTED DESIRED", "faa N DELTA"),
// max_drops, max_duplicates, early_timer_fires, crash, reconfigure,
// probe_reads, state_bound, o1, o3. mlt is always 0.
ExplorerConfig parse_explorer_config(std::istream& in);

}  // namespace hermes
