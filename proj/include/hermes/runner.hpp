#pragma once

#include <map>
#include <string>
#include <vector>

#include "hermes/history.hpp"
#include "hermes/membership.hpp"
#include "hermes/protocol.hpp"
#include "hermes/scenario.hpp"

namespace hermes {

struct RunMetrics {
  std::uint64_t invocations = 0;
  std::uint64_t completed_ok = 0;
  std::uint64_t aborts = 0;
  std::uint64_t cas_failed = 0;
  // Ops a non-operational replica turned away before they took effect; these
  // are retried after a backoff and never enter the history.
  std::uint64_t refused = 0;
  std::uint64_t pending_at_end = 0;

  std::uint64_t reads_completed = 0;
  // Reads answered inside the invoking call with no message sent.
  std::uint64_t reads_local = 0;
  // Reads whose key was Valid at an operational replica when invoked.
  std::uint64_t valid_hit_reads = 0;
  std::uint64_t valid_hit_local = 0;
  std::uint64_t craq_reads_redirected = 0;

  std::vector<SimTime> read_latencies;
  std::vector<SimTime> write_latencies;
  std::vector<SimTime> rmw_latencies;

  std::map<MsgKind, std::uint64_t> messages_sent;
  std::uint64_t protocol_messages = 0;
  std::uint64_t membership_messages = 0;
  std::vector<std::uint64_t> per_node_ops;
  // Successful writes and RMWs per series interval.
  std::vector<std::uint64_t> commits_per_interval;
  NodeStats hermes;

  double read_local_fraction() const;
  double tail_redirect_fraction() const;
  std::uint64_t sent(MsgKind k) const;
};

struct CompletionRecord {
  OpId op = 0;
  std::uint32_t client = 0;
  NodeId node = 0;
  KeyId key = 0;
  OpKind kind = OpKind::Read;
  OpStatus status = OpStatus::Ok;
  SimTime invoked = 0;
  SimTime completed = 0;
  Timestamp ts;
};

struct InstallRecord {
  NodeId node = 0;
  Epoch epoch = 0;
  SimTime time = 0;
};

struct RunResult {
  Scenario scenario;
  RunMetrics metrics;
  History history;
  std::string trace;
  std::vector<CompletionRecord> completions;
  std::vector<InstallRecord> installs;
  std::vector<MembershipEvent> membership;
  // Store dumps of replicas that are alive, in the final view and operational.
  std::map<NodeId, std::string> final_stores;
  std::vector<NodeStats> node_stats;
};

struct RunOptions {
  bool trace = false;
  std::uint64_t livelock_bound = 20'000'000;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

// Nearest-rank percentile; 0 for an empty sample.
SimTime percentile(std::vector<SimTime> sample, double p);

inline constexpr const char* kCsvSchema = "#schema=hermes-sim-csv/1";
// Schema tag line then the column names, both newline terminated.
std::string csv_header();
// msgs_total counts protocol and membership traffic.
std::string csv_row(const RunResult& result);

}  // namespace hermes
