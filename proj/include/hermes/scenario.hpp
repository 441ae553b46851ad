#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hermes/membership.hpp"
#include "hermes/protocol.hpp"
#include "hermes/simnet.hpp"
#include "hermes/workload.hpp"

namespace hermes {

enum class ProtocolKind : std::uint8_t { Hermes, Craq };

struct SuspicionSpec {
  NodeId node = 0;
  SimTime at = 0;
};

struct Scenario {
  std::string id = "scenario";
  ProtocolKind protocol = ProtocolKind::Hermes;
  std::uint32_t nodes = 5;
  WorkloadSpec workload;
  SimTime duration = 10 * kMillisecond;
  // Clients stop issuing at `duration`; the run continues this long so
  // in-flight ops can finish.
  SimTime drain = 1 * kMillisecond;
  std::uint64_t seed = 1;
  std::uint32_t clients_per_node = 1;
  SimTime think_time = 1 * kMicrosecond;
  // Wait before a client retries after its replica refused an op.
  SimTime retry_backoff = 1 * kMillisecond;
  SimTime series_interval = 1 * kMillisecond;

  sim::LinkModel link;
  ProtocolConfig protocol_config;
  std::vector<std::vector<std::uint32_t>> virtual_ids;
  MembershipConfig membership;
  bool heartbeats = true;

  std::vector<sim::FaultSpec> faults;
  std::vector<SuspicionSpec> suspicions;

  // Throws ScenarioError naming the offending field.
  void validate() const;
};

class ScenarioError : public std::invalid_argument {
 public:
  ScenarioError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Flat key = value text with [section] headers. Unknown keys are errors.
Scenario parse_scenario(std::istream& in);
Scenario parse_scenario_text(const std::string& text);
// `name` is section.key, or a bare key of the [scenario] section.
void apply_setting(Scenario& s, const std::string& name, const std::string& value);

// Accepts ns, us, ms and s suffixes; a bare number is nanoseconds.
SimTime parse_duration(const std::string& text);

const char* to_string(ProtocolKind p);
const char* to_string(KeyDistribution d);

}  // namespace hermes
