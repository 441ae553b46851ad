#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "hermes/message.hpp"
#include "hermes/types.hpp"
#include "hermes/view.hpp"

namespace hermes {

struct MembershipConfig {
  SimTime lease = 50 * kMillisecond;
  SimTime detector_interval = 10 * kMillisecond;
  std::uint32_t miss_threshold = 3;
  // Extra delay added per recipient when an MUpdate fans out, so replicas
  // install a new view at different times.
  SimTime mupdate_stagger = 1 * kMicrosecond;
  SimTime delivery_delay = 10 * kMicrosecond;
};

struct RmDelivery {
  NodeId dst = 0;
  SimTime delay = 0;
  Message msg;
};

struct MembershipEvent {
  SimTime time = 0;
  MembershipView view;
  std::set<NodeId> removed;
  std::set<NodeId> added;
};

// Deterministic reliable-membership oracle. It grants leases, detects
// failures from missed heartbeats, and reconfigures only after every lease of
// the outgoing epoch has run out and only while a strict majority of the
// configured replicas is reachable.
class MembershipService {
 public:
  MembershipService(std::set<NodeId> replicas, MembershipConfig config);

  const MembershipConfig& config() const { return config_; }
  Epoch epoch() const { return epoch_; }
  const std::set<NodeId>& live() const { return live_; }
  const std::set<NodeId>& suspected() const { return suspected_; }
  const std::vector<MembershipEvent>& history() const { return history_; }
  SimTime max_granted() const { return max_granted_; }

  // First view, with leases starting at `now`.
  MembershipView initial_view(SimTime now);

  void heartbeat(NodeId node, SimTime now);
  // Suspicion injected by a scripted scenario. It sticks until the node has
  // been removed.
  void suspect(NodeId node);
  // Restricts the service to the replicas it can reach; nullopt lifts the gate.
  void partition_gate(std::optional<std::set<NodeId>> reachable);

  std::vector<RmDelivery> tick(SimTime now);

 private:
  bool reachable(NodeId node) const;
  bool heard_recently(NodeId node, SimTime now) const;
  std::vector<RmDelivery> install(SimTime now, std::set<NodeId> live, std::set<NodeId> shadows);

  std::set<NodeId> replicas_;
  MembershipConfig config_;
  Epoch epoch_ = 0;
  std::set<NodeId> live_;
  std::set<NodeId> suspected_;
  std::set<NodeId> injected_;
  std::map<NodeId, SimTime> last_heard_;
  std::map<NodeId, SimTime> removed_at_;
  std::optional<std::set<NodeId>> gate_;
  SimTime max_granted_ = 0;
  std::vector<MembershipEvent> history_;
};

}  // namespace hermes
