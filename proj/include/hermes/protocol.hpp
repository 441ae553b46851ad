#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hermes/kvstore.hpp"
#include "hermes/message.hpp"
#include "hermes/ops.hpp"
#include "hermes/view.hpp"

namespace hermes {

struct ProtocolConfig {
  // O1: a coordinator that commits from Trans does not broadcast VAL.
  bool skip_trans_val = true;
  // O2: pick the timestamp cid from the node's virtual id set.
  bool virtual_ids = false;
  // O3: followers broadcast ACKs and self-validate; coordinators skip VAL.
  bool broadcast_acks = false;
  SimTime mlt = 100 * kMicrosecond;
  std::size_t sync_chunk_size = 64;

  friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

struct Outgoing {
  NodeId dst = 0;
  Message msg;

  friend bool operator==(const Outgoing&, const Outgoing&) = default;
};

// Arms (deadline set) or cancels (no deadline) the per-key mlt timer.
struct TimerRequest {
  KeyId key = 0;
  std::optional<SimTime> deadline;

  friend bool operator==(const TimerRequest&, const TimerRequest&) = default;
};

struct NodeEffects {
  std::vector<Outgoing> messages;
  std::vector<Completion> completions;
  std::vector<TimerRequest> timers;

  bool empty() const { return messages.empty() && completions.empty() && timers.empty(); }
  friend bool operator==(const NodeEffects&, const NodeEffects&) = default;
};

struct NodeStats {
  std::uint64_t updates_issued = 0;
  std::uint64_t commits_valid = 0;
  std::uint64_t commits_trans = 0;
  // Part of commits_trans: commits told by an ACK that a newer update exists.
  std::uint64_t commits_superseded = 0;
  std::uint64_t replays = 0;
  std::uint64_t retransmits = 0;
  std::uint64_t rmw_aborts = 0;
  std::uint64_t dropped_epoch = 0;

  friend bool operator==(const NodeStats&, const NodeStats&) = default;
};

enum class JoinPhase : std::uint8_t { Operational, Shadow };

// Timer slot used for shadow-sync retries; never a real key.
inline constexpr KeyId kSyncTimerKey = 0xFFFFFFFFu;

// Returns the cid to stamp on a new update: one of `virtual_ids` selected by
// `draw` when virtual ids are enabled, the physical id otherwise.
std::uint32_t choose_virtual_cid(const ProtocolConfig& config, NodeId node,
                                 std::span<const std::uint32_t> virtual_ids,
                                 std::uint64_t draw);

// Throws std::invalid_argument if two nodes share a virtual id or a set is empty.
void validate_virtual_ids(std::span<const std::vector<std::uint32_t>> sets);

// Deterministic per-node Hermes state machine. Every entry point takes the
// current simulated time as an input and returns the effects to perform;
// nothing here reads a clock, performs I/O or draws random numbers.
class HermesNode {
 public:
  HermesNode(NodeId id, ProtocolConfig config, std::size_t key_count, std::string default_value,
             std::vector<std::uint32_t> virtual_ids = {});

  NodeId id() const { return id_; }
  const ProtocolConfig& config() const { return config_; }
  const Store& store() const { return store_; }
  const MembershipView& view() const { return view_; }
  const NodeStats& stats() const { return stats_; }
  JoinPhase phase() const { return phase_; }

  // Installs the first view without the epoch monotonicity check.
  void bootstrap(MembershipView view);
  bool operational(SimTime now) const;

  NodeEffects client_read(KeyId key, OpId op, SimTime now);
  NodeEffects client_write(KeyId key, std::string value, OpId op, SimTime now,
                           std::uint64_t cid_draw = 0);
  NodeEffects client_rmw(KeyId key, RmwSpec rmw, OpId op, SimTime now,
                         std::uint64_t cid_draw = 0);

  // Entry point for everything arriving over the network. Protocol messages
  // whose epoch differs from the local one are dropped here.
  NodeEffects on_message(const Message& msg, SimTime now);
  NodeEffects on_timer(KeyId key, SimTime now);

  NodeEffects apply_membership(const MembershipView& update, SimTime now);
  NodeEffects renew_lease(Epoch epoch, SimTime lease_until, SimTime now);

  friend bool operator==(const HermesNode&, const HermesNode&) = default;

 private:
  NodeEffects handle_inv(const Message& msg, SimTime now);
  NodeEffects handle_ack(const Message& msg, SimTime now);
  NodeEffects handle_val(const Message& msg, SimTime now);
  NodeEffects handle_chunk_request(const Message& msg);
  NodeEffects handle_chunk_reply(const Message& msg, SimTime now);

  void issue_update(KeyId key, std::string value, bool is_rmw, std::optional<OpId> op,
                    std::string observed, std::uint64_t cid_draw, SimTime now, NodeEffects& fx);
  void start_replay(KeyId key, SimTime now, NodeEffects& fx);
  void try_commit(KeyId key, SimTime now, NodeEffects& fx);
  void finish_pending(KeyId key, bool committed_elsewhere, SimTime now, NodeEffects& fx,
                      bool superseded = false);
  void abort_rmw(KeyId key, NodeEffects& fx);
  void stall(KeyId key, StalledOp op, SimTime now, NodeEffects& fx);
  void drain(KeyId key, SimTime now, NodeEffects& fx);
  void drain_all(SimTime now, NodeEffects& fx);
  void arm(KeyId key, SimTime deadline, NodeEffects& fx);
  void disarm(KeyId key, NodeEffects& fx);
  void arm_follower_timer(KeyId key, SimTime now, NodeEffects& fx);
  void broadcast(const Message& msg, NodeEffects& fx) const;
  void send_inv(KeyId key, const PendingUpdate& p, NodeId dst, NodeEffects& fx,
                bool resent = false) const;
  void maybe_self_validate(KeyId key, SimTime now, NodeEffects& fx);
  std::set<NodeId> followers() const;

  void begin_shadow(SimTime now, NodeEffects& fx);
  void request_chunk(SimTime now, NodeEffects& fx);

  NodeId id_;
  ProtocolConfig config_;
  std::vector<std::uint32_t> virtual_ids_;
  Store store_;
  MembershipView view_;
  NodeStats stats_;
  std::set<KeyId> stalled_keys_;

  JoinPhase phase_ = JoinPhase::Operational;
  KeyId sync_cursor_ = 0;
  std::size_t donor_index_ = 0;
  std::optional<SimTime> sync_deadline_;
};

}  // namespace hermes
