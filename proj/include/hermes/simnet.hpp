#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hermes/message.hpp"
#include "hermes/types.hpp"

namespace hermes::sim {

struct LinkModel {
  SimTime base_delay = 10 * kMicrosecond;
  // Jitter is uniform in [0, jitter_fraction * base_delay].
  double jitter_fraction = 0.2;
  double drop_probability = 0.0;
  double duplicate_probability = 0.0;

  SimTime jitter_max() const;
  // Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

struct MessageFilter {
  std::optional<MsgKind> kind;
  std::optional<NodeId> src;
  std::optional<NodeId> dst;
  std::optional<KeyId> key;

  bool matches(NodeId from, NodeId to, const Message& msg) const;
};

struct CrashFault {
  NodeId node = 0;
  SimTime at = 0;
};

// Cross-group traffic is suppressed during [start, end). Nodes not listed in
// any group are isolated.
struct PartitionFault {
  std::vector<std::vector<NodeId>> groups;
  SimTime start = 0;
  SimTime end = kTimeNever;
};

struct DropNextFault {
  MessageFilter filter;
  std::uint32_t count = 1;
};

using FaultSpec = std::variant<CrashFault, PartitionFault, DropNextFault>;

class FaultError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LivelockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `time<TAB>event_kind<TAB>node<TAB>canonical-message-hex`, one per line.
class TraceLog {
 public:
  void enable(bool on) { enabled_ = on; }
  bool enabled() const { return enabled_; }
  void record(SimTime time, std::string_view kind, NodeId node, std::string_view hex);
  const std::string& text() const { return text_; }

 private:
  bool enabled_ = false;
  std::string text_;
};

struct NetCounters {
  std::map<MsgKind, std::uint64_t> sent;
  std::map<MsgKind, std::uint64_t> delivered;
  std::map<MsgKind, std::uint64_t> dropped;
  std::map<MsgKind, std::uint64_t> duplicated;
  std::uint64_t events = 0;

  std::uint64_t sent_of(MsgKind k) const {
    auto it = sent.find(k);
    return it == sent.end() ? 0 : it->second;
  }
};

class SimHandler {
 public:
  virtual ~SimHandler() = default;
  virtual void on_deliver(NodeId src, NodeId dst, const Message& msg) = 0;
  virtual void on_timer(NodeId node, KeyId key) = 0;
};

enum class RunStatus { Quiescent, TimeLimit, Stopped };

// Seeded discrete-event simulator. Events pop in (time, seq) order and seq is
// assigned at scheduling time, so a (seed, schedule) pair replays exactly.
class Simulator {
 public:
  Simulator(std::uint64_t seed, LinkModel link, std::size_t replica_count);

  SimTime now() const { return now_; }
  void set_handler(SimHandler* handler) { handler_ = handler; }

  // Lossy link: zero, one or two deliveries after seeded delay draws.
  void send(NodeId src, NodeId dst, const Message& msg);
  // Loss-free path with an explicit delay; partitions and crashes still apply.
  void send_reliable(NodeId src, NodeId dst, const Message& msg, SimTime delay);

  void schedule_timer(NodeId node, KeyId key, SimTime at);
  void schedule(SimTime at, std::function<void()> action);
  void inject(FaultSpec fault);

  bool crashed(NodeId node) const { return crashed_.contains(node); }
  bool separated(NodeId a, NodeId b) const;
  const PartitionFault* active_partition() const;
  // Replicas reachable by the membership service: the side holding a strict
  // majority of the configured replicas, or empty if no side does.
  std::set<NodeId> primary_component() const;

  void set_partition_listener(std::function<void()> listener) {
    partition_listener_ = std::move(listener);
  }

  void note_progress() { events_since_progress_ = 0; }
  void set_livelock_bound(std::uint64_t bound) { livelock_bound_ = bound; }

  RunStatus run_until(SimTime until);
  void stop() { stop_requested_ = true; }

  TraceLog& trace() { return trace_; }
  const NetCounters& counters() const { return counters_; }
  const LinkModel& link() const { return link_; }

 private:
  struct Deliver {
    NodeId src;
    NodeId dst;
    Message msg;
  };
  struct TimerFire {
    NodeId node;
    KeyId key;
  };
  struct Action {
    std::function<void()> fn;
  };
  struct Event {
    SimTime time;
    std::uint64_t seq;
    std::variant<Deliver, TimerFire, Action> payload;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void push(SimTime at, std::variant<Deliver, TimerFire, Action> payload);
  std::mt19937_64& link_rng(NodeId src, NodeId dst);
  double unit(std::mt19937_64& rng) const;
  SimTime draw_delay(std::mt19937_64& rng) const;
  bool drop_next_matches(NodeId src, NodeId dst, const Message& msg);
  void trace_msg(std::string_view kind, NodeId node, const Message& msg);

  std::uint64_t seed_;
  LinkModel link_;
  std::size_t replica_count_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<std::pair<NodeId, NodeId>, std::mt19937_64> link_rngs_;
  std::set<NodeId> crashed_;
  std::vector<PartitionFault> partitions_;
  std::vector<DropNextFault> drop_rules_;
  std::function<void()> partition_listener_;
  SimHandler* handler_ = nullptr;
  TraceLog trace_;
  NetCounters counters_;
  std::uint64_t events_since_progress_ = 0;
  std::uint64_t livelock_bound_ = 50'000'000;
  bool stop_requested_ = false;
};

}  // namespace hermes::sim
