#pragma once

#include <deque>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hermes/ops.hpp"
#include "hermes/types.hpp"

namespace hermes {

enum class KeyState : std::uint8_t { Valid, Invalid, Write, Replay, Trans };

const char* to_string(KeyState state);

// Update a node is coordinating (its own write/RMW, or a replay).
struct PendingUpdate {
  Timestamp ts;
  std::string value;
  bool is_rmw = false;
  std::set<NodeId> acks_needed;
  std::set<NodeId> acks_received;
  std::optional<OpId> client_op;
  // Value observed by an RMW before applying; returned on commit.
  std::string observed;
  // Some follower already held a higher timestamp when it acknowledged.
  bool superseded = false;

  bool complete() const {
    for (auto n : acks_needed)
      if (!acks_received.contains(n)) return false;
    return true;
  }

  friend bool operator==(const PendingUpdate&, const PendingUpdate&) = default;
};

struct KeyRecord {
  KeyState state = KeyState::Valid;
  Timestamp ts;
  std::string value;
  bool rmw_flag = false;
  std::optional<PendingUpdate> pending;
  std::optional<SimTime> mlt_deadline;
  std::deque<StalledOp> stalled_ops;

  // Timestamp observed when a follower armed its replay timer; a replay
  // fires only if it is unchanged one mlt later.
  std::optional<Timestamp> replay_witness;
  // A VAL for the superseding timestamp arrived while in Trans.
  bool validated_in_trans = false;
  // Broadcast-ACK bookkeeping for the current timestamp.
  NodeId inv_sender = 0;
  std::set<NodeId> peer_acks;

  friend bool operator==(const KeyRecord&, const KeyRecord&) = default;
};

class UnknownKey : public std::out_of_range {
 public:
  explicit UnknownKey(KeyId key);
};

// One record as exchanged during shadow sync.
struct ScannedRecord {
  KeyId key = 0;
  Timestamp ts;
  std::string value;
  bool rmw_flag = false;
  bool valid = false;

  friend bool operator==(const ScannedRecord&, const ScannedRecord&) = default;
};

struct ScanChunk {
  std::vector<ScannedRecord> records;
  KeyId next_cursor = 0;
  bool last = false;
};

// Dense key universe [0, key_count). Ordering decisions belong to the
// protocol; the store never compares timestamps.
class Store {
 public:
  Store(std::size_t key_count, std::string default_value);

  std::size_t key_count() const { return records_.size(); }

  const KeyRecord& get(KeyId key) const;
  KeyRecord& at(KeyId key);
  void apply(KeyId key, Timestamp ts, std::string value, bool rmw_flag, KeyState state);
  ScanChunk scan(KeyId cursor, std::size_t chunk_size) const;

  // One line per key: "key version cid value-hex".
  void dump(std::ostream& os) const;

  friend bool operator==(const Store&, const Store&) = default;

 private:
  std::vector<KeyRecord> records_;
};

std::string encode_chunk(const ScanChunk& chunk);
ScanChunk decode_chunk(const std::string& bytes);

}  // namespace hermes
