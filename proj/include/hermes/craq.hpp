#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "hermes/protocol.hpp"

namespace hermes {

struct CraqRecord {
  std::uint32_t version = 0;
  std::string value;
  // Versions seen travelling down the chain but not yet acknowledged.
  std::map<std::uint32_t, std::string> pending;

  bool clean() const { return pending.empty(); }
};

struct CraqStats {
  std::uint64_t reads_local = 0;
  std::uint64_t reads_redirected = 0;
  std::uint64_t writes_committed = 0;
};

// One member of a CRAQ chain. `chain` runs head first, tail last. Writes are
// accepted at the head only; failures are not handled.
class CraqNode {
 public:
  CraqNode(NodeId id, std::vector<NodeId> chain, std::size_t key_count, std::string default_value);

  NodeId id() const { return id_; }
  bool is_head() const { return chain_.front() == id_; }
  bool is_tail() const { return chain_.back() == id_; }
  const CraqRecord& record(KeyId key) const { return records_.at(key); }
  const CraqStats& stats() const { return stats_; }

  NodeEffects client_read(KeyId key, OpId op);
  // Throws std::logic_error if this node is not the head.
  NodeEffects client_write(KeyId key, std::string value, OpId op);
  NodeEffects on_message(const Message& msg);

 private:
  NodeId next() const;
  NodeId prev() const;
  void accept(KeyId key, std::uint32_t version, const std::string& value, NodeEffects& fx);
  void commit(KeyId key, std::uint32_t version, NodeEffects& fx);

  NodeId id_;
  std::vector<NodeId> chain_;
  std::size_t position_ = 0;
  std::vector<CraqRecord> records_;
  std::vector<std::uint32_t> next_version_;
  std::map<std::pair<KeyId, std::uint32_t>, OpId> write_ops_;
  std::map<std::uint32_t, OpId> queries_;
  std::uint32_t next_query_ = 1;
  CraqStats stats_;
};

}  // namespace hermes
