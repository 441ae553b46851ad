#include "hermes/craq.hpp"

#include <algorithm>
#include <stdexcept>

namespace hermes {

namespace {

Message craq(MsgKind kind, NodeId sender, KeyId key, std::uint32_t version, std::uint32_t tag,
             std::string value = {}) {
  Message m;
  m.sender = sender;
  m.kind = kind;
  m.key = key;
  m.ts = {version, tag};
  m.value = std::move(value);
  return m;
}

}  // namespace

CraqNode::CraqNode(NodeId id, std::vector<NodeId> chain, std::size_t key_count,
                   std::string default_value)
    : id_(id), chain_(std::move(chain)), next_version_(key_count, 0) {
  auto it = std::ranges::find(chain_, id_);
  if (it == chain_.end()) throw std::invalid_argument("node is not part of the chain");
  position_ = static_cast<std::size_t>(it - chain_.begin());
  records_.resize(key_count, CraqRecord{0, default_value, {}});
}

NodeId CraqNode::next() const { return chain_[position_ + 1]; }
NodeId CraqNode::prev() const { return chain_[position_ - 1]; }

NodeEffects CraqNode::client_read(KeyId key, OpId op) {
  NodeEffects fx;
  auto& rec = records_.at(key);
  if (rec.clean() || is_tail()) {
    ++stats_.reads_local;
    fx.completions.push_back({op, OpStatus::Ok, rec.value, {rec.version, 0}});
    return fx;
  }
  ++stats_.reads_redirected;
  const auto tag = next_query_++;
  queries_[tag] = op;
  fx.messages.push_back({chain_.back(), craq(MsgKind::CraqQuery, id_, key, 0, tag)});
  return fx;
}

NodeEffects CraqNode::client_write(KeyId key, std::string value, OpId op) {
  if (!is_head()) throw std::logic_error("CRAQ writes enter at the head");
  NodeEffects fx;
  const auto version = ++next_version_.at(key);
  write_ops_[{key, version}] = op;
  accept(key, version, value, fx);
  return fx;
}

void CraqNode::accept(KeyId key, std::uint32_t version, const std::string& value,
                      NodeEffects& fx) {
  auto& rec = records_.at(key);
  if (is_tail()) {
    if (version > rec.version) {
      rec.version = version;
      rec.value = value;
    }
    commit(key, version, fx);
    return;
  }
  if (version > rec.version) rec.pending.emplace(version, value);
  fx.messages.push_back({next(), craq(MsgKind::CraqWrite, id_, key, version, 0, value)});
}

void CraqNode::commit(KeyId key, std::uint32_t version, NodeEffects& fx) {
  auto& rec = records_.at(key);
  if (auto it = rec.pending.find(version); it != rec.pending.end() && version > rec.version) {
    rec.version = version;
    rec.value = it->second;
  }
  rec.pending.erase(rec.pending.begin(), rec.pending.upper_bound(rec.version));
  if (is_head()) {
    auto op = write_ops_.find({key, version});
    if (op != write_ops_.end()) {
      ++stats_.writes_committed;
      fx.completions.push_back({op->second, OpStatus::Ok, {}, {version, 0}});
      write_ops_.erase(op);
    }
  } else {
    fx.messages.push_back({prev(), craq(MsgKind::CraqAck, id_, key, version, 0)});
  }
}

NodeEffects CraqNode::on_message(const Message& msg) {
  NodeEffects fx;
  switch (msg.kind) {
    case MsgKind::CraqWrite:
      accept(msg.key, msg.ts.version, msg.value, fx);
      break;
    case MsgKind::CraqAck:
      commit(msg.key, msg.ts.version, fx);
      break;
    case MsgKind::CraqQuery: {
      const auto& rec = records_.at(msg.key);
      fx.messages.push_back(
          {msg.sender, craq(MsgKind::CraqReply, id_, msg.key, rec.version, msg.ts.cid, rec.value)});
      break;
    }
    case MsgKind::CraqReply: {
      auto it = queries_.find(msg.ts.cid);
      if (it == queries_.end()) break;  // duplicate reply
      fx.completions.push_back({it->second, OpStatus::Ok, msg.value, {msg.ts.version, 0}});
      queries_.erase(it);
      break;
    }
    default:
      break;
  }
  return fx;
}

}  // namespace hermes
