#include "hermes/protocol.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace hermes {

std::uint32_t choose_virtual_cid(const ProtocolConfig& config, NodeId node,
                                 std::span<const std::uint32_t> virtual_ids,
                                 std::uint64_t draw) {
  if (!config.virtual_ids || virtual_ids.empty()) return node;
  return virtual_ids[draw % virtual_ids.size()];
}

void validate_virtual_ids(std::span<const std::vector<std::uint32_t>> sets) {
  std::unordered_set<std::uint32_t> seen;
  for (const auto& set : sets) {
    if (set.empty()) throw std::invalid_argument("empty virtual id set");
    for (auto id : set) {
      if (id == 0) throw std::invalid_argument("virtual id 0 is reserved");
      if (!seen.insert(id).second)
        throw std::invalid_argument("virtual id " + std::to_string(id) +
                                    " assigned to more than one node");
    }
  }
}

HermesNode::HermesNode(NodeId id, ProtocolConfig config, std::size_t key_count,
                       std::string default_value, std::vector<std::uint32_t> virtual_ids)
    : id_(id),
      config_(config),
      virtual_ids_(std::move(virtual_ids)),
      store_(key_count, std::move(default_value)) {}

void HermesNode::bootstrap(MembershipView view) { view_ = std::move(view); }

bool HermesNode::operational(SimTime now) const {
  return phase_ == JoinPhase::Operational && now < view_.lease_until && view_.live.contains(id_);
}

std::set<NodeId> HermesNode::followers() const {
  auto out = view_.live;
  out.erase(id_);
  return out;
}

void HermesNode::broadcast(const Message& msg, NodeEffects& fx) const {
  for (auto dst : view_.live)
    if (dst != id_) fx.messages.push_back({dst, msg});
}

void HermesNode::send_inv(KeyId key, const PendingUpdate& p, NodeId dst, NodeEffects& fx,
                          bool resent) const {
  fx.messages.push_back({dst, Message::inv(view_.epoch, id_, key, p.ts, p.value, p.is_rmw, resent)});
}

void HermesNode::arm(KeyId key, SimTime deadline, NodeEffects& fx) {
  store_.at(key).mlt_deadline = deadline;
  fx.timers.push_back({key, deadline});
}

void HermesNode::disarm(KeyId key, NodeEffects& fx) {
  auto& rec = store_.at(key);
  if (!rec.mlt_deadline) return;
  rec.mlt_deadline.reset();
  rec.replay_witness.reset();
  fx.timers.push_back({key, std::nullopt});
}

void HermesNode::arm_follower_timer(KeyId key, SimTime now, NodeEffects& fx) {
  auto& rec = store_.at(key);
  rec.replay_witness = rec.ts;
  arm(key, now + config_.mlt, fx);
}

// ---------------------------------------------------------------------------
// Client operations

NodeEffects HermesNode::client_read(KeyId key, OpId op, SimTime now) {
  NodeEffects fx;
  auto& rec = store_.at(key);
  if (!operational(now)) {
    fx.completions.push_back({op, OpStatus::NotOperational, {}, {}});
    return fx;
  }
  if (rec.state == KeyState::Valid && rec.stalled_ops.empty()) {
    fx.completions.push_back({op, OpStatus::Ok, rec.value, rec.ts});
    return fx;
  }
  stall(key, StalledOp{op, OpKind::Read, {}, {}, 0}, now, fx);
  return fx;
}

NodeEffects HermesNode::client_write(KeyId key, std::string value, OpId op, SimTime now,
                                     std::uint64_t cid_draw) {
  NodeEffects fx;
  auto& rec = store_.at(key);
  if (!operational(now)) {
    fx.completions.push_back({op, OpStatus::NotOperational, {}, {}});
    return fx;
  }
  if (rec.state == KeyState::Valid && rec.stalled_ops.empty()) {
    issue_update(key, std::move(value), false, op, {}, cid_draw, now, fx);
    return fx;
  }
  stall(key, StalledOp{op, OpKind::Write, std::move(value), {}, cid_draw}, now, fx);
  return fx;
}

NodeEffects HermesNode::client_rmw(KeyId key, RmwSpec rmw, OpId op, SimTime now,
                                   std::uint64_t cid_draw) {
  NodeEffects fx;
  auto& rec = store_.at(key);
  if (!operational(now)) {
    fx.completions.push_back({op, OpStatus::NotOperational, {}, {}});
    return fx;
  }
  if (rec.state == KeyState::Valid && rec.stalled_ops.empty()) {
    auto eval = evaluate_rmw(rmw, rec.value);
    if (!eval.applies) {
      fx.completions.push_back({op, OpStatus::CasFailed, rec.value, rec.ts});
      return fx;
    }
    issue_update(key, std::move(eval.new_value), true, op, rec.value, cid_draw, now, fx);
    return fx;
  }
  stall(key, StalledOp{op, OpKind::Rmw, {}, std::move(rmw), cid_draw}, now, fx);
  return fx;
}

void HermesNode::stall(KeyId key, StalledOp op, SimTime now, NodeEffects& fx) {
  auto& rec = store_.at(key);
  rec.stalled_ops.push_back(std::move(op));
  stalled_keys_.insert(key);
  if (rec.state == KeyState::Invalid && !rec.mlt_deadline) arm_follower_timer(key, now, fx);
}

void HermesNode::drain(KeyId key, SimTime now, NodeEffects& fx) {
  auto& rec = store_.at(key);
  while (!rec.stalled_ops.empty() && rec.state == KeyState::Valid && operational(now)) {
    auto op = std::move(rec.stalled_ops.front());
    rec.stalled_ops.pop_front();
    switch (op.kind) {
      case OpKind::Read:
        fx.completions.push_back({op.op, OpStatus::Ok, rec.value, rec.ts});
        break;
      case OpKind::Write:
        issue_update(key, std::move(op.value), false, op.op, {}, op.cid_draw, now, fx);
        break;
      case OpKind::Rmw: {
        auto eval = evaluate_rmw(op.rmw, rec.value);
        if (!eval.applies) {
          fx.completions.push_back({op.op, OpStatus::CasFailed, rec.value, rec.ts});
        } else {
          issue_update(key, std::move(eval.new_value), true, op.op, rec.value, op.cid_draw, now,
                       fx);
        }
        break;
      }
    }
  }
  if (rec.stalled_ops.empty()) stalled_keys_.erase(key);
}

void HermesNode::drain_all(SimTime now, NodeEffects& fx) {
  const std::vector<KeyId> keys(stalled_keys_.begin(), stalled_keys_.end());
  for (auto key : keys) {
    auto& rec = store_.at(key);
    if (rec.state == KeyState::Valid) {
      drain(key, now, fx);
    } else if (rec.state == KeyState::Invalid && !rec.mlt_deadline) {
      arm_follower_timer(key, now, fx);
    }
  }
}

// ---------------------------------------------------------------------------
// Coordinator

void HermesNode::issue_update(KeyId key, std::string value, bool is_rmw, std::optional<OpId> op,
                              std::string observed, std::uint64_t cid_draw, SimTime now,
                              NodeEffects& fx) {
  auto& rec = store_.at(key);
  // Writes step the version by two, RMWs by one, so a write racing an RMW
  // from the same base always carries the higher timestamp.
  const Timestamp ts{rec.ts.version + (is_rmw ? 1u : 2u),
                     choose_virtual_cid(config_, id_, virtual_ids_, cid_draw)};
  rec.ts = ts;
  rec.value = value;
  rec.rmw_flag = is_rmw;
  rec.validated_in_trans = false;
  rec.inv_sender = id_;
  rec.peer_acks.clear();
  rec.replay_witness.reset();
  ++stats_.updates_issued;

  PendingUpdate p{ts, std::move(value), is_rmw, followers(), {}, op, std::move(observed), false};
  if (p.acks_needed.empty()) {
    rec.state = KeyState::Valid;
    ++stats_.commits_valid;
    if (op) fx.completions.push_back({*op, OpStatus::Ok, is_rmw ? p.observed : "", ts});
    return;
  }
  rec.state = KeyState::Write;
  for (auto dst : p.acks_needed) send_inv(key, p, dst, fx);
  rec.pending = std::move(p);
  arm(key, now + config_.mlt, fx);
}

void HermesNode::start_replay(KeyId key, SimTime now, NodeEffects& fx) {
  auto& rec = store_.at(key);
  ++stats_.replays;
  rec.replay_witness.reset();
  rec.inv_sender = id_;
  rec.peer_acks.clear();
  // The stored timestamp keeps the original coordinator's cid.
  PendingUpdate p{rec.ts, rec.value, rec.rmw_flag, followers(), {}, std::nullopt, {}, false};
  if (p.acks_needed.empty()) {
    rec.state = KeyState::Valid;
    ++stats_.commits_valid;
    disarm(key, fx);
    drain(key, now, fx);
    return;
  }
  rec.state = KeyState::Replay;
  for (auto dst : p.acks_needed) send_inv(key, p, dst, fx, true);
  rec.pending = std::move(p);
  arm(key, now + config_.mlt, fx);
}

void HermesNode::try_commit(KeyId key, SimTime now, NodeEffects& fx) {
  auto& rec = store_.at(key);
  if (rec.pending && rec.pending->complete()) finish_pending(key, false, now, fx);
}

void HermesNode::finish_pending(KeyId key, bool committed_elsewhere, SimTime now,
                                NodeEffects& fx, bool superseded) {
  auto& rec = store_.at(key);
  auto p = std::move(*rec.pending);
  rec.pending.reset();
  const bool send_val = !committed_elsewhere && (!config_.broadcast_acks || p.is_rmw);
  if (rec.state == KeyState::Trans || p.superseded || superseded) {
    // A newer update exists somewhere, so this value must not become Valid
    // anywhere. A VAL, if sent, carries the mark and validates nothing.
    ++stats_.commits_trans;
    if (rec.state != KeyState::Trans) ++stats_.commits_superseded;
    if (send_val && !config_.skip_trans_val)
      broadcast(Message::val(view_.epoch, id_, key, p.ts, true), fx);
    rec.state = rec.state == KeyState::Trans && rec.validated_in_trans ? KeyState::Valid
                                                                      : KeyState::Invalid;
  } else {
    ++stats_.commits_valid;
    rec.state = KeyState::Valid;
    if (send_val) broadcast(Message::val(view_.epoch, id_, key, p.ts), fx);
  }
  rec.validated_in_trans = false;
  if (p.client_op)
    fx.completions.push_back({*p.client_op, OpStatus::Ok, p.is_rmw ? p.observed : "", p.ts});
  disarm(key, fx);
  if (rec.state == KeyState::Valid) {
    drain(key, now, fx);
  } else if (!rec.stalled_ops.empty()) {
    arm_follower_timer(key, now, fx);
  }
}

void HermesNode::abort_rmw(KeyId key, NodeEffects& fx) {
  auto& rec = store_.at(key);
  auto p = std::move(*rec.pending);
  rec.pending.reset();
  ++stats_.rmw_aborts;
  if (p.client_op) fx.completions.push_back({*p.client_op, OpStatus::Aborted, {}, p.ts});
  disarm(key, fx);
}

// ---------------------------------------------------------------------------
// Message handling

NodeEffects HermesNode::on_message(const Message& msg, SimTime now) {
  switch (msg.kind) {
    case MsgKind::MUpdate:
      return apply_membership(decode_view(msg.value), now);
    case MsgKind::Lease: {
      ByteReader r(msg.value);
      return renew_lease(msg.epoch, static_cast<SimTime>(r.u64()), now);
    }
    case MsgKind::Inv:
    case MsgKind::Ack:
    case MsgKind::Val:
    case MsgKind::ChunkRequest:
    case MsgKind::ChunkReply:
      break;
    default:
      return {};
  }
  if (msg.epoch != view_.epoch) {
    ++stats_.dropped_epoch;
    return {};
  }
  switch (msg.kind) {
    case MsgKind::Inv: return handle_inv(msg, now);
    case MsgKind::Ack: return handle_ack(msg, now);
    case MsgKind::Val: return handle_val(msg, now);
    case MsgKind::ChunkRequest: return handle_chunk_request(msg);
    case MsgKind::ChunkReply: return handle_chunk_reply(msg, now);
    default: return {};
  }
}

NodeEffects HermesNode::handle_inv(const Message& msg, SimTime now) {
  NodeEffects fx;
  auto& rec = store_.at(msg.key);
  if (msg.rmw_flag && msg.ts < rec.ts) {
    // An RMW that lost the race learns about the newer update instead of
    // collecting our ACK.
    fx.messages.push_back(
        {msg.sender, Message::inv(view_.epoch, id_, msg.key, rec.ts, rec.value, rec.rmw_flag)});
    return fx;
  }
  if (rec.pending && rec.pending->is_rmw && rec.pending->client_op && msg.ts == rec.pending->ts) {
    // Someone is replaying our own RMW. Without our ACK only we can commit
    // it, so an abort decided here is never contradicted by a replay.
    return fx;
  }
  if (msg.ts > rec.ts) {
    KeyState next = KeyState::Invalid;
    if (rec.pending) {
      if (rec.pending->is_rmw) {
        abort_rmw(msg.key, fx);
      } else {
        next = KeyState::Trans;
      }
    }
    rec.ts = msg.ts;
    rec.value = msg.value;
    rec.rmw_flag = msg.rmw_flag;
    rec.state = next;
    rec.validated_in_trans = false;
    rec.inv_sender = msg.sender;
    rec.peer_acks.clear();
    if (next == KeyState::Invalid && !rec.stalled_ops.empty() && !rec.mlt_deadline)
      arm_follower_timer(msg.key, now, fx);
  }
  // A write that is already behind us may still commit, but it must not make
  // anyone Valid at its timestamp: an RMW based there would jump our update.
  const bool superseded = rec.ts > msg.ts;
  if (superseded && msg.resent) {
    // The sender may never hear of our update otherwise (its coordinator can
    // be gone), so hand it over.
    fx.messages.push_back(
        {msg.sender, Message::inv(view_.epoch, id_, msg.key, rec.ts, rec.value, rec.rmw_flag)});
  }
  auto ack = Message::ack(view_.epoch, id_, msg.key, msg.ts, superseded);
  // RMWs keep the coordinator-driven ACK/VAL path even under O3.
  if (config_.broadcast_acks && !msg.rmw_flag) {
    broadcast(ack, fx);
    maybe_self_validate(msg.key, now, fx);
  } else {
    fx.messages.push_back({msg.sender, ack});
  }
  return fx;
}

NodeEffects HermesNode::handle_ack(const Message& msg, SimTime now) {
  NodeEffects fx;
  auto& rec = store_.at(msg.key);
  if (rec.pending && msg.ts == rec.pending->ts) {
    if (rec.pending->acks_needed.contains(msg.sender)) {
      rec.pending->acks_received.insert(msg.sender);
      if (msg.superseded) rec.pending->superseded = true;
    }
    try_commit(msg.key, now, fx);
    return fx;
  }
  if (config_.broadcast_acks && msg.ts == rec.ts && rec.state == KeyState::Invalid &&
      !msg.superseded) {
    rec.peer_acks.insert(msg.sender);
    maybe_self_validate(msg.key, now, fx);
  }
  return fx;
}

void HermesNode::maybe_self_validate(KeyId key, SimTime now, NodeEffects& fx) {
  auto& rec = store_.at(key);
  if (rec.state != KeyState::Invalid || rec.rmw_flag) return;
  for (auto n : view_.live) {
    if (n == id_ || n == rec.inv_sender) continue;
    if (!rec.peer_acks.contains(n)) return;
  }
  rec.state = KeyState::Valid;
  rec.peer_acks.clear();
  disarm(key, fx);
  drain(key, now, fx);
}

NodeEffects HermesNode::handle_val(const Message& msg, SimTime now) {
  NodeEffects fx;
  auto& rec = store_.at(msg.key);
  if (msg.ts != rec.ts) return fx;
  switch (rec.state) {
    case KeyState::Invalid:
      if (msg.superseded) break;
      rec.state = KeyState::Valid;
      rec.peer_acks.clear();
      disarm(msg.key, fx);
      drain(msg.key, now, fx);
      break;
    case KeyState::Write:
    case KeyState::Replay:
      // Someone else finished replaying our update.
      if (rec.pending && rec.pending->ts == msg.ts)
        finish_pending(msg.key, true, now, fx, msg.superseded);
      break;
    case KeyState::Trans:
      if (!msg.superseded) rec.validated_in_trans = true;
      break;
    case KeyState::Valid:
      break;
  }
  return fx;
}

NodeEffects HermesNode::on_timer(KeyId key, SimTime now) {
  NodeEffects fx;
  if (key == kSyncTimerKey) {
    if (phase_ == JoinPhase::Shadow && sync_deadline_ && *sync_deadline_ <= now) {
      ++donor_index_;
      request_chunk(now, fx);
    }
    return fx;
  }
  auto& rec = store_.at(key);
  if (!rec.mlt_deadline || *rec.mlt_deadline > now) return fx;
  rec.mlt_deadline.reset();

  if (rec.pending) {
    ++stats_.retransmits;
    for (auto dst : rec.pending->acks_needed)
      if (!rec.pending->acks_received.contains(dst)) send_inv(key, *rec.pending, dst, fx, true);
    arm(key, now + config_.mlt, fx);
    return fx;
  }
  if (rec.state != KeyState::Invalid || rec.stalled_ops.empty()) {
    rec.replay_witness.reset();
    return fx;
  }
  if (rec.replay_witness == rec.ts && operational(now)) {
    start_replay(key, now, fx);
    return fx;
  }
  if (rec.replay_witness != rec.ts) rec.replay_witness = rec.ts;
  arm(key, now + config_.mlt, fx);
  return fx;
}

// ---------------------------------------------------------------------------
// Membership

NodeEffects HermesNode::apply_membership(const MembershipView& update, SimTime now) {
  NodeEffects fx;
  if (update.epoch <= view_.epoch) return fx;
  view_ = update;
  if (!view_.live.contains(id_)) return fx;

  if (view_.shadows.contains(id_) && phase_ == JoinPhase::Operational) {
    begin_shadow(now, fx);
    return fx;
  }

  const auto live_followers = followers();
  for (KeyId key = 0; key < store_.key_count(); ++key) {
    auto& rec = store_.at(key);
    if (!rec.pending) continue;
    auto& p = *rec.pending;
    if (p.is_rmw) {
      // Gathered ACKs may predate the reconfiguration; collect them afresh.
      p.acks_received.clear();
      p.acks_needed = live_followers;
      for (auto dst : p.acks_needed) send_inv(key, p, dst, fx, true);
      if (p.acks_needed.empty()) {
        finish_pending(key, false, now, fx);
      } else {
        arm(key, now + config_.mlt, fx);
      }
    } else {
      std::set<NodeId> shrunk;
      std::ranges::set_intersection(p.acks_needed, live_followers,
                                    std::inserter(shrunk, shrunk.end()));
      p.acks_needed = std::move(shrunk);
      try_commit(key, now, fx);
    }
  }

  if (operational(now)) {
    const std::vector<KeyId> keys(stalled_keys_.begin(), stalled_keys_.end());
    for (auto key : keys) {
      auto& rec = store_.at(key);
      if (rec.state == KeyState::Invalid && rec.replay_witness == rec.ts) start_replay(key, now, fx);
    }
    drain_all(now, fx);
  }
  return fx;
}

NodeEffects HermesNode::renew_lease(Epoch epoch, SimTime lease_until, SimTime now) {
  NodeEffects fx;
  if (epoch != view_.epoch) return fx;
  const bool was_operational = operational(now);
  view_.lease_until = std::max(view_.lease_until, lease_until);
  if (!was_operational && operational(now)) drain_all(now, fx);
  return fx;
}

// ---------------------------------------------------------------------------
// Shadow sync

void HermesNode::begin_shadow(SimTime now, NodeEffects& fx) {
  phase_ = JoinPhase::Shadow;
  for (KeyId key = 0; key < store_.key_count(); ++key) {
    auto& rec = store_.at(key);
    // Operations accepted before the node left the group stay incomplete.
    rec.pending.reset();
    rec.stalled_ops.clear();
    if (rec.state != KeyState::Valid) rec.state = KeyState::Invalid;
    rec.validated_in_trans = false;
    rec.peer_acks.clear();
    if (rec.mlt_deadline) disarm(key, fx);
  }
  stalled_keys_.clear();
  sync_cursor_ = 0;
  request_chunk(now, fx);
}

void HermesNode::request_chunk(SimTime now, NodeEffects& fx) {
  std::vector<NodeId> donors;
  for (auto n : view_.live)
    if (n != id_ && !view_.shadows.contains(n)) donors.push_back(n);
  if (donors.empty() || sync_cursor_ >= store_.key_count()) {
    phase_ = JoinPhase::Operational;
    sync_deadline_.reset();
    fx.timers.push_back({kSyncTimerKey, std::nullopt});
    return;
  }
  auto donor = donors[donor_index_ % donors.size()];
  fx.messages.push_back(
      {donor, Message{view_.epoch, id_, MsgKind::ChunkRequest, false, sync_cursor_, {}, {}}});
  sync_deadline_ = now + config_.mlt;
  fx.timers.push_back({kSyncTimerKey, sync_deadline_});
}

NodeEffects HermesNode::handle_chunk_request(const Message& msg) {
  NodeEffects fx;
  if (phase_ != JoinPhase::Operational || msg.key > store_.key_count()) return fx;
  auto chunk = store_.scan(msg.key, config_.sync_chunk_size);
  fx.messages.push_back({msg.sender, Message{view_.epoch, id_, MsgKind::ChunkReply, false,
                                             msg.key, {}, encode_chunk(chunk)}});
  return fx;
}

NodeEffects HermesNode::handle_chunk_reply(const Message& msg, SimTime now) {
  NodeEffects fx;
  if (phase_ != JoinPhase::Shadow || msg.key != sync_cursor_) return fx;
  auto chunk = decode_chunk(msg.value);
  for (const auto& r : chunk.records) {
    auto& rec = store_.at(r.key);
    // Highest timestamp wins between pulled state and INVs applied meanwhile.
    if (r.ts > rec.ts) {
      rec.ts = r.ts;
      rec.value = r.value;
      rec.rmw_flag = r.rmw_flag;
      rec.state = r.valid ? KeyState::Valid : KeyState::Invalid;
      rec.peer_acks.clear();
    } else if (r.ts == rec.ts && r.valid && rec.state == KeyState::Invalid) {
      rec.state = KeyState::Valid;
    }
  }
  sync_cursor_ = chunk.next_cursor;
  if (chunk.last) {
    phase_ = JoinPhase::Operational;
    sync_deadline_.reset();
    fx.timers.push_back({kSyncTimerKey, std::nullopt});
    return fx;
  }
  request_chunk(now, fx);
  return fx;
}

}  // namespace hermes
