#include "hermes/membership.hpp"

#include <algorithm>

namespace hermes {

namespace {

Message lease_message(Epoch epoch, SimTime until) {
  ByteWriter w;
  w.u64(static_cast<std::uint64_t>(until));
  Message m;
  m.epoch = epoch;
  m.sender = kMembershipEndpoint;
  m.kind = MsgKind::Lease;
  m.value = w.str();
  return m;
}

Message mupdate_message(const MembershipView& view) {
  Message m;
  m.epoch = view.epoch;
  m.sender = kMembershipEndpoint;
  m.kind = MsgKind::MUpdate;
  m.value = encode_view(view);
  return m;
}

}  // namespace

MembershipService::MembershipService(std::set<NodeId> replicas, MembershipConfig config)
    : replicas_(std::move(replicas)), config_(config), live_(replicas_) {}

MembershipView MembershipService::initial_view(SimTime now) {
  epoch_ = 1;
  live_ = replicas_;
  max_granted_ = now + config_.lease;
  for (NodeId n : replicas_) last_heard_[n] = now;
  MembershipView view{epoch_, live_, {}, max_granted_};
  history_.push_back({now, view, {}, live_});
  return view;
}

void MembershipService::heartbeat(NodeId node, SimTime now) {
  if (!replicas_.contains(node)) return;
  last_heard_[node] = std::max(last_heard_[node], now);
}

void MembershipService::suspect(NodeId node) {
  if (live_.contains(node)) injected_.insert(node);
}

void MembershipService::partition_gate(std::optional<std::set<NodeId>> reachable) {
  gate_ = std::move(reachable);
}

bool MembershipService::reachable(NodeId node) const {
  return !gate_ || gate_->contains(node);
}

bool MembershipService::heard_recently(NodeId node, SimTime now) const {
  auto it = last_heard_.find(node);
  if (it == last_heard_.end()) return false;
  return now - it->second <= config_.detector_interval * config_.miss_threshold;
}

std::vector<RmDelivery> MembershipService::install(SimTime now, std::set<NodeId> live,
                                                   std::set<NodeId> shadows) {
  std::set<NodeId> removed, added;
  std::ranges::set_difference(live_, live, std::inserter(removed, removed.end()));
  std::ranges::set_difference(live, live_, std::inserter(added, added.end()));

  ++epoch_;
  live_ = std::move(live);
  // The fan-out is staggered, so the lease is counted from the last delivery.
  const SimTime fanout = config_.delivery_delay +
                         config_.mupdate_stagger * static_cast<SimTime>(live_.size());
  max_granted_ = std::max(max_granted_, now + fanout + config_.lease);
  MembershipView view{epoch_, live_, std::move(shadows), now + fanout + config_.lease};
  history_.push_back({now, view, removed, added});
  for (NodeId n : removed) {
    injected_.erase(n);
    suspected_.erase(n);
    removed_at_[n] = now;
  }

  std::vector<RmDelivery> out;
  const Message msg = mupdate_message(view);
  SimTime delay = config_.delivery_delay;
  // Removed replicas learn the new view too, so they stop serving for good.
  std::set<NodeId> recipients = live_;
  recipients.insert(removed.begin(), removed.end());
  for (NodeId n : recipients) {
    if (!reachable(n)) continue;
    out.push_back({n, delay, msg});
    delay += config_.mupdate_stagger;
  }
  return out;
}

std::vector<RmDelivery> MembershipService::tick(SimTime now) {
  suspected_.clear();
  for (NodeId n : live_) {
    if (injected_.contains(n) || !reachable(n) || !heard_recently(n, now)) suspected_.insert(n);
  }

  const std::size_t majority = replicas_.size() / 2 + 1;

  if (!suspected_.empty()) {
    // Leases stay frozen until every grant of this epoch has expired.
    if (now < max_granted_) return {};
    std::set<NodeId> survivors;
    std::ranges::set_difference(live_, suspected_, std::inserter(survivors, survivors.end()));
    if (survivors.size() < majority) return {};
    return install(now, std::move(survivors), {});
  }

  std::set<NodeId> joiners;
  for (NodeId n : replicas_) {
    if (live_.contains(n) || !reachable(n) || !heard_recently(n, now)) continue;
    auto removed = removed_at_.find(n);
    if (removed != removed_at_.end() && last_heard_[n] <= removed->second) continue;
    joiners.insert(n);
  }
  if (!joiners.empty() && live_.size() >= majority) {
    std::set<NodeId> live = live_;
    live.insert(joiners.begin(), joiners.end());
    return install(now, std::move(live), joiners);
  }

  // A replica that missed its latest heartbeat gets no fresh lease, and since
  // the lease is shared nobody does until it is heard again or removed.
  for (NodeId n : live_)
    if (now - last_heard_[n] > config_.detector_interval) return {};

  std::vector<RmDelivery> out;
  const SimTime until = now + config_.delivery_delay + config_.lease;
  for (NodeId n : live_) {
    if (!reachable(n)) continue;
    out.push_back({n, config_.delivery_delay, lease_message(epoch_, until)});
  }
  max_granted_ = std::max(max_granted_, until);
  return out;
}

}  // namespace hermes
