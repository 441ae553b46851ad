#include "hermes/simnet.hpp"

#include <algorithm>
#include <cmath>

namespace hermes::sim {

SimTime LinkModel::jitter_max() const {
  return static_cast<SimTime>(std::llround(jitter_fraction * static_cast<double>(base_delay)));
}

void LinkModel::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (base_delay < 0) throw std::invalid_argument("base delay must be non-negative");
  if (!(jitter_fraction >= 0.0)) throw std::invalid_argument("jitter fraction must be non-negative");
  if (!prob(drop_probability)) throw std::invalid_argument("drop probability outside [0,1]");
  if (!prob(duplicate_probability)) throw std::invalid_argument("duplicate probability outside [0,1]");
}

bool MessageFilter::matches(NodeId from, NodeId to, const Message& msg) const {
  if (kind && *kind != msg.kind) return false;
  if (src && *src != from) return false;
  if (dst && *dst != to) return false;
  if (key && *key != msg.key) return false;
  return true;
}

void TraceLog::record(SimTime time, std::string_view kind, NodeId node, std::string_view hex) {
  if (!enabled_) return;
  text_ += std::to_string(time);
  text_ += '\t';
  text_ += kind;
  text_ += '\t';
  text_ += std::to_string(node);
  text_ += '\t';
  text_ += hex;
  text_ += '\n';
}

Simulator::Simulator(std::uint64_t seed, LinkModel link, std::size_t replica_count)
    : seed_(seed), link_(link), replica_count_(replica_count) {
  link_.validate();
}

void Simulator::push(SimTime at, std::variant<Deliver, TimerFire, Action> payload) {
  queue_.push(Event{std::max(at, now_), next_seq_++, std::move(payload)});
}

std::mt19937_64& Simulator::link_rng(NodeId src, NodeId dst) {
  auto key = std::make_pair(src, dst);
  auto it = link_rngs_.find(key);
  if (it == link_rngs_.end()) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      src, dst};
    it = link_rngs_.emplace(key, std::mt19937_64(seq)).first;
  }
  return it->second;
}

double Simulator::unit(std::mt19937_64& rng) const {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

SimTime Simulator::draw_delay(std::mt19937_64& rng) const {
  SimTime jitter = link_.jitter_max();
  std::uint64_t draw = rng();
  if (jitter <= 0) return link_.base_delay;
  return link_.base_delay + static_cast<SimTime>(draw % static_cast<std::uint64_t>(jitter + 1));
}

bool Simulator::drop_next_matches(NodeId src, NodeId dst, const Message& msg) {
  for (auto& rule : drop_rules_) {
    if (rule.count > 0 && rule.filter.matches(src, dst, msg)) {
      --rule.count;
      return true;
    }
  }
  return false;
}

void Simulator::trace_msg(std::string_view kind, NodeId node, const Message& msg) {
  if (trace_.enabled()) trace_.record(now_, kind, node, to_hex(encode(msg)));
}

void Simulator::send(NodeId src, NodeId dst, const Message& msg) {
  if (crashed(src)) return;
  ++counters_.sent[msg.kind];
  trace_msg("send", dst, msg);
  if (drop_next_matches(src, dst, msg)) {
    ++counters_.dropped[msg.kind];
    trace_msg("drop", dst, msg);
    return;
  }
  auto& rng = link_rng(src, dst);
  if (unit(rng) < link_.drop_probability) {
    ++counters_.dropped[msg.kind];
    trace_msg("drop", dst, msg);
    return;
  }
  int copies = unit(rng) < link_.duplicate_probability ? 2 : 1;
  if (copies == 2) ++counters_.duplicated[msg.kind];
  for (int i = 0; i < copies; ++i) push(now_ + draw_delay(rng), Deliver{src, dst, msg});
}

void Simulator::send_reliable(NodeId src, NodeId dst, const Message& msg, SimTime delay) {
  if (crashed(src)) return;
  ++counters_.sent[msg.kind];
  trace_msg("send", dst, msg);
  push(now_ + delay, Deliver{src, dst, msg});
}

void Simulator::schedule_timer(NodeId node, KeyId key, SimTime at) {
  push(at, TimerFire{node, key});
}

void Simulator::schedule(SimTime at, std::function<void()> action) {
  push(at, Action{std::move(action)});
}

void Simulator::inject(FaultSpec fault) {
  if (auto* crash = std::get_if<CrashFault>(&fault)) {
    NodeId node = crash->node;
    schedule(crash->at, [this, node] {
      crashed_.insert(node);
      trace_.record(now_, "crash", node, "");
    });
  } else if (auto* part = std::get_if<PartitionFault>(&fault)) {
    if (part->end <= part->start) throw FaultError("partition window is empty");
    for (const auto& other : partitions_) {
      if (part->start < other.end && other.start < part->end)
        throw FaultError("overlapping partition windows");
    }
    std::set<NodeId> seen;
    for (const auto& group : part->groups)
      for (NodeId n : group)
        if (!seen.insert(n).second) throw FaultError("node listed in two partition groups");
    partitions_.push_back(*part);
    schedule(part->start, [this] {
      trace_.record(now_, "partition", 0, "");
      if (partition_listener_) partition_listener_();
    });
    if (part->end != kTimeNever) {
      schedule(part->end, [this] {
        trace_.record(now_, "heal", 0, "");
        if (partition_listener_) partition_listener_();
      });
    }
  } else {
    drop_rules_.push_back(std::get<DropNextFault>(fault));
  }
}

const PartitionFault* Simulator::active_partition() const {
  for (const auto& p : partitions_)
    if (p.start <= now_ && now_ < p.end) return &p;
  return nullptr;
}

namespace {

int group_of(const PartitionFault& p, NodeId n) {
  for (std::size_t i = 0; i < p.groups.size(); ++i)
    if (std::find(p.groups[i].begin(), p.groups[i].end(), n) != p.groups[i].end())
      return static_cast<int>(i);
  return -1;
}

}  // namespace

std::set<NodeId> Simulator::primary_component() const {
  std::set<NodeId> all;
  for (std::size_t i = 1; i <= replica_count_; ++i) all.insert(static_cast<NodeId>(i));
  const auto* p = active_partition();
  if (!p) return all;
  for (const auto& group : p->groups) {
    std::size_t members = 0;
    for (NodeId n : group)
      if (all.contains(n)) ++members;
    if (2 * members > replica_count_) return {group.begin(), group.end()};
  }
  return {};
}

bool Simulator::separated(NodeId a, NodeId b) const {
  if (a == b) return false;
  const auto* p = active_partition();
  if (!p) return false;
  if (a == kMembershipEndpoint || b == kMembershipEndpoint) {
    NodeId replica = a == kMembershipEndpoint ? b : a;
    return !primary_component().contains(replica);
  }
  int ga = group_of(*p, a);
  int gb = group_of(*p, b);
  return ga < 0 || gb < 0 || ga != gb;
}

RunStatus Simulator::run_until(SimTime until) {
  stop_requested_ = false;
  while (!queue_.empty()) {
    if (stop_requested_) return RunStatus::Stopped;
    if (queue_.top().time > until) {
      now_ = until;
      return RunStatus::TimeLimit;
    }
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ++counters_.events;
    if (++events_since_progress_ > livelock_bound_)
      throw LivelockError("event bound exceeded without client progress at t=" +
                          std::to_string(now_));
    if (auto* d = std::get_if<Deliver>(&ev.payload)) {
      if (crashed(d->dst) || crashed(d->src) || separated(d->src, d->dst)) {
        ++counters_.dropped[d->msg.kind];
        trace_msg("lost", d->dst, d->msg);
        continue;
      }
      ++counters_.delivered[d->msg.kind];
      trace_msg("deliver", d->dst, d->msg);
      if (handler_) handler_->on_deliver(d->src, d->dst, d->msg);
    } else if (auto* t = std::get_if<TimerFire>(&ev.payload)) {
      if (crashed(t->node)) continue;
      if (handler_) handler_->on_timer(t->node, t->key);
    } else {
      std::get<Action>(ev.payload).fn();
    }
  }
  return RunStatus::Quiescent;
}

}  // namespace hermes::sim
