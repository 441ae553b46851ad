#include "hermes/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <sstream>

#include "hermes/craq.hpp"
#include "hermes/simnet.hpp"
#include "hermes/workload.hpp"

namespace hermes {

double RunMetrics::read_local_fraction() const {
  return reads_completed == 0 ? 1.0
                              : static_cast<double>(reads_local) / static_cast<double>(reads_completed);
}

double RunMetrics::tail_redirect_fraction() const {
  const auto total = reads_local + craq_reads_redirected;
  return total == 0 ? 0.0 : static_cast<double>(craq_reads_redirected) / static_cast<double>(total);
}

std::uint64_t RunMetrics::sent(MsgKind k) const {
  auto it = messages_sent.find(k);
  return it == messages_sent.end() ? 0 : it->second;
}

SimTime percentile(std::vector<SimTime> sample, double p) {
  if (sample.empty()) return 0;
  std::ranges::sort(sample);
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sample.size())));
  return sample[std::clamp<std::size_t>(rank, 1, sample.size()) - 1];
}

namespace {

bool membership_kind(MsgKind k) {
  return k == MsgKind::Heartbeat || k == MsgKind::Lease || k == MsgKind::MUpdate;
}

class Cluster : public sim::SimHandler {
 public:
  Cluster(const Scenario& s, const RunOptions& options)
      : s_(s),
        sim_(s.seed, s.link, s.nodes),
        rm_(all_nodes(s.nodes), s.membership),
        initial_(format_numeric(0, s.workload.value_size)) {
    sim_.set_handler(this);
    sim_.trace().enable(options.trace);
    sim_.set_livelock_bound(options.livelock_bound);
    result_.scenario = s;
    result_.history.initial_value = initial_;
    result_.metrics.per_node_ops.assign(s.nodes, 0);

    if (s.workload.distribution == KeyDistribution::Zipfian)
      zipf_ = std::make_unique<ZipfGenerator>(s.workload.keys, s.workload.zipf_exponent);

    if (s.protocol == ProtocolKind::Hermes) {
      const auto view = rm_.initial_view(0);
      for (NodeId id = 1; id <= s.nodes; ++id) {
        std::vector<std::uint32_t> vids;
        if (!s.virtual_ids.empty()) vids = s.virtual_ids[id - 1];
        hermes_.emplace_back(id, s.protocol_config, s.workload.keys, initial_, std::move(vids));
        hermes_.back().bootstrap(view);
      }
    } else {
      std::vector<NodeId> chain;
      for (NodeId id = 1; id <= s.nodes; ++id) chain.push_back(id);
      for (NodeId id = 1; id <= s.nodes; ++id)
        craq_.emplace_back(id, chain, s.workload.keys, initial_);
    }

    std::uint32_t index = 0;
    for (NodeId id = 1; id <= s.nodes; ++id) {
      for (std::uint32_t c = 0; c < s.clients_per_node; ++c, ++index) {
        clients_.push_back(Client{index, id, OpStream(s.workload, s.seed, index, zipf_.get()), {}, 0});
      }
    }
  }

  RunResult run() {
    for (const auto& f : s_.faults) sim_.inject(f);
    const SimTime end = s_.duration + s_.drain;
    if (s_.protocol == ProtocolKind::Hermes) {
      sim_.set_partition_listener([this] {
        if (sim_.active_partition()) {
          rm_.partition_gate(sim_.primary_component());
        } else {
          rm_.partition_gate(std::nullopt);
        }
      });
      for (const auto& sp : s_.suspicions) {
        NodeId node = sp.node;
        sim_.schedule(sp.at, [this, node] { rm_.suspect(node); });
      }
      const SimTime interval = s_.membership.detector_interval;
      for (SimTime t = interval / 2; t <= end; t += interval) {
        sim_.schedule(t, [this] { rm_tick(); });
      }
      if (s_.heartbeats) {
        for (SimTime t = 0; t <= end; t += interval) {
          sim_.schedule(t, [this] { heartbeat(); });
        }
      }
    }
    for (auto& c : clients_) {
      const std::uint32_t idx = c.index;
      sim_.schedule(0, [this, idx] { issue(idx); });
    }

    sim_.run_until(end);
    finish();
    return std::move(result_);
  }

  void on_deliver(NodeId src, NodeId dst, const Message& msg) override {
    if (dst == kMembershipEndpoint) {
      if (msg.kind == MsgKind::Heartbeat) rm_.heartbeat(src, sim_.now());
      return;
    }
    if (s_.protocol == ProtocolKind::Craq) {
      apply(dst, craq_[dst - 1].on_message(msg));
      return;
    }
    auto& node = hermes_[dst - 1];
    const Epoch before = node.view().epoch;
    auto fx = node.on_message(msg, sim_.now());
    if (node.view().epoch != before) result_.installs.push_back({dst, node.view().epoch, sim_.now()});
    apply(dst, std::move(fx));
  }

  void on_timer(NodeId node, KeyId key) override {
    if (s_.protocol == ProtocolKind::Hermes) apply(node, hermes_[node - 1].on_timer(key, sim_.now()));
  }

 private:
  struct Inflight {
    OpId op = 0;
    ClientOp request;
    NodeId node = 0;
    SimTime invoked = 0;
  };
  struct Client {
    std::uint32_t index = 0;
    NodeId node = 0;
    OpStream stream;
    std::optional<Inflight> inflight;
    std::uint64_t sequence = 0;
  };

  static std::set<NodeId> all_nodes(std::uint32_t n) {
    std::set<NodeId> out;
    for (NodeId id = 1; id <= n; ++id) out.insert(id);
    return out;
  }

  void rm_tick() {
    for (auto& d : rm_.tick(sim_.now())) sim_.send_reliable(kMembershipEndpoint, d.dst, d.msg, d.delay);
  }

  void heartbeat() {
    Message hb;
    hb.kind = MsgKind::Heartbeat;
    for (NodeId id = 1; id <= s_.nodes; ++id) {
      hb.sender = id;
      hb.epoch = hermes_[id - 1].view().epoch;
      sim_.send_reliable(id, kMembershipEndpoint, hb, s_.link.base_delay);
    }
  }

  void apply(NodeId node, NodeEffects fx) {
    for (const auto& out : fx.messages) sim_.send(node, out.dst, out.msg);
    for (const auto& t : fx.timers)
      if (t.deadline) sim_.schedule_timer(node, t.key, *t.deadline);
    for (const auto& c : fx.completions) complete(node, c);
  }

  void issue(std::uint32_t index) {
    auto& client = clients_[index];
    const SimTime now = sim_.now();
    if (now >= s_.duration || sim_.crashed(client.node) || client.inflight) return;

    ClientOp req = client.stream.next();
    const OpId op = (OpId{index + 1} << 32) | ++client.sequence;
    NodeId target = client.node;
    if (s_.protocol == ProtocolKind::Craq && req.kind == OpKind::Write) target = 1;

    bool valid_hit = false;
    NodeEffects fx;
    if (s_.protocol == ProtocolKind::Hermes) {
      auto& node = hermes_[target - 1];
      valid_hit = req.kind == OpKind::Read && node.operational(now) &&
                  node.store().get(req.key).state == KeyState::Valid;
      switch (req.kind) {
        case OpKind::Read:
          fx = node.client_read(req.key, op, now);
          break;
        case OpKind::Write:
          fx = node.client_write(req.key, req.value, op, now, req.cid_draw);
          break;
        case OpKind::Rmw:
          fx = node.client_rmw(req.key, req.rmw, op, now, req.cid_draw);
          break;
      }
    } else {
      auto& node = craq_[target - 1];
      fx = req.kind == OpKind::Read ? node.client_read(req.key, op)
                                    : node.client_write(req.key, req.value, op);
    }

    auto own = std::ranges::find(fx.completions, op, &Completion::op);
    if (own != fx.completions.end() && own->status == OpStatus::NotOperational) {
      ++result_.metrics.refused;
      sim_.schedule(now + s_.retry_backoff, [this, index] { issue(index); });
      return;
    }

    HistoryEvent ev;
    ev.time = now;
    ev.client = index;
    ev.op = op;
    ev.key = req.key;
    ev.kind = req.kind;
    ev.value = req.value;
    ev.rmw = req.rmw;
    result_.history.events.push_back(ev);
    ++result_.metrics.invocations;

    if (req.kind == OpKind::Read) {
      const bool local = own != fx.completions.end() && fx.messages.empty();
      if (valid_hit) {
        ++result_.metrics.valid_hit_reads;
        if (local) ++result_.metrics.valid_hit_local;
      }
      if (local) {
        ++result_.metrics.reads_local;
      } else if (s_.protocol == ProtocolKind::Craq) {
        ++result_.metrics.craq_reads_redirected;
      }
    }
    client.inflight = Inflight{op, std::move(req), target, now};
    apply(target, std::move(fx));
  }

  void complete(NodeId node, const Completion& c) {
    const auto index = static_cast<std::uint32_t>((c.op >> 32) - 1);
    if (index >= clients_.size()) return;
    auto& client = clients_[index];
    if (!client.inflight || client.inflight->op != c.op) return;  // already completed
    const SimTime now = sim_.now();
    const auto& req = client.inflight->request;
    auto& m = result_.metrics;

    HistoryEvent ev;
    ev.time = now;
    ev.client = index;
    ev.op = c.op;
    ev.key = req.key;
    ev.phase = EventPhase::Complete;
    ev.kind = req.kind;
    ev.value = c.value;
    ev.status = c.status;
    ev.ts = c.ts;
    ev.rmw.kind = req.rmw.kind;
    result_.history.events.push_back(ev);
    result_.completions.push_back(
        {c.op, index, node, req.key, req.kind, c.status, client.inflight->invoked, now, c.ts});

    const SimTime latency = now - client.inflight->invoked;
    switch (c.status) {
      case OpStatus::Ok:
        ++m.completed_ok;
        ++m.per_node_ops[node - 1];
        if (req.kind == OpKind::Read) {
          ++m.reads_completed;
          m.read_latencies.push_back(latency);
        } else {
          (req.kind == OpKind::Write ? m.write_latencies : m.rmw_latencies).push_back(latency);
          const auto bucket = static_cast<std::size_t>(now / s_.series_interval);
          if (m.commits_per_interval.size() <= bucket) m.commits_per_interval.resize(bucket + 1, 0);
          ++m.commits_per_interval[bucket];
        }
        break;
      case OpStatus::Aborted:
        ++m.aborts;
        break;
      case OpStatus::CasFailed:
        ++m.cas_failed;
        break;
      case OpStatus::NotOperational:
        break;
    }
    if (req.kind != OpKind::Write && !c.value.empty()) client.stream.observe(req.key, c.value);
    if (req.kind == OpKind::Rmw && c.status == OpStatus::Ok) {
      auto eval = evaluate_rmw(req.rmw, c.value);
      client.stream.observe(req.key, eval.new_value);
    }
    client.inflight.reset();
    sim_.note_progress();
    sim_.schedule(now + s_.think_time, [this, index] { issue(index); });
  }

  void finish() {
    auto& m = result_.metrics;
    for (const auto& c : clients_)
      if (c.inflight) ++m.pending_at_end;
    for (const auto& [kind, n] : sim_.counters().sent) {
      m.messages_sent[kind] = n;
      (membership_kind(kind) ? m.membership_messages : m.protocol_messages) += n;
    }
    for (const auto& node : hermes_) {
      const auto& st = node.stats();
      result_.node_stats.push_back(st);
      m.hermes.updates_issued += st.updates_issued;
      m.hermes.commits_valid += st.commits_valid;
      m.hermes.commits_trans += st.commits_trans;
      m.hermes.replays += st.replays;
      m.hermes.retransmits += st.retransmits;
      m.hermes.rmw_aborts += st.rmw_aborts;
      m.hermes.dropped_epoch += st.dropped_epoch;
      if (!sim_.crashed(node.id()) && node.phase() == JoinPhase::Operational &&
          node.view().epoch == rm_.epoch() && rm_.live().contains(node.id())) {
        std::ostringstream dump;
        node.store().dump(dump);
        result_.final_stores[node.id()] = dump.str();
      }
    }
    result_.membership = rm_.history();
    result_.trace = sim_.trace().text();
  }

  Scenario s_;
  sim::Simulator sim_;
  MembershipService rm_;
  std::string initial_;
  std::unique_ptr<ZipfGenerator> zipf_;
  std::vector<HermesNode> hermes_;
  std::vector<CraqNode> craq_;
  std::vector<Client> clients_;
  RunResult result_;
};

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  scenario.validate();
  Cluster cluster(scenario, options);
  return cluster.run();
}

std::string csv_header() {
  return std::string(kCsvSchema) + "\n" +
         "scenario_id,protocol,nodes,write_ratio,distribution,ops_committed,aborts,"
         "read_local_fraction,lat_p50_read,lat_p99_read,lat_p50_write,lat_p99_write,msgs_total,"
         "sim_duration\n";
}

std::string csv_row(const RunResult& r) {
  const auto& s = r.scenario;
  const auto& m = r.metrics;
  std::ostringstream out;
  out << s.id << ',' << to_string(s.protocol) << ',' << s.nodes << ',' << fixed(s.workload.write_ratio)
      << ',' << to_string(s.workload.distribution) << ',' << m.completed_ok << ',' << m.aborts << ','
      << fixed(m.read_local_fraction()) << ',' << percentile(m.read_latencies, 0.5) << ','
      << percentile(m.read_latencies, 0.99) << ',' << percentile(m.write_latencies, 0.5) << ','
      << percentile(m.write_latencies, 0.99) << ',' << m.protocol_messages + m.membership_messages << ',' << s.duration << '\n';
  return out.str();
}

}  // namespace hermes
