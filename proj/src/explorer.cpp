#include "hermes/explorer.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "hermes/linearizability.hpp"

namespace hermes {

namespace {

// Simulated time stands still; with mlt = 0 every armed timer is due.
constexpr SimTime kNow = 1;
constexpr std::size_t kMaxExamples = 5;

struct Flight {
  NodeId src = 0;
  NodeId dst = 0;
  Message msg;

  friend bool operator==(const Flight&, const Flight&) = default;
};

struct State {
  std::vector<HermesNode> nodes;
  std::vector<Flight> flight;
  std::vector<ExplorerOp> ops;  // grows when probes are added
  std::vector<bool> invoked;
  std::vector<std::optional<Completion>> results;
  std::vector<HistoryEvent> history;
  std::uint32_t drops = 0;
  std::uint32_t dups = 0;
  std::uint32_t early = 0;
  bool crashed = false;
  std::set<NodeId> updated;
  bool probed = false;
};

void put_record(ByteWriter& w, const KeyRecord& r) {
  w.u8(static_cast<std::uint8_t>(r.state));
  w.u32(r.ts.version);
  w.u32(r.ts.cid);
  w.bytes(r.value);
  w.u8(r.rmw_flag);
  w.u8(r.pending.has_value());
  if (r.pending) {
    const auto& p = *r.pending;
    w.u32(p.ts.version);
    w.u32(p.ts.cid);
    w.bytes(p.value);
    w.u8(p.is_rmw);
    w.u32(static_cast<std::uint32_t>(p.acks_needed.size()));
    for (auto n : p.acks_needed) w.u32(n);
    w.u32(static_cast<std::uint32_t>(p.acks_received.size()));
    for (auto n : p.acks_received) w.u32(n);
    w.u64(p.client_op.value_or(~OpId{0}));
    w.bytes(p.observed);
  }
  w.u64(r.mlt_deadline ? static_cast<std::uint64_t>(*r.mlt_deadline) : ~std::uint64_t{0});
  w.u32(static_cast<std::uint32_t>(r.stalled_ops.size()));
  for (const auto& s : r.stalled_ops) {
    w.u64(s.op);
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.bytes(s.value);
    w.u8(static_cast<std::uint8_t>(s.rmw.kind));
    w.bytes(s.rmw.expected);
    w.bytes(s.rmw.desired);
    w.u64(static_cast<std::uint64_t>(s.rmw.delta));
  }
  w.u8(r.replay_witness.has_value());
  if (r.replay_witness) {
    w.u32(r.replay_witness->version);
    w.u32(r.replay_witness->cid);
  }
  w.u8(r.validated_in_trans);
  w.u32(r.inv_sender);
  w.u32(static_cast<std::uint32_t>(r.peer_acks.size()));
  for (auto n : r.peer_acks) w.u32(n);
}

// Full canonical serialization: two states share a key only if every
// protocol-relevant field matches.
std::string state_key(const State& s) {
  ByteWriter w;
  for (const auto& n : s.nodes) {
    w.u64(n.view().epoch);
    w.u32(static_cast<std::uint32_t>(n.view().live.size()));
    for (auto id : n.view().live) w.u32(id);
    w.u8(static_cast<std::uint8_t>(n.phase()));
    put_record(w, n.store().get(0));
  }
  std::vector<std::string> flights;
  for (const auto& f : s.flight) {
    ByteWriter fw;
    fw.u32(f.src);
    fw.u32(f.dst);
    auto enc = encode(f.msg);
    fw.bytes(std::string(enc.begin(), enc.end()));
    flights.push_back(fw.str());
  }
  std::ranges::sort(flights);
  w.u32(static_cast<std::uint32_t>(flights.size()));
  for (const auto& f : flights) w.bytes(f);
  w.u32(static_cast<std::uint32_t>(s.ops.size()));
  for (std::size_t i = 0; i < s.ops.size(); ++i) {
    w.u8(s.invoked[i]);
    w.u8(s.results[i].has_value());
    if (s.results[i]) {
      w.u8(static_cast<std::uint8_t>(s.results[i]->status));
      w.bytes(s.results[i]->value);
      w.u32(s.results[i]->ts.version);
      w.u32(s.results[i]->ts.cid);
    }
  }
  for (const auto& ev : s.history) {
    w.u64(ev.op);
    w.u8(static_cast<std::uint8_t>(ev.phase));
  }
  w.u32(s.drops);
  w.u32(s.dups);
  w.u32(s.early);
  w.u8(s.crashed);
  for (auto n : s.updated) w.u32(n);
  w.u8(s.probed);
  return w.str();
}

class Explorer {
 public:
  explicit Explorer(const ExplorerConfig& c) : c_(c) { report_.name = c.name; }

  ExplorationReport run() {
    State init;
    MembershipView view{1, {}, {}, kTimeNever};
    for (NodeId id = 1; id <= c_.nodes; ++id) view.live.insert(id);
    for (NodeId id = 1; id <= c_.nodes; ++id) {
      init.nodes.emplace_back(id, c_.protocol, 1, "0");
      init.nodes.back().bootstrap(view);
    }
    init.ops = c_.ops;
    init.invoked.assign(c_.ops.size(), false);
    init.results.assign(c_.ops.size(), std::nullopt);
    visit(std::move(init));
    return report_;
  }

 private:
  OpId op_id(std::size_t index) const { return index + 1; }

  bool live(const State& s, NodeId id) const { return !(s.crashed && c_.crash && *c_.crash == id); }

  void absorb(State& s, NodeId node, NodeEffects fx) {
    for (auto& out : fx.messages) {
      if (!live(s, out.dst)) continue;
      s.flight.push_back({node, out.dst, std::move(out.msg)});
    }
    for (const auto& c : fx.completions) {
      const auto index = static_cast<std::size_t>(c.op - 1);
      if (index >= s.results.size() || s.results[index]) continue;
      s.results[index] = c;
      HistoryEvent ev;
      ev.time = static_cast<SimTime>(s.history.size());
      ev.op = c.op;
      ev.phase = EventPhase::Complete;
      ev.kind = s.ops[index].kind;
      ev.value = c.value;
      ev.status = c.status;
      ev.ts = c.ts;
      s.history.push_back(ev);
    }
  }

  void invoke(State& s, std::size_t index) {
    const auto& op = s.ops[index];
    s.invoked[index] = true;
    HistoryEvent ev;
    ev.time = static_cast<SimTime>(s.history.size());
    ev.op = op_id(index);
    ev.kind = op.kind;
    ev.value = op.value;
    ev.rmw = op.rmw;
    s.history.push_back(ev);
    auto& node = s.nodes[op.node - 1];
    NodeEffects fx;
    switch (op.kind) {
      case OpKind::Read:
        fx = node.client_read(0, op_id(index), kNow);
        break;
      case OpKind::Write:
        fx = node.client_write(0, op.value, op_id(index), kNow);
        break;
      case OpKind::Rmw:
        fx = node.client_rmw(0, op.rmw, op_id(index), kNow);
        break;
    }
    absorb(s, op.node, std::move(fx));
  }

  void visit(State s) {
    auto key = state_key(s);
    if (!seen_.insert(key).second) return;
    ++report_.states;
    if (report_.states > c_.state_bound) {
      report_.complete = false;
      return;
    }

    bool moved = false;
    auto step = [&](State next) {
      ++report_.transitions;
      moved = true;
      visit(std::move(next));
    };

    // Deliveries, drops and duplications of each distinct in-flight message.
    for (std::size_t i = 0; i < s.flight.size(); ++i) {
      if (std::find(s.flight.begin(), s.flight.begin() + static_cast<long>(i), s.flight[i]) !=
          s.flight.begin() + static_cast<long>(i))
        continue;
      const Flight f = s.flight[i];
      auto deliver = [&](bool keep) {
        State n = s;
        if (!keep) n.flight.erase(n.flight.begin() + static_cast<long>(i));
        if (live(n, f.dst)) absorb(n, f.dst, n.nodes[f.dst - 1].on_message(f.msg, kNow));
        return n;
      };
      step(deliver(false));
      if (s.dups < c_.max_duplicates) {
        State n = deliver(true);
        ++n.dups;
        step(std::move(n));
      }
      if (s.drops < c_.max_drops) {
        State n = s;
        n.flight.erase(n.flight.begin() + static_cast<long>(i));
        ++n.drops;
        step(std::move(n));
      }
    }

    for (std::size_t i = 0; i < s.ops.size(); ++i) {
      if (s.invoked[i] || !live(s, s.ops[i].node)) continue;
      State n = s;
      invoke(n, i);
      step(std::move(n));
    }

    for (NodeId id = 1; id <= c_.nodes; ++id) {
      if (!live(s, id) || !s.nodes[id - 1].store().get(0).mlt_deadline) continue;
      const bool early = !s.flight.empty();
      if (early && s.early >= c_.early_timer_fires) continue;
      State n = s;
      if (early) ++n.early;
      absorb(n, id, n.nodes[id - 1].on_timer(0, kNow));
      if (state_key(n) == key) continue;
      step(std::move(n));
    }

    if (c_.crash && !s.crashed) {
      State n = s;
      n.crashed = true;
      std::erase_if(n.flight, [&](const Flight& f) { return f.dst == *c_.crash; });
      step(std::move(n));
    }
    if (s.crashed && c_.reconfigure) {
      MembershipView v{2, {}, {}, kTimeNever};
      for (NodeId id = 1; id <= c_.nodes; ++id)
        if (id != *c_.crash) v.live.insert(id);
      for (NodeId id : v.live) {
        if (s.updated.contains(id)) continue;
        State n = s;
        n.updated.insert(id);
        absorb(n, id, n.nodes[id - 1].apply_membership(v, kNow));
        step(std::move(n));
      }
    }

    if (moved) return;
    if (c_.probe_reads && !s.probed) {
      State n = s;
      n.probed = true;
      for (NodeId id = 1; id <= c_.nodes; ++id) {
        if (!live(n, id)) continue;
        n.ops.push_back(ExplorerOp{id, OpKind::Read, {}, {}});
        n.invoked.push_back(false);
        n.results.emplace_back();
        invoke(n, n.ops.size() - 1);
      }
      step(std::move(n));
      return;
    }
    check_terminal(s);
  }

  void flag(std::uint64_t& counter, const State& s, const std::string& what) {
    ++counter;
    if (report_.examples.size() >= kMaxExamples) return;
    std::ostringstream out;
    out << what << " | history:";
    for (const auto& ev : s.history) out << "\n    " << format_event(ev);
    report_.examples.push_back(out.str());
  }

  void check_terminal(const State& s) {
    ++report_.terminals;
    for (std::size_t i = 0; i < s.ops.size(); ++i) {
      if (!live(s, s.ops[i].node)) continue;
      if (!s.results[i]) {
        flag(report_.deadlocks, s, "op " + std::to_string(op_id(i)) + " never completed");
        return;
      }
      if (s.ops[i].kind == OpKind::Write && s.results[i]->status != OpStatus::Ok)
        flag(report_.violations, s, "write " + std::to_string(op_id(i)) + " did not commit");
    }

    std::map<std::uint32_t, int> rmw_bases;
    bool any_rmw = false;
    for (std::size_t i = 0; i < s.ops.size(); ++i) {
      if (s.ops[i].kind != OpKind::Rmw || !s.results[i] || s.results[i]->status != OpStatus::Ok)
        continue;
      any_rmw = true;
      if (++rmw_bases[s.results[i]->ts.version - 1] > 1)
        flag(report_.violations, s, "two RMWs committed from the same base version");
    }
    if (any_rmw) ++report_.rmw_commit_terminals;

    if (!check_key_history(s.history, "0").linearizable)
      flag(report_.violations, s, "history is not linearizable");

    std::optional<std::pair<Timestamp, std::string>> agreed;
    for (NodeId id = 1; id <= c_.nodes; ++id) {
      if (!live(s, id)) continue;
      const auto& r = s.nodes[id - 1].store().get(0);
      if (r.state != KeyState::Valid) {
        flag(report_.violations, s, "replica " + std::to_string(id) + " ended " + to_string(r.state));
        return;
      }
      if (!agreed) agreed.emplace(r.ts, r.value);
      if (agreed->first != r.ts || agreed->second != r.value) {
        flag(report_.violations, s, "replicas disagree on the final value");
        return;
      }
    }
  }

  const ExplorerConfig& c_;
  ExplorationReport report_;
  std::unordered_set<std::string> seen_;
};

}  // namespace

void ExplorerConfig::validate() const {
  if (nodes < 1 || nodes > 3) throw std::invalid_argument("explorer supports 1 to 3 nodes");
  if (ops.empty() || ops.size() > 4) throw std::invalid_argument("explorer supports 1 to 4 client ops");
  if (max_drops + max_duplicates > 2)
    throw std::invalid_argument("explorer supports at most 2 drops/duplications");
  for (const auto& op : ops)
    if (op.node < 1 || op.node > nodes) throw std::invalid_argument("op node out of range");
  if (crash && (*crash < 1 || *crash > nodes)) throw std::invalid_argument("crash node out of range");
  if (protocol.mlt != 0) throw std::invalid_argument("explorer requires mlt = 0");
}

ExplorationReport explore(const ExplorerConfig& config) {
  config.validate();
  return Explorer(config).run();
}

std::vector<ExplorerConfig> standard_explorations() {
  ProtocolConfig p;
  p.mlt = 0;
  std::vector<ExplorerConfig> out;

  ExplorerConfig a;
  a.name = "concurrent-writes";
  a.nodes = 3;
  a.protocol = p;
  a.ops = {{1, OpKind::Write, "1", {}}, {3, OpKind::Write, "3", {}}, {2, OpKind::Read, {}, {}}};
  a.early_timer_fires = 1;
  out.push_back(a);

  ExplorerConfig b;
  b.name = "write-rmw-race";
  b.nodes = 3;
  b.protocol = p;
  b.ops = {{1, OpKind::Write, "1", {}},
           {2, OpKind::Rmw, {}, RmwSpec::compare_and_swap("0", "7")},
           {3, OpKind::Rmw, {}, RmwSpec::fetch_add(5)}};
  out.push_back(b);

  ExplorerConfig c;
  c.name = "val-loss-replay";
  c.nodes = 2;
  c.protocol = p;
  c.ops = {{1, OpKind::Write, "5", {}}, {2, OpKind::Read, {}, {}}};
  c.max_drops = 1;
  c.max_duplicates = 1;
  c.early_timer_fires = 1;
  out.push_back(c);

  ExplorerConfig d;
  d.name = "crash-reconfigure";
  d.nodes = 3;
  d.protocol = p;
  d.ops = {{1, OpKind::Write, "4", {}}, {2, OpKind::Write, "6", {}}, {2, OpKind::Read, {}, {}}};
  d.crash = 3;
  d.early_timer_fires = 1;
  out.push_back(d);

  // The CAS at node 1 must not be based on "1" once node 3's write has
  // overtaken it.
  ExplorerConfig e;
  e.name = "stale-base-rmw";
  e.nodes = 3;
  e.protocol = p;
  e.ops = {{1, OpKind::Write, "1", {}},
           {1, OpKind::Rmw, {}, RmwSpec::compare_and_swap("1", "7")},
           {3, OpKind::Write, "3", {}},
           {3, OpKind::Read, {}, {}}};
  out.push_back(e);
  return out;
}

namespace {

bool flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw std::invalid_argument(key + ": expected a boolean, got '" + v + "'");
}

std::uint64_t count(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::logic_error&) {
    throw std::invalid_argument(key + ": expected a count, got '" + v + "'");
  }
}

ExplorerOp parse_op(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  ExplorerOp op;
  in >> kind >> op.node;
  if (!in) throw std::invalid_argument("op: expected KIND NODE ..., got '" + text + "'");
  if (kind == "write") {
    op.kind = OpKind::Write;
    in >> op.value;
  } else if (kind == "read") {
    op.kind = OpKind::Read;
  } else if (kind == "cas") {
    std::string e, d;
    in >> e >> d;
    op.kind = OpKind::Rmw;
    op.rmw = RmwSpec::compare_and_swap(e, d);
  } else if (kind == "faa") {
    std::int64_t delta = 0;
    in >> delta;
    op.kind = OpKind::Rmw;
    op.rmw = RmwSpec::fetch_add(delta);
  } else {
    throw std::invalid_argument("op: unknown kind '" + kind + "'");
  }
  if (in.fail()) throw std::invalid_argument("op: missing argument in '" + text + "'");
  std::string extra;
  if (in >> extra) throw std::invalid_argument("op: trailing '" + extra + "'");
  return op;
}

}  // namespace

ExplorerConfig parse_explorer_config(std::istream& in) {
  ExplorerConfig c;
  c.protocol.mlt = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw std::invalid_argument("expected key = value, got '" + trim(line) + "'");
    const auto key = trim(line.substr(0, eq));
    const auto v = trim(line.substr(eq + 1));
    if (key == "name") c.name = v;
    else if (key == "nodes") c.nodes = static_cast<std::uint32_t>(count(key, v));
    else if (key == "op") c.ops.push_back(parse_op(v));
    else if (key == "max_drops") c.max_drops = static_cast<std::uint32_t>(count(key, v));
    else if (key == "max_duplicates") c.max_duplicates = static_cast<std::uint32_t>(count(key, v));
    else if (key == "early_timer_fires") c.early_timer_fires = static_cast<std::uint32_t>(count(key, v));
    else if (key == "crash") c.crash = static_cast<NodeId>(count(key, v));
    else if (key == "reconfigure") c.reconfigure = flag(key, v);
    else if (key == "probe_reads") c.probe_reads = flag(key, v);
    else if (key == "state_bound") c.state_bound = count(key, v);
    else if (key == "o1") c.protocol.skip_trans_val = flag(key, v);
    else if (key == "o3") c.protocol.broadcast_acks = flag(key, v);
    else throw std::invalid_argument("unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

}  // namespace hermes
