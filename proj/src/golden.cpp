#include "hermes/golden.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace hermes {

namespace {

constexpr KeyId kA = 0;
constexpr SimTime kStep = 10 * kMicrosecond;

struct InFlight {
  NodeId src;
  NodeId dst;
  Message msg;
};

class Script {
 public:
  Script() {
    ProtocolConfig cfg;
    // The walkthrough uses the base protocol with no optimizations.
    cfg.skip_trans_val = false;
    cfg.mlt = 5 * kMicrosecond;
    MembershipView view{1, {1, 2, 3}, {}, kTimeNever};
    for (NodeId id = 1; id <= 3; ++id) {
      nodes_.emplace_back(id, cfg, 1, "0");
      nodes_.back().bootstrap(view);
    }
  }

  std::vector<std::string> snapshot() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_) {
      if (crashed_.contains(n.id())) {
        out.push_back("X");
        continue;
      }
      const auto& r = n.store().get(kA);
      out.push_back(r.value + (r.state == KeyState::Valid ? "b" : "o"));
    }
    return out;
  }

  void write(NodeId n, const std::string& v, OpId op) {
    absorb(n, node(n).client_write(kA, v, op, tick()));
  }
  void read(NodeId n, OpId op) { absorb(n, node(n).client_read(kA, op, tick())); }
  void deliver(NodeId src, NodeId dst, MsgKind kind) {
    auto m = take(src, dst, kind);
    absorb(dst, node(dst).on_message(m.msg, tick()));
  }
  void drop(NodeId src, NodeId dst, MsgKind kind) {
    take(src, dst, kind);
    tick();
  }
  void crash(NodeId n) {
    crashed_.insert(n);
    std::erase_if(wire_, [n](const InFlight& f) { return f.dst == n; });
    tick();
  }
  void install(NodeId n) {
    MembershipView v{2, {1, 2}, {}, kTimeNever};
    absorb(n, node(n).apply_membership(v, tick()));
  }
  void fire(NodeId n) { absorb(n, node(n).on_timer(kA, tick())); }

  std::vector<Completion> completions;

 private:
  HermesNode& node(NodeId n) { return nodes_[n - 1]; }
  SimTime tick() { return now_ += kStep; }

  InFlight take(NodeId src, NodeId dst, MsgKind kind) {
    auto it = std::ranges::find_if(wire_, [&](const InFlight& f) {
      return f.src == src && f.dst == dst && f.msg.kind == kind;
    });
    if (it == wire_.end())
      throw std::logic_error(std::string("no ") + to_string(kind) + " in flight from " +
                             std::to_string(src) + " to " + std::to_string(dst));
    InFlight f = *it;
    wire_.erase(it);
    return f;
  }

  void absorb(NodeId from, NodeEffects fx) {
    for (auto& o : fx.messages)
      if (!crashed_.contains(o.dst)) wire_.push_back({from, o.dst, std::move(o.msg)});
    completions.insert(completions.end(), fx.completions.begin(), fx.completions.end());
  }

  std::vector<HermesNode> nodes_;
  std::vector<InFlight> wire_;
  std::set<NodeId> crashed_;
  SimTime now_ = 0;
};

struct ScriptStep {
  std::string action;
  std::function<void(Script&)> run;
};

const std::vector<ScriptStep>& schedule() {
  using K = MsgKind;
  static const std::vector<ScriptStep> steps = {
      {"node 1 writes A=1", [](Script& s) { s.write(1, "1", 1); }},
      {"node 3 writes A=3", [](Script& s) { s.write(3, "3", 2); }},
      {"INV(1) reaches node 2", [](Script& s) { s.deliver(1, 2, K::Inv); }},
      {"INV(1) reaches node 3", [](Script& s) { s.deliver(1, 3, K::Inv); }},
      {"INV(3) reaches node 2", [](Script& s) { s.deliver(3, 2, K::Inv); }},
      {"INV(3) reaches node 1", [](Script& s) { s.deliver(3, 1, K::Inv); }},
      {"node 2 reads A (stalls)", [](Script& s) { s.read(2, 3); }},
      {"ACK from node 2 reaches node 3", [](Script& s) { s.deliver(2, 3, K::Ack); }},
      {"ACK from node 1 reaches node 3", [](Script& s) { s.deliver(1, 3, K::Ack); }},
      {"VAL(3) reaches node 2", [](Script& s) { s.deliver(3, 2, K::Val); }},
      {"ACK from node 2 reaches node 1", [](Script& s) { s.deliver(2, 1, K::Ack); }},
      {"ACK from node 3 reaches node 1", [](Script& s) { s.deliver(3, 1, K::Ack); }},
      {"VAL(3) to node 1 is lost", [](Script& s) { s.drop(3, 1, K::Val); }},
      {"node 3 crashes", [](Script& s) { s.crash(3); }},
      {"node 1 installs the membership update", [](Script& s) { s.install(1); }},
      {"node 2 installs the membership update", [](Script& s) { s.install(2); }},
      {"node 1 reads A (stalls)", [](Script& s) { s.read(1, 4); }},
      {"mlt expires at node 1: write replay", [](Script& s) { s.fire(1); }},
      {"replay INV reaches node 2", [](Script& s) { s.deliver(1, 2, K::Inv); }},
      {"ACK from node 2 reaches node 1", [](Script& s) { s.deliver(2, 1, K::Ack); }},
  };
  return steps;
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
  return out;
}

}  // namespace

std::size_t concurrent_write_example_length() { return schedule().size(); }

std::size_t concurrent_write_example_crash_step() { return 13; }

const std::vector<std::string>& concurrent_write_expected_strip() {
  static const std::vector<std::string> strip = {
      "0b,0b,0b", "1o,0b,0b", "1o,0b,3o", "1o,1o,3o", "1o,3o,3o",
      "3o,3o,3o", "3o,3o,3b", "3o,3b,3b", "3o,3b,X",  "3b,3b,X",
  };
  return strip;
}

GoldenResult run_concurrent_write_example(std::size_t steps) {
  GoldenResult result;
  Script script;
  result.strip.push_back(join(script.snapshot()));
  const auto& sched = schedule();
  const std::size_t n = std::min(steps, sched.size());
  for (std::size_t i = 0; i < n; ++i) {
    try {
      sched[i].run(script);
    } catch (const std::logic_error& e) {
      result.mismatch = "step " + std::to_string(i + 1) + " (" + sched[i].action + "): " + e.what();
      result.completions = script.completions;
      return result;
    }
    auto cells = script.snapshot();
    result.steps.push_back({sched[i].action, cells});
    auto col = join(cells);
    if (col != result.strip.back()) result.strip.push_back(col);
  }
  result.completions = script.completions;

  const auto& expected = concurrent_write_expected_strip();
  for (std::size_t i = 0; i < result.strip.size(); ++i) {
    if (i >= expected.size() || result.strip[i] != expected[i]) {
      result.mismatch = "snapshot " + std::to_string(i + 1) + ": got " + result.strip[i] +
                        ", expected " + (i < expected.size() ? expected[i] : "<end>");
      return result;
    }
  }
  if (n == sched.size() && result.strip.size() != expected.size()) {
    result.mismatch = "strip ended after " + std::to_string(result.strip.size()) + " snapshots, expected " +
                      std::to_string(expected.size());
    return result;
  }
  result.matches = true;
  return result;
}

}  // namespace hermes
