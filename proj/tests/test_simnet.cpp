#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "hermes/protocol.hpp"
#include "hermes/simnet.hpp"

using namespace hermes;
using namespace hermes::sim;

namespace {

struct Delivery {
  SimTime at;
  NodeId src;
  NodeId dst;
  Message msg;
};

struct Recorder : SimHandler {
  Simulator* sim = nullptr;
  std::vector<Delivery> got;
  std::vector<std::pair<NodeId, KeyId>> timers;
  void on_deliver(NodeId src, NodeId dst, const Message& msg) override {
    got.push_back({sim->now(), src, dst, msg});
  }
  void on_timer(NodeId node, KeyId key) override { timers.emplace_back(node, key); }
};

LinkModel exact(SimTime d) {
  LinkModel l;
  l.base_delay = d;
  l.jitter_fraction = 0.0;
  return l;
}

Message probe(KeyId key = 0, MsgKind kind = MsgKind::Inv) {
  Message m = Message::inv(1, 1, key, {2, 1}, "v", false);
  m.kind = kind;
  return m;
}

}  // namespace

TEST_CASE("lossless link delivers exactly once at now + delay") {
  Simulator sim(1, exact(10), 3);
  Recorder r;
  r.sim = &sim;
  sim.set_handler(&r);
  sim.send(1, 2, probe());
  CHECK(sim.run_until(kTimeNever) == RunStatus::Quiescent);
  REQUIRE(r.got.size() == 1);
  CHECK(r.got[0].at == 10);
  CHECK(r.got[0].dst == 2);
}

TEST_CASE("jitter stays within [base, base + 0.2 base] and reorders") {
  LinkModel l;
  l.base_delay = 10 * kMicrosecond;
  Simulator sim(42, l, 3);
  Recorder r;
  r.sim = &sim;
  sim.set_handler(&r);
  for (KeyId k = 0; k < 200; ++k) sim.send(1, 2, probe(k));
  sim.run_until(kTimeNever);
  REQUIRE(r.got.size() == 200);
  bool reordered = false;
  for (std::size_t i = 0; i < r.got.size(); ++i) {
    CHECK(r.got[i].at >= 10 * kMicrosecond);
    CHECK(r.got[i].at <= 12 * kMicrosecond);
    if (i > 0 && r.got[i].msg.key < r.got[i - 1].msg.key) reordered = true;
  }
  CHECK(reordered);
}

TEST_CASE("drop and duplicate probabilities at the extremes") {
  auto l = exact(5);
  l.drop_probability = 1.0;
  Simulator lossy(3, l, 2);
  Recorder a;
  a.sim = &lossy;
  lossy.set_handler(&a);
  lossy.send(1, 2, probe());
  lossy.run_until(kTimeNever);
  CHECK(a.got.empty());

  auto d = exact(5);
  d.duplicate_probability = 1.0;
  Simulator dup(3, d, 2);
  Recorder b;
  b.sim = &dup;
  dup.set_handler(&b);
  dup.send(1, 2, probe());
  dup.run_until(kTimeNever);
  CHECK(b.got.size() == 2);
}

TEST_CASE("invalid link parameters are rejected") {
  LinkModel l;
  l.drop_probability = 1.5;
  CHECK_THROWS_AS(Simulator(1, l, 2), std::invalid_argument);
  l.drop_probability = 0;
  l.duplicate_probability = -0.1;
  CHECK_THROWS_AS(Simulator(1, l, 2), std::invalid_argument);
}

TEST_CASE("DropNext swallows exactly count matching messages") {
  Simulator sim(1, exact(10), 3);
  Recorder r;
  r.sim = &sim;
  sim.set_handler(&r);
  sim.inject(DropNextFault{MessageFilter{MsgKind::Val, {}, {}, {}}, 2});
  sim.send(1, 2, probe(0, MsgKind::Ack));
  for (int i = 0; i < 3; ++i) sim.send(1, 2, probe(static_cast<KeyId>(i), MsgKind::Val));
  sim.run_until(kTimeNever);
  REQUIRE(r.got.size() == 2);
  CHECK(r.got[0].msg.kind == MsgKind::Ack);
  CHECK(r.got[1].msg.kind == MsgKind::Val);
  CHECK(r.got[1].msg.key == 2);
  CHECK(sim.counters().dropped.at(MsgKind::Val) == 2);
}

TEST_CASE("equal-time events pop in scheduling order") {
  Simulator sim(1, exact(10), 3);
  std::vector<int> order;
  for (int i = 0; i < 5; ++i) sim.schedule(100, [&order, i] { order.push_back(i); });
  sim.run_until(kTimeNever);
  CHECK(order == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("empty workload is immediately quiescent") {
  Simulator sim(1, LinkModel{}, 3);
  CHECK(sim.run_until(kTimeNever) == RunStatus::Quiescent);
  CHECK(sim.now() == 0);
}

TEST_CASE("run_until stops at the horizon and resumes") {
  Simulator sim(1, exact(10), 3);
  Recorder r;
  r.sim = &sim;
  sim.set_handler(&r);
  sim.schedule_timer(1, 5, 50);
  sim.schedule_timer(1, 6, 150);
  CHECK(sim.run_until(100) == RunStatus::TimeLimit);
  CHECK(sim.now() == 100);
  CHECK(r.timers.size() == 1);
  sim.run_until(kTimeNever);
  CHECK(r.timers.size() == 2);
}

TEST_CASE("crashed node neither sends nor receives nor fires timers") {
  Simulator sim(1, exact(10), 3);
  Recorder r;
  r.sim = &sim;
  sim.set_handler(&r);
  sim.inject(CrashFault{3, 5});
  sim.send(1, 3, probe());  // in flight when 3 crashes
  sim.schedule(20, [&] {
    sim.send(3, 1, probe());
    sim.send(1, 2, probe());
  });
  sim.schedule_timer(3, 0, 30);
  sim.run_until(kTimeNever);
  REQUIRE(r.got.size() == 1);
  CHECK(r.got[0].dst == 2);
  CHECK(r.timers.empty());
  CHECK(sim.crashed(3));
}

TEST_CASE("partition suppresses cross-group traffic inside its window") {
  Simulator sim(1, exact(10), 5);
  Recorder r;
  r.sim = &sim;
  sim.set_handler(&r);
  sim.inject(PartitionFault{{{1, 2, 3}, {4, 5}}, 100, 200});
  sim.schedule(50, [&] { sim.send(1, 4, probe(1)); });    // lands at 60
  sim.schedule(120, [&] { sim.send(1, 4, probe(2)); });   // suppressed
  sim.schedule(130, [&] { sim.send(1, 2, probe(3)); });   // same side
  sim.schedule(195, [&] { sim.send(1, 4, probe(4)); });   // lands at 205, after heal
  sim.run_until(kTimeNever);
  std::vector<KeyId> keys;
  for (const auto& d : r.got) keys.push_back(d.msg.key);
  CHECK(keys == std::vector<KeyId>{1, 3, 4});
}

TEST_CASE("partition bookkeeping: majority side and overlap rejection") {
  Simulator sim(1, exact(10), 5);
  sim.inject(PartitionFault{{{1, 2, 3}, {4, 5}}, 100, 200});
  CHECK_THROWS_AS(sim.inject(PartitionFault{{{1}, {2, 3, 4, 5}}, 150, 300}), FaultError);
  CHECK_THROWS_AS(sim.inject(PartitionFault{{{1}, {2}}, 300, 300}), FaultError);
  sim.inject(PartitionFault{{{1, 2}, {3, 4}}, 200, 300});
  sim.run_until(150);
  CHECK(sim.primary_component() == std::set<NodeId>{1, 2, 3});
  CHECK(sim.separated(4, kMembershipEndpoint));
  CHECK_FALSE(sim.separated(2, kMembershipEndpoint));
  sim.run_until(250);
  CHECK(sim.primary_component().empty());
  sim.run_until(350);
  CHECK(sim.primary_component().size() == 5);
}

TEST_CASE("same seed reproduces a byte-identical trace") {
  auto run = [](std::uint64_t seed) {
    LinkModel l;
    l.drop_probability = 0.1;
    l.duplicate_probability = 0.1;
    Simulator sim(seed, l, 3);
    sim.trace().enable(true);
    Recorder r;
    r.sim = &sim;
    sim.set_handler(&r);
    for (KeyId k = 0; k < 50; ++k) sim.send(1 + k % 3, 1 + (k + 1) % 3, probe(k));
    sim.run_until(kTimeNever);
    return sim.trace().text();
  };
  CHECK(run(7) == run(7));
  CHECK(run(7) != run(8));
}

TEST_CASE("trace lines have four tab-separated fields") {
  Simulator sim(1, exact(10), 3);
  sim.trace().enable(true);
  sim.send(1, 2, probe());
  sim.run_until(kTimeNever);
  const auto& text = sim.trace().text();
  auto first = text.substr(0, text.find('\n'));
  CHECK(std::count(first.begin(), first.end(), '\t') == 3);
  CHECK(first.rfind("0\tsend\t2\t", 0) == 0);
  CHECK(first.substr(first.rfind('\t') + 1) == to_hex(encode(probe())));
}

TEST_CASE("livelock guard trips without progress and not with it") {
  Simulator sim(1, exact(1), 2);
  sim.set_livelock_bound(1000);
  std::function<void()> spin = [&] { sim.schedule(sim.now() + 1, spin); };
  sim.schedule(0, spin);
  CHECK_THROWS_AS(sim.run_until(kTimeNever), LivelockError);

  Simulator ok(1, exact(1), 2);
  ok.set_livelock_bound(1000);
  std::function<void()> work = [&] {
    ok.note_progress();
    ok.schedule(ok.now() + 1, work);
  };
  ok.schedule(0, work);
  CHECK(ok.run_until(1'000'000) == RunStatus::TimeLimit);
  CHECK(ok.counters().events > 1000);
}

TEST_CASE("duplicate INV delivery leaves the same follower state as one delivery") {
  ProtocolConfig cfg;
  auto make = [&] {
    HermesNode n(2, cfg, 4, "0");
    n.bootstrap(MembershipView{1, {1, 2, 3}, {}, kTimeNever});
    return n;
  };
  auto once = make();
  auto twice = make();
  const auto inv = Message::inv(1, 1, 0, {2, 1}, "5", false);
  auto fx1 = once.on_message(inv, 10);
  twice.on_message(inv, 10);
  auto fx2 = twice.on_message(inv, 12);
  CHECK(once.store().get(0).ts == twice.store().get(0).ts);
  CHECK(once.store().get(0).value == twice.store().get(0).value);
  CHECK(once.store().get(0).state == twice.store().get(0).state);
  // The repeat is still acknowledged so a lost ACK can be recovered.
  REQUIRE(fx2.messages.size() == 1);
  CHECK(fx2.messages[0].msg.kind == MsgKind::Ack);
}
