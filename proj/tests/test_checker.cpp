#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "hermes/checker_selftest.hpp"
#include "hermes/linearizability.hpp"

using namespace hermes;

namespace {

HistoryEvent inv(SimTime t, OpId op, OpKind kind, std::string value = {}, std::uint32_t client = 0) {
  HistoryEvent e;
  e.time = t;
  e.client = client;
  e.op = op;
  e.kind = kind;
  e.value = std::move(value);
  return e;
}

HistoryEvent done(SimTime t, OpId op, OpKind kind, std::string value = {},
                  std::optional<Timestamp> ts = std::nullopt, std::uint32_t client = 0) {
  HistoryEvent e = inv(t, op, kind, std::move(value), client);
  e.phase = EventPhase::Complete;
  e.ts = ts;
  return e;
}

// Independent oracle: try every permutation of the completed ops, plus every
// subset of pending writes, checking real-time order and register semantics.
bool brute_force(const std::vector<HistoryEvent>& events, const std::string& initial) {
  struct Op {
    HistoryEvent in;
    std::optional<HistoryEvent> out;
  };
  std::map<OpId, Op> by_id;
  for (const auto& e : events) {
    if (e.phase == EventPhase::Invoke) {
      by_id[e.op].in = e;
    } else {
      by_id[e.op].out = e;
    }
  }
  std::vector<Op> required, optional;
  for (auto& [_, op] : by_id) {
    if (op.out && (op.out->status == OpStatus::Aborted || op.out->status == OpStatus::NotOperational))
      continue;
    if (!op.out && op.in.kind == OpKind::Read) continue;
    (op.out ? required : optional).push_back(op);
  }
  const std::size_t subsets = std::size_t{1} << optional.size();
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    std::vector<Op> chosen = required;
    for (std::size_t i = 0; i < optional.size(); ++i)
      if (mask >> i & 1) chosen.push_back(optional[i]);
    std::vector<std::size_t> perm(chosen.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    do {
      bool ok = true;
      for (std::size_t a = 0; a < perm.size() && ok; ++a)
        for (std::size_t b = a + 1; b < perm.size() && ok; ++b) {
          const auto& later = chosen[perm[a]];
          const auto& earlier = chosen[perm[b]];
          if (earlier.out && earlier.out->time < later.in.time) ok = false;
        }
      std::string state = initial;
      for (std::size_t i = 0; i < perm.size() && ok; ++i) {
        const auto& op = chosen[perm[i]];
        switch (op.in.kind) {
          case OpKind::Read:
            ok = op.out->value == state;
            break;
          case OpKind::Write:
            state = op.in.value;
            break;
          case OpKind::Rmw: {
            auto ev = evaluate_rmw(op.in.rmw, state);
            if (!op.out) {
              if (ev.applies) state = ev.new_value;
            } else if (op.out->status == OpStatus::CasFailed) {
              ok = op.out->value == state && !ev.applies;
            } else {
              ok = op.out->value == state && ev.applies;
              state = ev.new_value;
            }
          }
        }
      }
      if (ok) return true;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return false;
}

}  // namespace

TEST_CASE("history lines round-trip") {
  History h;
  h.initial_value = "00";
  h.events.push_back(inv(5, 1, OpKind::Write, "07", 2));
  h.events.push_back(done(9, 1, OpKind::Write, {}, Timestamp{2, 3}, 2));
  auto cas = inv(10, 2, OpKind::Rmw);
  cas.rmw = RmwSpec::compare_and_swap("07", "08");
  h.events.push_back(cas);
  auto cdone = done(14, 2, OpKind::Rmw, "07", Timestamp{3, 1});
  cdone.rmw.kind = RmwSpec::Kind::CompareAndSwap;
  h.events.push_back(cdone);
  auto faa = inv(20, 3, OpKind::Rmw);
  faa.rmw = RmwSpec::fetch_add(-4);
  h.events.push_back(faa);
  auto fail = done(22, 3, OpKind::Rmw, {}, std::nullopt);
  fail.rmw.kind = RmwSpec::Kind::FetchAdd;
  fail.status = OpStatus::Aborted;
  h.events.push_back(fail);

  CHECK(format_event(h.events[0]) == "5\t2\t1\t0\tinvoke\twrite\tvalue=3037;");
  CHECK(format_event(h.events[1]) == "9\t2\t1\t0\tcomplete\twrite\tstatus=ok;ts=2.3;");
  std::stringstream ss;
  write_history(ss, h);
  auto back = read_history(ss);
  CHECK(back.initial_value == "00");
  REQUIRE(back.events.size() == h.events.size());
  for (std::size_t i = 0; i < h.events.size(); ++i) CHECK(back.events[i] == h.events[i]);
}

TEST_CASE("malformed history lines are rejected with a line number") {
  std::stringstream ss("#initial\t30\n1\t0\t1\t0\tinvoke\tread\t-\n2\t0\t1\tzero\tcomplete\tread\t-\n");
  CHECK_THROWS_WITH_AS(read_history(ss), doctest::Contains("line 3"), HistoryFormatError);
  CHECK_THROWS_AS(parse_event("1\t0\t1\t0\tinvoke\tscan\t-"), HistoryFormatError);
  CHECK_THROWS_AS(parse_event("1\t0\t1\t0\tinvoke\twrite\tvalue=zz;"), HistoryFormatError);
}

TEST_CASE("concurrent writes 1 and 3 then reads of 3 linearize with w1 first") {
  std::vector<HistoryEvent> h = {
      inv(0, 1, OpKind::Write, "1", 1),       inv(0, 3, OpKind::Write, "3", 3),
      done(10, 3, OpKind::Write, {}, Timestamp{2, 3}, 3),
      done(30, 1, OpKind::Write, {}, Timestamp{2, 1}, 1),
      inv(40, 4, OpKind::Read, {}, 2),        done(41, 4, OpKind::Read, "3", Timestamp{2, 3}, 2),
  };
  auto v = check_key_history(h, "0");
  CHECK(v.linearizable);
  CHECK(v.via_fast_path);
  CHECK(v.witness == std::vector<OpId>{1, 3, 4});
  std::vector<OpId> w;
  CHECK(search_linearizable(h, "0", 1000, &w));
  CHECK(w.back() == 4);
}

TEST_CASE("sequential single-client history is linearizable") {
  std::vector<HistoryEvent> h = {
      inv(0, 1, OpKind::Write, "a"), done(1, 1, OpKind::Write, {}, Timestamp{2, 1}),
      inv(2, 2, OpKind::Read),       done(3, 2, OpKind::Read, "a", Timestamp{2, 1}),
      inv(4, 3, OpKind::Write, "b"), done(5, 3, OpKind::Write, {}, Timestamp{4, 1}),
      inv(6, 4, OpKind::Read),       done(7, 4, OpKind::Read, "b", Timestamp{4, 1}),
  };
  CHECK(check_key_history(h, "0").linearizable);
}

TEST_CASE("read of a write invoked after the read completed is a violation") {
  std::vector<HistoryEvent> h = {
      inv(0, 1, OpKind::Read, {}, 1), done(5, 1, OpKind::Read, "x", Timestamp{2, 2}, 1),
      inv(10, 2, OpKind::Write, "x", 2), done(15, 2, OpKind::Write, {}, Timestamp{2, 2}, 2),
  };
  auto v = check_key_history(h, "0");
  CHECK_FALSE(v.linearizable);
  REQUIRE(v.violating_prefix.size() == 2);
  CHECK(v.violating_prefix.back().op == 1);
  CHECK(v.violating_prefix.back().phase == EventPhase::Complete);
}

TEST_CASE("pending write may take effect or not") {
  std::vector<HistoryEvent> seen = {
      inv(0, 1, OpKind::Write, "p"),
      inv(5, 2, OpKind::Read), done(6, 2, OpKind::Read, "p"),
  };
  CHECK(check_key_history(seen, "0").linearizable);
  std::vector<HistoryEvent> unseen = {
      inv(0, 1, OpKind::Write, "p"),
      inv(5, 2, OpKind::Read), done(6, 2, OpKind::Read, "0"),
  };
  CHECK(check_key_history(unseen, "0").linearizable);
}

TEST_CASE("aborted RMW must not appear to take effect") {
  auto faa = inv(0, 1, OpKind::Rmw);
  faa.rmw = RmwSpec::fetch_add(5);
  auto abort = done(3, 1, OpKind::Rmw);
  abort.status = OpStatus::Aborted;
  std::vector<HistoryEvent> h = {faa, abort, inv(4, 2, OpKind::Read), done(5, 2, OpKind::Read, "5")};
  CHECK_FALSE(check_key_history(h, "0").linearizable);
  h[3].value = "0";
  CHECK(check_key_history(h, "0").linearizable);
}

TEST_CASE("shape errors are reported") {
  CHECK_THROWS_AS(check_key_history({done(1, 1, OpKind::Read, "0")}, "0"), HistoryShapeError);
  CHECK_THROWS_AS(check_key_history({inv(0, 1, OpKind::Read), inv(1, 1, OpKind::Read)}, "0"),
                  HistoryShapeError);
}

TEST_CASE("search budget is reported distinctly") {
  std::vector<HistoryEvent> h;
  for (OpId i = 1; i <= 12; ++i) h.push_back(inv(0, i, OpKind::Write, std::to_string(i)));
  for (OpId i = 1; i <= 12; ++i) h.push_back(done(100, i, OpKind::Write));
  h.push_back(inv(200, 99, OpKind::Read));
  h.push_back(done(201, 99, OpKind::Read, "nope"));
  CHECK_THROWS_AS(search_linearizable(h, "0", 50), SearchBudgetExceeded);
}

TEST_CASE("mutation suite: every mutant is flagged") {
  auto mutants = mutation_suite(11);
  CHECK(mutants.size() >= 20);
  for (const auto& m : mutants) {
    CAPTURE(m.name);
    auto report = check_history(m.history);
    CHECK_FALSE(report.linearizable);
  }
}

TEST_CASE("search agrees with brute force on small random histories") {
  RandomHistoryParams p;
  p.ops = 5;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    auto h = random_register_history(seed, p);
    if (seed % 2) h = perturb_read(h, seed);
    CAPTURE(seed);
    CHECK(search_linearizable(h.events, h.initial_value, 1'000'000) ==
          brute_force(h.events, h.initial_value));
  }
}

TEST_CASE("fast path never accepts what the search rejects") {
  int fast = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    auto h = random_register_history(seed);
    if (seed % 3 == 0) h = perturb_read(h, seed);
    const bool full = search_linearizable(h.events, h.initial_value, 1'000'000);
    if (seed % 3 != 0) CHECK(full);
    if (fast_path(h.events, h.initial_value) == FastPathResult::Linearizable) {
      ++fast;
      CHECK(full);
    }
  }
  CHECK(fast > 1000);
}
