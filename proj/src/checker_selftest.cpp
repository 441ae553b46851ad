#include "hermes/checker_selftest.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace hermes {

namespace {

struct PlannedOp {
  std::uint32_t client = 0;
  OpId id = 0;
  OpKind kind = OpKind::Read;
  std::string write_value;
  RmwSpec rmw;
  SimTime invoked = 0;
  SimTime responded = 0;
  SimTime lin = 0;
  bool pending = false;
  bool aborted = false;
  bool applies_if_pending = false;
  // Filled in by execution.
  OpStatus status = OpStatus::Ok;
  std::string result;
  Timestamp ts;
};

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

// Executes ops atomically in (lin, index) order.
void execute(std::vector<PlannedOp>& ops, const std::string& initial) {
  std::vector<std::size_t> order(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) order[i] = i;
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return ops[a].lin < ops[b].lin; });
  std::string state = initial;
  Timestamp ts{};
  for (auto i : order) {
    auto& op = ops[i];
    if (op.aborted) {
      op.status = OpStatus::Aborted;
      continue;
    }
    if (op.pending && !op.applies_if_pending) continue;
    switch (op.kind) {
      case OpKind::Read:
        op.result = state;
        op.ts = ts;
        break;
      case OpKind::Write:
        ts = {ts.version + 2, op.client + 1};
        state = op.write_value;
        op.ts = ts;
        break;
      case OpKind::Rmw: {
        auto eval = evaluate_rmw(op.rmw, state);
        if (!eval.applies) {
          op.status = OpStatus::CasFailed;
          op.result = state;
          op.ts = ts;
          break;
        }
        op.result = state;
        ts = {ts.version + 1, op.client + 1};
        state = eval.new_value;
        op.ts = ts;
        break;
      }
    }
  }
}

std::vector<HistoryEvent> to_events(const std::vector<PlannedOp>& ops) {
  std::vector<HistoryEvent> events;
  for (const auto& op : ops) {
    HistoryEvent inv;
    inv.time = op.invoked;
    inv.client = op.client;
    inv.op = op.id;
    inv.phase = EventPhase::Invoke;
    inv.kind = op.kind;
    inv.value = op.write_value;
    inv.rmw = op.rmw;
    events.push_back(inv);
    if (op.pending) continue;
    HistoryEvent done = inv;
    done.time = op.responded;
    done.phase = EventPhase::Complete;
    done.value = op.result;
    done.rmw = {};
    done.status = op.status;
    if (op.status != OpStatus::Aborted) done.ts = op.ts;
    events.push_back(done);
  }
  std::ranges::stable_sort(events, {}, &HistoryEvent::time);
  return events;
}

PlannedOp random_op(std::mt19937_64& rng, std::size_t width, const std::string& hint) {
  PlannedOp op;
  switch (below(rng, 5)) {
    case 0:
    case 1:
      op.kind = OpKind::Read;
      break;
    case 2:
    case 3:
      op.kind = OpKind::Write;
      op.write_value = format_numeric(static_cast<std::int64_t>(below(rng, 100)), width);
      break;
    default:
      op.kind = OpKind::Rmw;
      if (below(rng, 2) == 0) {
        op.rmw = RmwSpec::fetch_add(1 + static_cast<std::int64_t>(below(rng, 3)));
      } else {
        auto expected = below(rng, 2) == 0
                            ? hint
                            : format_numeric(static_cast<std::int64_t>(below(rng, 100)), width);
        op.rmw = RmwSpec::compare_and_swap(
            expected, format_numeric(static_cast<std::int64_t>(below(rng, 100)), width));
      }
  }
  return op;
}

// Sequential history: op i occupies [10 i, 10 i + 5].
std::vector<PlannedOp> sequential_base(std::mt19937_64& rng, const std::string& initial) {
  std::vector<OpKind> shape = {OpKind::Write, OpKind::Read, OpKind::Write, OpKind::Read,
                               OpKind::Read};
  std::vector<PlannedOp> ops;
  std::int64_t next_value = 100;
  for (int i = 0; i < 13; ++i) {
    PlannedOp op;
    OpKind kind = i < static_cast<int>(shape.size()) ? shape[i]
                  : i == 12                          ? OpKind::Read
                                                     : static_cast<OpKind>(below(rng, 3));
    op.kind = kind;
    if (kind == OpKind::Write) op.write_value = format_numeric(next_value++, 3);
    if (kind == OpKind::Rmw) op.rmw = RmwSpec::fetch_add(1000);
    ops.push_back(op);
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    ops[i].client = static_cast<std::uint32_t>(i % 3);
    ops[i].id = i + 1;
    ops[i].invoked = static_cast<SimTime>(10 * i);
    ops[i].responded = ops[i].invoked + 5;
    ops[i].lin = ops[i].invoked + 2;
  }
  execute(ops, initial);
  return ops;
}

// Independent check used to certify mutants: in a history without overlap the
// only candidate order is invocation order.
bool sequential_replay_ok(std::vector<HistoryEvent> events, const std::string& initial) {
  std::map<OpId, std::pair<HistoryEvent, HistoryEvent>> ops;
  for (const auto& ev : events) {
    if (ev.phase == EventPhase::Invoke) {
      ops[ev.op].first = ev;
    } else {
      ops[ev.op].second = ev;
    }
  }
  std::vector<std::pair<HistoryEvent, HistoryEvent>> seq;
  for (auto& [_, p] : ops) seq.push_back(p);
  std::ranges::sort(seq, [](const auto& a, const auto& b) { return a.first.time < b.first.time; });
  std::string state = initial;
  SimTime last_response = -1;
  for (const auto& [inv, done] : seq) {
    if (inv.time <= last_response) return false;
    last_response = done.time;
    switch (inv.kind) {
      case OpKind::Read:
        if (done.value != state) return false;
        break;
      case OpKind::Write:
        state = inv.value;
        break;
      case OpKind::Rmw: {
        if (done.value != state) return false;
        auto eval = evaluate_rmw(inv.rmw, state);
        if (done.status == OpStatus::CasFailed) {
          if (eval.applies) return false;
        } else {
          if (!eval.applies) return false;
          state = eval.new_value;
        }
      }
    }
  }
  return true;
}

HistoryEvent* find_complete(std::vector<HistoryEvent>& events, OpId op) {
  for (auto& ev : events)
    if (ev.op == op && ev.phase == EventPhase::Complete) return &ev;
  return nullptr;
}

HistoryEvent* find_invoke(std::vector<HistoryEvent>& events, OpId op) {
  for (auto& ev : events)
    if (ev.op == op && ev.phase == EventPhase::Invoke) return &ev;
  return nullptr;
}

void append_op(std::vector<HistoryEvent>& events, OpId id, SimTime at, OpKind kind, RmwSpec rmw,
               OpStatus status, std::string observed) {
  HistoryEvent inv;
  inv.time = at;
  inv.op = id;
  inv.kind = kind;
  inv.rmw = rmw;
  HistoryEvent done = inv;
  done.time = at + 5;
  done.phase = EventPhase::Complete;
  done.rmw = {};
  done.value = std::move(observed);
  done.status = status;
  events.push_back(inv);
  events.push_back(done);
}

}  // namespace

History random_register_history(std::uint64_t seed, const RandomHistoryParams& params) {
  std::mt19937_64 rng(seed);
  History h;
  h.initial_value = format_numeric(0, params.width);
  std::vector<PlannedOp> ops;
  std::vector<SimTime> clock(params.clients);
  for (auto& c : clock) c = static_cast<SimTime>(below(rng, 6));
  std::vector<bool> stopped(params.clients, false);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (std::uint32_t i = 0; i < params.ops; ++i) {
    auto c = static_cast<std::uint32_t>(below(rng, params.clients));
    if (stopped[c]) continue;
    auto op = random_op(rng, params.width, h.initial_value);
    op.client = c;
    op.id = i + 1;
    op.invoked = clock[c];
    op.responded = op.invoked + 1 + static_cast<SimTime>(below(rng, 20));
    op.lin = op.invoked + static_cast<SimTime>(below(rng, static_cast<std::uint64_t>(op.responded - op.invoked + 1)));
    if (unit() < params.pending_probability) {
      op.pending = true;
      op.applies_if_pending = below(rng, 2) == 0;
      stopped[c] = true;
    } else if (op.kind == OpKind::Rmw && unit() < params.abort_probability) {
      op.aborted = true;
    }
    clock[c] = op.responded + 1 + static_cast<SimTime>(below(rng, 5));
    ops.push_back(op);
  }
  execute(ops, h.initial_value);
  h.events = to_events(ops);
  return h;
}

History perturb_read(const History& history, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  History h = history;
  std::vector<std::string> values{h.initial_value};
  std::vector<std::size_t> reads;
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    const auto& ev = h.events[i];
    if (ev.phase == EventPhase::Invoke && ev.kind == OpKind::Write) values.push_back(ev.value);
    if (ev.phase == EventPhase::Complete && ev.kind == OpKind::Read) reads.push_back(i);
  }
  if (reads.empty()) return h;
  auto& ev = h.events[reads[below(rng, reads.size())]];
  std::vector<std::string> others;
  for (const auto& v : values)
    if (v != ev.value) others.push_back(v);
  if (!others.empty()) ev.value = others[below(rng, others.size())];
  return h;
}

std::vector<Mutant> mutation_suite(std::uint64_t seed) {
  std::vector<Mutant> out;
  const std::string initial = "000";
  for (int round = 0; round < 3; ++round) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(round));
    auto ops = sequential_base(rng, initial);
    const auto base = to_events(ops);
    std::vector<std::size_t> reads, writes;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      if (ops[i].kind == OpKind::Read) reads.push_back(i);
      if (ops[i].kind == OpKind::Write) writes.push_back(i);
    }
    const std::string tag = "#" + std::to_string(round);
    auto emit = [&](const std::string& name, std::vector<HistoryEvent> events) {
      if (sequential_replay_ok(events, initial)) return false;
      out.push_back({name + tag, History{initial, std::move(events)}});
      return true;
    };

    // A read returns a value nobody wrote.
    {
      auto ev = base;
      find_complete(ev, ops[reads[below(rng, reads.size())]].id)->value = "999";
      emit("corrupt-read", ev);
    }
    // A read returns a value that had already been overwritten.
    for (auto r : reads) {
      auto ev = base;
      bool done = false;
      for (auto w : writes) {
        if (w + 1 >= r) break;
        find_complete(ev, ops[r].id)->value = ops[w].write_value;
        if (emit("stale-read", ev)) {
          done = true;
          break;
        }
      }
      if (done) break;
    }
    // A read returns the value of a write invoked after the read completed.
    for (auto r : reads) {
      bool done = false;
      for (auto w : writes) {
        if (w <= r) continue;
        auto ev = base;
        find_complete(ev, ops[r].id)->value = ops[w].write_value;
        if (emit("future-read", ev)) {
          done = true;
          break;
        }
      }
      if (done) break;
    }
    // Two completions with different results trade places.
    for (std::size_t a = 0; a < reads.size(); ++a) {
      bool done = false;
      for (std::size_t b = a + 1; b < reads.size(); ++b) {
        if (ops[reads[a]].result == ops[reads[b]].result) continue;
        auto ev = base;
        std::swap(find_complete(ev, ops[reads[a]].id)->value,
                  find_complete(ev, ops[reads[b]].id)->value);
        if (emit("swap-completions", ev)) {
          done = true;
          break;
        }
      }
      if (done) break;
    }
    // A read that observed a write is moved before the write's invocation.
    for (auto r : reads) {
      if (r == 0 || ops[r - 1].kind != OpKind::Write) continue;
      auto ev = base;
      const SimTime w_inv = ops[r - 1].invoked;
      find_invoke(ev, ops[r].id)->time = w_inv - 4;
      find_complete(ev, ops[r].id)->time = w_inv - 2;
      if (emit("reorder-realtime-pair", ev)) break;
    }
    // Two sequential CAS ops both succeed from the same expected value.
    {
      auto ev = base;
      const std::string now = ops.back().result;
      const SimTime t = ops.back().responded + 5;
      append_op(ev, 100, t, OpKind::Rmw, RmwSpec::compare_and_swap(now, "777"), OpStatus::Ok, now);
      append_op(ev, 101, t + 10, OpKind::Rmw, RmwSpec::compare_and_swap(now, "778"), OpStatus::Ok,
                now);
      emit("double-cas-winner", ev);
    }
    // Two sequential fetch-adds observe the same value.
    {
      auto ev = base;
      const std::string now = ops.back().result;
      const SimTime t = ops.back().responded + 5;
      append_op(ev, 100, t, OpKind::Rmw, RmwSpec::fetch_add(1), OpStatus::Ok, now);
      append_op(ev, 101, t + 10, OpKind::Rmw, RmwSpec::fetch_add(1), OpStatus::Ok, now);
      emit("double-faa", ev);
    }
    // A CAS reports failure although its expectation held.
    {
      auto ev = base;
      const std::string now = ops.back().result;
      append_op(ev, 100, ops.back().responded + 5, OpKind::Rmw, RmwSpec::compare_and_swap(now, "555"),
                OpStatus::CasFailed, now);
      emit("cas-failed-lie", ev);
    }
  }
  return out;
}

}  // namespace hermes
