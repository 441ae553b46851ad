#include "hermes/linearizability.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace hermes {

namespace {

struct Op {
  OpId id = 0;
  OpKind kind = OpKind::Read;
  std::string write_value;
  RmwSpec rmw;
  bool completed = false;
  OpStatus status = OpStatus::Ok;
  std::string result;
  std::optional<Timestamp> ts;
  SimTime invoked = 0;
  SimTime responded = 0;
};

// Invokes sort ahead of completes at the same instant, so equal-time events
// count as overlapping.
std::vector<HistoryEvent> time_ordered(const std::vector<HistoryEvent>& events) {
  std::vector<HistoryEvent> out = events;
  std::ranges::stable_sort(out, [](const HistoryEvent& a, const HistoryEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.phase == EventPhase::Invoke && b.phase == EventPhase::Complete;
  });
  return out;
}

// Ops in invocation order. Ops that provably had no effect and constrain
// nothing (aborted, refused, pending reads) are left out.
std::vector<Op> collect_ops(const std::vector<HistoryEvent>& ordered) {
  std::vector<Op> ops;
  std::unordered_map<OpId, std::size_t> index;
  std::optional<KeyId> key;
  for (const auto& ev : ordered) {
    if (key && *key != ev.key) throw HistoryShapeError("history mixes keys");
    key = ev.key;
    if (ev.phase == EventPhase::Invoke) {
      if (index.contains(ev.op))
        throw HistoryShapeError("op " + std::to_string(ev.op) + " invoked twice");
      index[ev.op] = ops.size();
      Op op;
      op.id = ev.op;
      op.kind = ev.kind;
      op.write_value = ev.value;
      op.rmw = ev.rmw;
      op.invoked = ev.time;
      ops.push_back(std::move(op));
    } else {
      auto it = index.find(ev.op);
      if (it == index.end())
        throw HistoryShapeError("op " + std::to_string(ev.op) + " completed without an invoke");
      auto& op = ops[it->second];
      if (op.completed) throw HistoryShapeError("op " + std::to_string(ev.op) + " completed twice");
      if (op.kind != ev.kind) throw HistoryShapeError("op " + std::to_string(ev.op) + " changed kind");
      op.completed = true;
      op.status = ev.status;
      op.result = ev.value;
      op.ts = ev.ts;
      op.responded = ev.time;
    }
  }
  std::erase_if(ops, [](const Op& op) {
    if (!op.completed) return op.kind == OpKind::Read;
    return op.status == OpStatus::Aborted || op.status == OpStatus::NotOperational;
  });
  return ops;
}

// Applies `op` to `state` in place. Returns false if the op's observed
// result is impossible from `state`.
bool step(std::string& state, const Op& op) {
  switch (op.kind) {
    case OpKind::Read:
      return state == op.result;
    case OpKind::Write:
      state = op.write_value;
      return true;
    case OpKind::Rmw: {
      if (!op.completed) {
        auto eval = evaluate_rmw(op.rmw, state);
        if (eval.applies) state = std::move(eval.new_value);
        return true;
      }
      if (state != op.result) return false;
      auto eval = evaluate_rmw(op.rmw, state);
      if (op.status == OpStatus::CasFailed) return !eval.applies;
      if (!eval.applies) return false;
      state = std::move(eval.new_value);
      return true;
    }
  }
  return false;
}

bool writes(const Op& op) {
  return op.kind == OpKind::Write || (op.kind == OpKind::Rmw && op.status == OpStatus::Ok);
}

FastPathResult fast_path_ops(const std::vector<Op>& ops, const std::string& initial,
                             std::vector<OpId>* witness) {
  std::map<Timestamp, const Op*> writers;
  std::map<Timestamp, std::vector<const Op*>> readers;
  for (const auto& op : ops) {
    if (!op.completed) continue;  // dropped
    if (!op.ts) return FastPathResult::Inconclusive;
    if (writes(op)) {
      if (!writers.emplace(*op.ts, &op).second) return FastPathResult::Inconclusive;
    } else {
      readers[*op.ts].push_back(&op);
    }
  }
  std::vector<const Op*> order;
  std::set<Timestamp> stamps;
  for (const auto& [ts, _] : writers) stamps.insert(ts);
  for (const auto& [ts, _] : readers) stamps.insert(ts);
  for (const auto& ts : stamps) {
    if (auto w = writers.find(ts); w != writers.end()) {
      order.push_back(w->second);
    } else if (ts != Timestamp{}) {
      return FastPathResult::Inconclusive;  // value from a pending or unknown writer
    }
    if (auto r = readers.find(ts); r != readers.end()) {
      auto group = r->second;
      std::ranges::stable_sort(group, {}, &Op::invoked);
      order.insert(order.end(), group.begin(), group.end());
    }
  }

  std::string state = initial;
  SimTime latest_invoke = 0;
  bool first = true;
  for (const Op* op : order) {
    if (!first && op->responded < latest_invoke) return FastPathResult::Inconclusive;
    if (!step(state, *op)) return FastPathResult::Inconclusive;
    latest_invoke = first ? op->invoked : std::max(latest_invoke, op->invoked);
    first = false;
  }
  if (witness) {
    witness->clear();
    for (const Op* op : order) witness->push_back(op->id);
  }
  return FastPathResult::Linearizable;
}

// Just-in-time linearization over a doubly linked list of call/return
// entries, memoizing (linearized set, register state).
bool search_ops(const std::vector<HistoryEvent>& ordered, const std::vector<Op>& ops,
                const std::string& initial, std::uint64_t budget, std::vector<OpId>* witness,
                std::uint64_t* explored) {
  struct Entry {
    int op = -1;
    bool call = true;
    int match = -1;
    int prev = -1;
    int next = -1;
  };
  std::unordered_map<OpId, int> op_index;
  for (std::size_t i = 0; i < ops.size(); ++i) op_index[ops[i].id] = static_cast<int>(i);

  std::vector<Entry> entries(1);  // entries[0] is the head sentinel
  std::vector<int> call_of(ops.size(), -1);
  for (const auto& ev : ordered) {
    auto it = op_index.find(ev.op);
    if (it == op_index.end()) continue;
    const int idx = static_cast<int>(entries.size());
    Entry e;
    e.op = it->second;
    e.call = ev.phase == EventPhase::Invoke;
    if (e.call) {
      call_of[it->second] = idx;
    } else {
      e.match = call_of[it->second];
      entries[e.match].match = idx;
    }
    entries.push_back(e);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].prev = static_cast<int>(i) - 1;
    entries[i].next = i + 1 < entries.size() ? static_cast<int>(i) + 1 : -1;
  }
  auto unlink = [&](int i) {
    auto& e = entries[i];
    entries[e.prev].next = e.next;
    if (e.next >= 0) entries[e.next].prev = e.prev;
  };
  auto relink = [&](int i) {
    auto& e = entries[i];
    entries[e.prev].next = i;
    if (e.next >= 0) entries[e.next].prev = i;
  };
  auto lift = [&](int call) {
    unlink(call);
    if (entries[call].match >= 0) unlink(entries[call].match);
  };
  auto unlift = [&](int call) {
    if (entries[call].match >= 0) relink(entries[call].match);
    relink(call);
  };

  std::size_t remaining = 0;
  for (const auto& op : ops)
    if (op.completed) ++remaining;

  std::vector<std::uint64_t> linearized((ops.size() + 63) / 64, 0);
  auto flip = [&](int op) { linearized[op / 64] ^= std::uint64_t{1} << (op % 64); };
  auto memo_key = [&](const std::string& state) {
    std::string k(reinterpret_cast<const char*>(linearized.data()), linearized.size() * 8);
    k += state;
    return k;
  };

  std::unordered_set<std::string> seen;
  std::vector<std::pair<int, std::string>> stack;
  std::string state = initial;
  std::uint64_t steps = 0;
  int entry = entries[0].next;

  while (remaining > 0) {
    if (++steps > budget) {
      if (explored) *explored = steps;
      throw SearchBudgetExceeded("linearizability search exceeded " + std::to_string(budget) +
                                 " steps");
    }
    if (entry < 0) break;  // unreachable while completed ops remain
    const auto& e = entries[entry];
    if (e.call) {
      std::string next_state = state;
      if (step(next_state, ops[e.op])) {
        flip(e.op);
        if (seen.insert(memo_key(next_state)).second) {
          stack.emplace_back(entry, std::move(state));
          state = std::move(next_state);
          lift(entry);
          if (ops[e.op].completed) --remaining;
          entry = entries[0].next;
          continue;
        }
        flip(e.op);
      }
      entry = e.next;
    } else {
      if (stack.empty()) {
        if (explored) *explored = steps;
        return false;
      }
      auto [call, old_state] = std::move(stack.back());
      stack.pop_back();
      state = std::move(old_state);
      flip(entries[call].op);
      unlift(call);
      if (ops[entries[call].op].completed) ++remaining;
      entry = entries[call].next;
    }
  }
  if (explored) *explored = steps;
  if (witness) {
    witness->clear();
    for (const auto& [call, _] : stack) witness->push_back(ops[entries[call].op].id);
  }
  return true;
}

}  // namespace

FastPathResult fast_path(const std::vector<HistoryEvent>& events, const std::string& initial,
                         std::vector<OpId>* witness) {
  return fast_path_ops(collect_ops(time_ordered(events)), initial, witness);
}

bool search_linearizable(const std::vector<HistoryEvent>& events, const std::string& initial,
                         std::uint64_t budget, std::vector<OpId>* witness,
                         std::uint64_t* explored) {
  auto ordered = time_ordered(events);
  return search_ops(ordered, collect_ops(ordered), initial, budget, witness, explored);
}

Verdict check_key_history(const std::vector<HistoryEvent>& events, const std::string& initial,
                          const CheckOptions& options) {
  Verdict v;
  auto ordered = time_ordered(events);
  auto ops = collect_ops(ordered);
  if (options.use_fast_path &&
      fast_path_ops(ops, initial, &v.witness) == FastPathResult::Linearizable) {
    v.linearizable = true;
    v.via_fast_path = true;
    return v;
  }
  v.linearizable = search_ops(ordered, ops, initial, options.budget, &v.witness, &v.explored);
  if (v.linearizable || !options.minimize) return v;

  v.witness.clear();
  // Non-linearizability is preserved by extension, so the shortest failing
  // prefix can be found by bisection.
  std::size_t lo = 1, hi = ordered.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    std::vector<HistoryEvent> prefix(ordered.begin(), ordered.begin() + static_cast<long>(mid));
    if (search_ops(prefix, collect_ops(prefix), initial, options.budget, nullptr, nullptr)) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  v.violating_prefix.assign(ordered.begin(), ordered.begin() + static_cast<long>(lo));
  return v;
}

HistoryReport check_history(const History& history, const CheckOptions& options) {
  HistoryReport report;
  for (const auto& [key, events] : split_by_key(history.events)) {
    auto verdict = check_key_history(events, history.initial_value, options);
    ++report.keys_checked;
    if (verdict.via_fast_path) ++report.fast_path_keys;
    if (!verdict.linearizable) {
      report.linearizable = false;
      report.failures.emplace(key, std::move(verdict));
    }
  }
  return report;
}

}  // namespace hermes
