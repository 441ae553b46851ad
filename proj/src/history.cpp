#include "hermes/history.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "hermes/message.hpp"

namespace hermes {

namespace {

std::string hex(const std::string& s) { return to_hex(std::string_view(s)); }

std::string unhex(std::string_view h) {
  auto bytes = from_hex(h);
  return std::string(bytes.begin(), bytes.end());
}

const char* kind_name(const HistoryEvent& ev) {
  switch (ev.kind) {
    case OpKind::Read: return "read";
    case OpKind::Write: return "write";
    case OpKind::Rmw:
      return ev.rmw.kind == RmwSpec::Kind::FetchAdd ? "faa" : "cas";
  }
  return "?";
}

template <typename T>
T parse_int(std::string_view s, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw HistoryFormatError(std::string("bad ") + what + ": '" + std::string(s) + "'");
  return v;
}

OpStatus parse_status(std::string_view s) {
  for (auto st : {OpStatus::Ok, OpStatus::Aborted, OpStatus::CasFailed, OpStatus::NotOperational})
    if (s == to_string(st)) return st;
  throw HistoryFormatError("bad status: '" + std::string(s) + "'");
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string format_event(const HistoryEvent& ev) {
  std::ostringstream args;
  if (ev.phase == EventPhase::Invoke) {
    if (ev.kind == OpKind::Write) args << "value=" << hex(ev.value) << ';';
    if (ev.kind == OpKind::Rmw) {
      if (ev.rmw.kind == RmwSpec::Kind::FetchAdd) {
        args << "delta=" << ev.rmw.delta << ';';
      } else {
        args << "expected=" << hex(ev.rmw.expected) << ";desired=" << hex(ev.rmw.desired) << ';';
      }
    }
  } else {
    args << "status=" << to_string(ev.status) << ';';
    if (!ev.value.empty()) args << "value=" << hex(ev.value) << ';';
    if (ev.ts) args << "ts=" << ev.ts->version << '.' << ev.ts->cid << ';';
  }
  std::string a = args.str();
  std::ostringstream line;
  line << ev.time << '\t' << ev.client << '\t' << ev.op << '\t' << ev.key << '\t'
       << (ev.phase == EventPhase::Invoke ? "invoke" : "complete") << '\t' << kind_name(ev) << '\t'
       << (a.empty() ? "-" : a);
  return line.str();
}

HistoryEvent parse_event(const std::string& line) {
  auto f = split(line, '\t');
  if (f.size() != 7) throw HistoryFormatError("expected 7 fields: '" + line + "'");
  HistoryEvent ev;
  ev.time = parse_int<SimTime>(f[0], "time");
  ev.client = parse_int<std::uint32_t>(f[1], "client");
  ev.op = parse_int<OpId>(f[2], "op id");
  ev.key = parse_int<KeyId>(f[3], "key");
  if (f[4] == "invoke") {
    ev.phase = EventPhase::Invoke;
  } else if (f[4] == "complete") {
    ev.phase = EventPhase::Complete;
  } else {
    throw HistoryFormatError("bad phase: '" + std::string(f[4]) + "'");
  }
  if (f[5] == "read") {
    ev.kind = OpKind::Read;
  } else if (f[5] == "write") {
    ev.kind = OpKind::Write;
  } else if (f[5] == "cas") {
    ev.kind = OpKind::Rmw;
    ev.rmw.kind = RmwSpec::Kind::CompareAndSwap;
  } else if (f[5] == "faa") {
    ev.kind = OpKind::Rmw;
    ev.rmw.kind = RmwSpec::Kind::FetchAdd;
  } else {
    throw HistoryFormatError("bad op kind: '" + std::string(f[5]) + "'");
  }
  if (f[6] == "-") return ev;
  for (auto pair : split(f[6], ';')) {
    if (pair.empty()) continue;
    auto eq = pair.find('=');
    if (eq == std::string_view::npos) throw HistoryFormatError("bad argument: '" + std::string(pair) + "'");
    auto name = pair.substr(0, eq);
    auto val = pair.substr(eq + 1);
    try {
      if (name == "value") {
        ev.value = unhex(val);
      } else if (name == "expected") {
        ev.rmw.expected = unhex(val);
      } else if (name == "desired") {
        ev.rmw.desired = unhex(val);
      } else if (name == "delta") {
        ev.rmw.delta = parse_int<std::int64_t>(val, "delta");
      } else if (name == "status") {
        ev.status = parse_status(val);
      } else if (name == "ts") {
        auto dot = val.find('.');
        if (dot == std::string_view::npos) throw HistoryFormatError("bad ts");
        ev.ts = Timestamp{parse_int<std::uint32_t>(val.substr(0, dot), "ts"),
                          parse_int<std::uint32_t>(val.substr(dot + 1), "ts")};
      } else {
        throw HistoryFormatError("unknown argument '" + std::string(name) + "'");
      }
    } catch (const DecodeError&) {
      throw HistoryFormatError(std::string("bad hex in '") + std::string(pair) + "'");
    }
  }
  return ev;
}

void write_history(std::ostream& out, const History& history) {
  out << "#initial\t" << hex(history.initial_value) << '\n';
  for (const auto& ev : history.events) out << format_event(ev) << '\n';
}

History read_history(std::istream& in) {
  History h;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#initial\t", 0) == 0) {
      h.initial_value = unhex(std::string_view(line).substr(9));
      continue;
    }
    if (line[0] == '#') continue;
    try {
      h.events.push_back(parse_event(line));
    } catch (const HistoryFormatError& e) {
      throw HistoryFormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return h;
}

std::map<KeyId, std::vector<HistoryEvent>> split_by_key(const std::vector<HistoryEvent>& events) {
  std::map<KeyId, std::vector<HistoryEvent>> out;
  for (const auto& ev : events) out[ev.key].push_back(ev);
  return out;
}

}  // namespace hermes
