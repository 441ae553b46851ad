#include "hermes/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <set>
#include <sstream>

namespace hermes {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T number(const std::string& field, const std::string& text) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw ScenarioError(field, "expected a number, got '" + text + "'");
  return v;
}

bool boolean(const std::string& field, const std::string& text) {
  if (text == "true" || text == "on" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "off" || text == "0" || text == "no") return false;
  throw ScenarioError(field, "expected a boolean, got '" + text + "'");
}

SimTime duration(const std::string& field, const std::string& text) {
  try {
    return parse_duration(text);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(field, e.what());
  }
}

// NODE@TIME
std::pair<NodeId, SimTime> at_spec(const std::string& field, const std::string& text) {
  auto at = text.find('@');
  if (at == std::string::npos) throw ScenarioError(field, "expected NODE@TIME");
  return {number<NodeId>(field, trim(text.substr(0, at))), duration(field, trim(text.substr(at + 1)))};
}

MsgKind kind_named(const std::string& field, const std::string& name) {
  for (auto k : {MsgKind::Inv, MsgKind::Ack, MsgKind::Val, MsgKind::CraqWrite, MsgKind::CraqAck,
                 MsgKind::CraqQuery, MsgKind::CraqReply, MsgKind::ChunkRequest,
                 MsgKind::ChunkReply}) {
    if (name == to_string(k)) return k;
  }
  throw ScenarioError(field, "unknown message kind '" + name + "'");
}

}  // namespace

SimTime parse_duration(const std::string& text) {
  const std::string t = trim(text);
  std::size_t digits = 0;
  while (digits < t.size() && (std::isdigit(static_cast<unsigned char>(t[digits])) || t[digits] == '.'))
    ++digits;
  if (digits == 0) throw std::invalid_argument("bad duration '" + text + "'");
  double value = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + digits, value);
  if (ec != std::errc{} || p != t.data() + digits)
    throw std::invalid_argument("bad duration '" + text + "'");
  const std::string unit = t.substr(digits);
  double scale = 1;
  if (unit.empty() || unit == "ns") {
    scale = 1;
  } else if (unit == "us") {
    scale = static_cast<double>(kMicrosecond);
  } else if (unit == "ms") {
    scale = static_cast<double>(kMillisecond);
  } else if (unit == "s") {
    scale = static_cast<double>(kSecond);
  } else {
    throw std::invalid_argument("bad duration unit '" + unit + "'");
  }
  return static_cast<SimTime>(std::llround(value * scale));
}

const char* to_string(ProtocolKind p) { return p == ProtocolKind::Hermes ? "hermes" : "craq"; }

const char* to_string(KeyDistribution d) {
  return d == KeyDistribution::Uniform ? "uniform" : "zipfian";
}

void apply_setting(Scenario& s, const std::string& name, const std::string& value) {
  auto dot = name.find('.');
  const std::string section = dot == std::string::npos ? "scenario" : name.substr(0, dot);
  const std::string key = dot == std::string::npos ? name : name.substr(dot + 1);
  const std::string field = section + "." + key;
  auto& w = s.workload;

  if (section == "scenario") {
    if (key == "id") {
      s.id = value;
    } else if (key == "protocol") {
      if (value == "hermes") {
        s.protocol = ProtocolKind::Hermes;
      } else if (value == "craq") {
        s.protocol = ProtocolKind::Craq;
      } else {
        throw ScenarioError(field, "expected hermes or craq");
      }
    } else if (key == "nodes") {
      s.nodes = number<std::uint32_t>(field, value);
    } else if (key == "keys") {
      w.keys = number<std::uint32_t>(field, value);
    } else if (key == "value_size") {
      w.value_size = number<std::size_t>(field, value);
    } else if (key == "write_ratio") {
      w.write_ratio = number<double>(field, value);
    } else if (key == "rmw_ratio") {
      w.rmw_ratio = number<double>(field, value);
    } else if (key == "distribution") {
      if (value == "uniform") {
        w.distribution = KeyDistribution::Uniform;
      } else if (value == "zipfian") {
        w.distribution = KeyDistribution::Zipfian;
      } else {
        throw ScenarioError(field, "expected uniform or zipfian");
      }
    } else if (key == "zipf_exponent") {
      w.zipf_exponent = number<double>(field, value);
    } else if (key == "duration") {
      s.duration = duration(field, value);
    } else if (key == "drain") {
      s.drain = duration(field, value);
    } else if (key == "seed") {
      s.seed = number<std::uint64_t>(field, value);
    } else if (key == "clients_per_node") {
      s.clients_per_node = number<std::uint32_t>(field, value);
    } else if (key == "think_time") {
      s.think_time = duration(field, value);
    } else if (key == "retry_backoff") {
      s.retry_backoff = duration(field, value);
    } else if (key == "series_interval") {
      s.series_interval = duration(field, value);
    } else {
      throw ScenarioError(field, "unknown setting");
    }
  } else if (section == "link") {
    if (key == "base_delay") {
      s.link.base_delay = duration(field, value);
    } else if (key == "jitter") {
      s.link.jitter_fraction = number<double>(field, value);
    } else if (key == "drop") {
      s.link.drop_probability = number<double>(field, value);
    } else if (key == "duplicate") {
      s.link.duplicate_probability = number<double>(field, value);
    } else {
      throw ScenarioError(field, "unknown setting");
    }
  } else if (section == "protocol") {
    auto& p = s.protocol_config;
    if (key == "o1") {
      p.skip_trans_val = boolean(field, value);
    } else if (key == "o2") {
      p.virtual_ids = boolean(field, value);
    } else if (key == "o3") {
      p.broadcast_acks = boolean(field, value);
    } else if (key == "mlt") {
      p.mlt = duration(field, value);
    } else if (key == "sync_chunk") {
      p.sync_chunk_size = number<std::size_t>(field, value);
    } else if (key == "virtual_ids") {
      // node:id,id;node:id,id
      s.virtual_ids.assign(s.nodes, {});
      for (const auto& entry : split(value, ';')) {
        if (entry.empty()) continue;
        auto colon = entry.find(':');
        if (colon == std::string::npos) throw ScenarioError(field, "expected NODE:ID,ID");
        auto node = number<std::uint32_t>(field, trim(entry.substr(0, colon)));
        if (node == 0 || node > s.nodes) throw ScenarioError(field, "node out of range");
        for (const auto& id : split(entry.substr(colon + 1), ','))
          s.virtual_ids[node - 1].push_back(number<std::uint32_t>(field, id));
      }
    } else {
      throw ScenarioError(field, "unknown setting");
    }
  } else if (section == "membership") {
    auto& m = s.membership;
    if (key == "lease") {
      m.lease = duration(field, value);
    } else if (key == "detector_interval") {
      m.detector_interval = duration(field, value);
    } else if (key == "miss_threshold") {
      m.miss_threshold = number<std::uint32_t>(field, value);
    } else if (key == "mupdate_stagger") {
      m.mupdate_stagger = duration(field, value);
    } else if (key == "heartbeats") {
      s.heartbeats = boolean(field, value);
    } else {
      throw ScenarioError(field, "unknown setting");
    }
  } else if (section == "faults") {
    if (key == "crash") {
      auto [node, at] = at_spec(field, value);
      s.faults.push_back(sim::CrashFault{node, at});
    } else if (key == "suspect") {
      auto [node, at] = at_spec(field, value);
      s.suspicions.push_back({node, at});
    } else if (key == "partition") {
      // 1,2,3|4,5@START-END
      auto at = value.find('@');
      if (at == std::string::npos) throw ScenarioError(field, "expected GROUPS@START-END");
      sim::PartitionFault p;
      for (const auto& group : split(value.substr(0, at), '|')) {
        std::vector<NodeId> members;
        for (const auto& n : split(group, ',')) members.push_back(number<NodeId>(field, n));
        p.groups.push_back(std::move(members));
      }
      auto window = value.substr(at + 1);
      auto dash = window.find('-');
      p.start = duration(field, trim(window.substr(0, dash)));
      p.end = dash == std::string::npos ? kTimeNever : duration(field, trim(window.substr(dash + 1)));
      s.faults.push_back(p);
    } else if (key == "drop_next") {
      // kind=VAL,src=1,dst=2,key=0,count=1
      sim::DropNextFault d;
      for (const auto& part : split(value, ',')) {
        auto eq = part.find('=');
        if (eq == std::string::npos) throw ScenarioError(field, "expected name=value pairs");
        auto n = trim(part.substr(0, eq));
        auto v = trim(part.substr(eq + 1));
        if (n == "kind") {
          d.filter.kind = kind_named(field, v);
        } else if (n == "src") {
          d.filter.src = number<NodeId>(field, v);
        } else if (n == "dst") {
          d.filter.dst = number<NodeId>(field, v);
        } else if (n == "key") {
          d.filter.key = number<KeyId>(field, v);
        } else if (n == "count") {
          d.count = number<std::uint32_t>(field, v);
        } else {
          throw ScenarioError(field, "unknown filter '" + n + "'");
        }
      }
      s.faults.push_back(d);
    } else {
      throw ScenarioError(field, "unknown fault kind");
    }
  } else {
    throw ScenarioError(field, "unknown section");
  }
}

Scenario parse_scenario(std::istream& in) {
  Scenario s;
  std::string section = "scenario";
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ScenarioError("line " + std::to_string(lineno), "unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ScenarioError("line " + std::to_string(lineno), "expected key = value");
    apply_setting(s, section + "." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  s.validate();
  return s;
}

Scenario parse_scenario_text(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

void Scenario::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (nodes == 0) throw ScenarioError("scenario.nodes", "must be at least 1");
  if (workload.keys == 0) throw ScenarioError("scenario.keys", "must be at least 1");
  if (workload.value_size == 0) throw ScenarioError("scenario.value_size", "must be at least 1");
  if (!unit(workload.write_ratio)) throw ScenarioError("scenario.write_ratio", "must be in [0,1]");
  if (!unit(workload.rmw_ratio)) throw ScenarioError("scenario.rmw_ratio", "must be in [0,1]");
  if (workload.write_ratio + workload.rmw_ratio > 1.0)
    throw ScenarioError("scenario.rmw_ratio", "write_ratio + rmw_ratio exceeds 1");
  if (workload.distribution == KeyDistribution::Zipfian &&
      (!(workload.zipf_exponent > 0) || workload.zipf_exponent == 1.0))
    throw ScenarioError("scenario.zipf_exponent", "must be > 0 and != 1");
  if (duration <= 0) throw ScenarioError("scenario.duration", "must be positive");
  if (clients_per_node == 0) throw ScenarioError("scenario.clients_per_node", "must be at least 1");
  if (series_interval <= 0) throw ScenarioError("scenario.series_interval", "must be positive");
  if (!unit(link.drop_probability)) throw ScenarioError("link.drop", "must be in [0,1]");
  if (!unit(link.duplicate_probability)) throw ScenarioError("link.duplicate", "must be in [0,1]");
  if (link.jitter_fraction < 0) throw ScenarioError("link.jitter", "must be non-negative");
  if (link.base_delay < 0) throw ScenarioError("link.base_delay", "must be non-negative");
  if (protocol_config.mlt <= 0) throw ScenarioError("protocol.mlt", "must be positive");
  if (protocol_config.sync_chunk_size == 0) throw ScenarioError("protocol.sync_chunk", "must be at least 1");
  if (membership.lease <= 0) throw ScenarioError("membership.lease", "must be positive");
  if (membership.detector_interval <= 0)
    throw ScenarioError("membership.detector_interval", "must be positive");
  if (!virtual_ids.empty()) {
    if (virtual_ids.size() != nodes) throw ScenarioError("protocol.virtual_ids", "one set per node required");
    try {
      validate_virtual_ids(virtual_ids);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("protocol.virtual_ids", e.what());
    }
  }
  if (protocol == ProtocolKind::Craq) {
    if (workload.rmw_ratio > 0) throw ScenarioError("scenario.rmw_ratio", "craq supports no RMWs");
    if (!faults.empty() || !suspicions.empty())
      throw ScenarioError("faults", "craq runs are failure-free");
    if (link.drop_probability > 0 || link.duplicate_probability > 0)
      throw ScenarioError("link.drop", "craq runs need a loss-free link");
  }
  for (const auto& f : faults) {
    if (auto* c = std::get_if<sim::CrashFault>(&f)) {
      if (c->node == 0 || c->node > nodes) throw ScenarioError("faults.crash", "node out of range");
    }
  }
  for (const auto& sp : suspicions)
    if (sp.node == 0 || sp.node > nodes) throw ScenarioError("faults.suspect", "node out of range");
}

}  // namespace hermes
