#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hermes/ops.hpp"
#include "hermes/types.hpp"

namespace hermes {

enum class EventPhase : std::uint8_t { Invoke, Complete };

struct HistoryEvent {
  SimTime time = 0;
  std::uint32_t client = 0;
  OpId op = 0;
  KeyId key = 0;
  EventPhase phase = EventPhase::Invoke;
  OpKind kind = OpKind::Read;
  // Invoke: the value to write. Complete: the value read (reads, failed CAS)
  // or observed before the update (successful RMW).
  std::string value;
  RmwSpec rmw;  // Invoke of an RMW only.
  OpStatus status = OpStatus::Ok;
  std::optional<Timestamp> ts;

  friend bool operator==(const HistoryEvent&, const HistoryEvent&) = default;
};

class HistoryFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct History {
  std::string initial_value;
  std::vector<HistoryEvent> events;
};

// One event per line:
//   time TAB client TAB op_id TAB key TAB invoke|complete TAB op-kind TAB args
// op-kind is read, write, cas or faa. args is a run of name=value; pairs
// (values hex-encoded) or "-". A leading "#initial TAB hex" line sets the
// register's starting value; other lines starting with '#' are ignored.
std::string format_event(const HistoryEvent& ev);
HistoryEvent parse_event(const std::string& line);
void write_history(std::ostream& out, const History& history);
History read_history(std::istream& in);

std::map<KeyId, std::vector<HistoryEvent>> split_by_key(const std::vector<HistoryEvent>& events);

}  // namespace hermes
