#include "hermes/ops.hpp"

#include <charconv>

namespace hermes {

std::int64_t numeric_value(const std::string& value) {
  std::int64_t n = 0;
  auto first = value.data();
  auto last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, n);
  if (ec != std::errc{} || ptr != last) return 0;
  return n;
}

std::string format_numeric(std::int64_t n, std::size_t width) {
  const std::size_t sign = n < 0 ? 1 : 0;
  std::string digits = std::to_string(n).substr(sign);
  if (digits.size() + sign < width) digits.insert(0, width - sign - digits.size(), '0');
  return sign ? "-" + digits : digits;
}

RmwEvaluation evaluate_rmw(const RmwSpec& rmw, const std::string& current) {
  switch (rmw.kind) {
    case RmwSpec::Kind::CompareAndSwap:
      if (current != rmw.expected) return {false, {}};
      return {true, rmw.desired};
    case RmwSpec::Kind::FetchAdd:
      return {true, format_numeric(static_cast<std::int64_t>(
                                   static_cast<std::uint64_t>(numeric_value(current)) +
                                   static_cast<std::uint64_t>(rmw.delta)),
                               current.size())};
  }
  return {};
}

const char* to_string(OpStatus status) {
  switch (status) {
    case OpStatus::Ok: return "ok";
    case OpStatus::Aborted: return "aborted";
    case OpStatus::CasFailed: return "cas_failed";
    case OpStatus::NotOperational: return "not_operational";
  }
  return "unknown";
}

}  // namespace hermes
