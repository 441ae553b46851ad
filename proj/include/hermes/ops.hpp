#pragma once

#include <cstdint>
#include <string>

#include "hermes/types.hpp"

namespace hermes {

// Read-modify-write request. Values are opaque strings; fetch-add reads them
// as (optionally zero-padded) signed decimal integers.
struct RmwSpec {
  enum class Kind : std::uint8_t { CompareAndSwap, FetchAdd };

  Kind kind = Kind::CompareAndSwap;
  std::string expected;
  std::string desired;
  std::int64_t delta = 0;

  static RmwSpec compare_and_swap(std::string expected, std::string desired) {
    return RmwSpec{Kind::CompareAndSwap, std::move(expected), std::move(desired), 0};
  }
  static RmwSpec fetch_add(std::int64_t delta) { return RmwSpec{Kind::FetchAdd, {}, {}, delta}; }

  friend bool operator==(const RmwSpec&, const RmwSpec&) = default;
};

// Decimal view of a value; anything that does not parse is zero.
std::int64_t numeric_value(const std::string& value);
// Formats n as decimal, left-padded with zeros to `width` characters.
std::string format_numeric(std::int64_t n, std::size_t width);

// Outcome of applying an RMW against a current value. `applies` is false for a
// failed CAS expectation.
struct RmwEvaluation {
  bool applies = false;
  std::string new_value;
};
RmwEvaluation evaluate_rmw(const RmwSpec& rmw, const std::string& current);

enum class OpStatus : std::uint8_t { Ok, Aborted, CasFailed, NotOperational };

const char* to_string(OpStatus status);

// Client-visible completion. For reads `value` is the value returned; for a
// successful RMW it is the value observed before the update. `ts` is the
// timestamp the operation read or wrote.
struct Completion {
  OpId op = 0;
  OpStatus status = OpStatus::Ok;
  std::string value;
  Timestamp ts;

  friend bool operator==(const Completion&, const Completion&) = default;
};

enum class OpKind : std::uint8_t { Read, Write, Rmw };

// Client operation waiting for its key to return to Valid.
struct StalledOp {
  OpId op = 0;
  OpKind kind = OpKind::Read;
  std::string value;
  RmwSpec rmw;
  std::uint64_t cid_draw = 0;

  friend bool operator==(const StalledOp&, const StalledOp&) = default;
};

}  // namespace hermes
