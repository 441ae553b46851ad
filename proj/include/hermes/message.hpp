#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hermes/types.hpp"

namespace hermes {

// Wire kind tags. The high bit of the encoded tag carries the RMW flag of an
// INV. Bit 0x40 marks a resent INV (retransmission or replay), or an ACK/VAL
// for a timestamp the sender knows is already superseded. Other kinds leave
// both bits clear.
enum class MsgKind : std::uint8_t {
  Inv = 0x01,
  Ack = 0x02,
  Val = 0x03,

  CraqWrite = 0x10,
  CraqAck = 0x11,
  CraqQuery = 0x12,
  CraqReply = 0x13,

  Heartbeat = 0x20,
  Lease = 0x21,
  MUpdate = 0x22,
  ChunkRequest = 0x23,
  ChunkReply = 0x24,
};

inline constexpr std::uint8_t kRmwFlagBit = 0x80;
inline constexpr std::uint8_t kMarkBit = 0x40;

const char* to_string(MsgKind kind);

// Epoch-tagged protocol message. Only INV (and the CRAQ/membership payload
// kinds) carry a value; ACK and VAL carry exactly key and timestamp.
struct Message {
  Epoch epoch = 0;
  NodeId sender = 0;
  MsgKind kind = MsgKind::Inv;
  bool rmw_flag = false;
  KeyId key = 0;
  Timestamp ts;
  std::string value;
  // INV only.
  bool resent = false;
  // ACK and VAL only.
  bool superseded = false;

  friend bool operator==(const Message&, const Message&) = default;

  static Message inv(Epoch epoch, NodeId sender, KeyId key, Timestamp ts, std::string value,
                     bool rmw_flag, bool resent = false) {
    return Message{epoch, sender, MsgKind::Inv, rmw_flag, key, ts, std::move(value), resent, false};
  }
  static Message ack(Epoch epoch, NodeId sender, KeyId key, Timestamp ts, bool superseded = false) {
    return Message{epoch, sender, MsgKind::Ack, false, key, ts, {}, false, superseded};
  }
  static Message val(Epoch epoch, NodeId sender, KeyId key, Timestamp ts, bool superseded = false) {
    return Message{epoch, sender, MsgKind::Val, false, key, ts, {}, false, superseded};
  }
};

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Canonical flat encoding, all integers little-endian:
//   epoch u64 | sender u32 | kind u8 | key u32 | version u32 | cid u32 |
//   value length u32 | value bytes
std::vector<std::uint8_t> encode(const Message& msg);
Message decode(std::span<const std::uint8_t> bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::string to_hex(std::string_view bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

// Little-endian primitives shared by the payload encoders.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& data() { return out_; }
  std::string str() const { return std::string(out_.begin(), out_.end()); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  explicit ByteReader(std::string_view in)
      : in_(reinterpret_cast<const std::uint8_t*>(in.data()), in.size()) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes() {
    auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError("truncated message");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace hermes
