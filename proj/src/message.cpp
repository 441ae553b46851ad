#include "hermes/message.hpp"

namespace hermes {

const char* to_string(MsgKind kind) {
  switch (kind) {
    case MsgKind::Inv: return "INV";
    case MsgKind::Ack: return "ACK";
    case MsgKind::Val: return "VAL";
    case MsgKind::CraqWrite: return "CRAQ_WRITE";
    case MsgKind::CraqAck: return "CRAQ_ACK";
    case MsgKind::CraqQuery: return "CRAQ_QUERY";
    case MsgKind::CraqReply: return "CRAQ_REPLY";
    case MsgKind::Heartbeat: return "HEARTBEAT";
    case MsgKind::Lease: return "LEASE";
    case MsgKind::MUpdate: return "MUPDATE";
    case MsgKind::ChunkRequest: return "CHUNK_REQ";
    case MsgKind::ChunkReply: return "CHUNK_REPLY";
  }
  return "UNKNOWN";
}

namespace {

bool known_kind(std::uint8_t tag) {
  switch (static_cast<MsgKind>(tag)) {
    case MsgKind::Inv:
    case MsgKind::Ack:
    case MsgKind::Val:
    case MsgKind::CraqWrite:
    case MsgKind::CraqAck:
    case MsgKind::CraqQuery:
    case MsgKind::CraqReply:
    case MsgKind::Heartbeat:
    case MsgKind::Lease:
    case MsgKind::MUpdate:
    case MsgKind::ChunkRequest:
    case MsgKind::ChunkReply:
      return true;
  }
  return false;
}

}  // namespace

std::vector<std::uint8_t> encode(const Message& msg) {
  ByteWriter w;
  w.u64(msg.epoch);
  w.u32(msg.sender);
  auto tag = static_cast<std::uint8_t>(msg.kind);
  if (msg.rmw_flag) tag |= kRmwFlagBit;
  if (msg.resent || msg.superseded) tag |= kMarkBit;
  w.u8(tag);
  w.u32(msg.key);
  w.u32(msg.ts.version);
  w.u32(msg.ts.cid);
  w.bytes(msg.value);
  return std::move(w.data());
}

Message decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Message msg;
  msg.epoch = r.u64();
  msg.sender = r.u32();
  auto tag = r.u8();
  msg.rmw_flag = (tag & kRmwFlagBit) != 0;
  const bool mark = (tag & kMarkBit) != 0;
  tag &= static_cast<std::uint8_t>(~(kRmwFlagBit | kMarkBit));
  if (!known_kind(tag)) throw DecodeError("unknown message kind");
  msg.kind = static_cast<MsgKind>(tag);
  if (msg.rmw_flag && msg.kind != MsgKind::Inv) throw DecodeError("rmw flag on non-INV");
  if (mark) {
    if (msg.kind == MsgKind::Inv) {
      msg.resent = true;
    } else if (msg.kind == MsgKind::Ack || msg.kind == MsgKind::Val) {
      msg.superseded = true;
    } else {
      throw DecodeError("mark bit on " + std::string(to_string(msg.kind)));
    }
  }
  msg.key = r.u32();
  msg.ts.version = r.u32();
  msg.ts.cid = r.u32();
  msg.value = r.bytes();
  if (!r.done()) throw DecodeError("trailing bytes");
  return msg;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

std::string to_hex(std::string_view bytes) {
  return to_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw DecodeError("odd-length hex string");
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw DecodeError("invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

}  // namespace hermes
