#include "hermes/kvstore.hpp"

#include <algorithm>
#include <ostream>

#include "hermes/message.hpp"

namespace hermes {

const char* to_string(KeyState state) {
  switch (state) {
    case KeyState::Valid: return "Valid";
    case KeyState::Invalid: return "Invalid";
    case KeyState::Write: return "Write";
    case KeyState::Replay: return "Replay";
    case KeyState::Trans: return "Trans";
  }
  return "?";
}

UnknownKey::UnknownKey(KeyId key)
    : std::out_of_range("unknown key " + std::to_string(key)) {}

Store::Store(std::size_t key_count, std::string default_value) : records_(key_count) {
  for (auto& r : records_) r.value = default_value;
}

const KeyRecord& Store::get(KeyId key) const {
  if (key >= records_.size()) throw UnknownKey(key);
  return records_[key];
}

KeyRecord& Store::at(KeyId key) {
  if (key >= records_.size()) throw UnknownKey(key);
  return records_[key];
}

void Store::apply(KeyId key, Timestamp ts, std::string value, bool rmw_flag, KeyState state) {
  auto& r = at(key);
  r.ts = ts;
  r.value = std::move(value);
  r.rmw_flag = rmw_flag;
  r.state = state;
}

ScanChunk Store::scan(KeyId cursor, std::size_t chunk_size) const {
  if (cursor > records_.size()) throw UnknownKey(cursor);
  ScanChunk chunk;
  auto end = static_cast<KeyId>(std::min(records_.size(), std::size_t{cursor} + chunk_size));
  for (KeyId k = cursor; k < end; ++k) {
    const auto& r = records_[k];
    chunk.records.push_back({k, r.ts, r.value, r.rmw_flag, r.state == KeyState::Valid});
  }
  chunk.next_cursor = end;
  chunk.last = end == records_.size();
  return chunk;
}

void Store::dump(std::ostream& os) const {
  for (std::size_t k = 0; k < records_.size(); ++k) {
    const auto& r = records_[k];
    os << k << ' ' << r.ts.version << ' ' << r.ts.cid << ' ' << to_hex(r.value) << '\n';
  }
}

std::string encode_chunk(const ScanChunk& chunk) {
  ByteWriter w;
  w.u32(chunk.next_cursor);
  w.u8(chunk.last ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(chunk.records.size()));
  for (const auto& r : chunk.records) {
    w.u32(r.key);
    w.u32(r.ts.version);
    w.u32(r.ts.cid);
    w.u8(static_cast<std::uint8_t>((r.valid ? 1 : 0) | (r.rmw_flag ? 2 : 0)));
    w.bytes(r.value);
  }
  return w.str();
}

ScanChunk decode_chunk(const std::string& bytes) {
  ByteReader r(bytes);
  ScanChunk chunk;
  chunk.next_cursor = r.u32();
  chunk.last = r.u8() != 0;
  auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    ScannedRecord rec;
    rec.key = r.u32();
    rec.ts.version = r.u32();
    rec.ts.cid = r.u32();
    auto flags = r.u8();
    rec.valid = (flags & 1) != 0;
    rec.rmw_flag = (flags & 2) != 0;
    rec.value = r.bytes();
    chunk.records.push_back(std::move(rec));
  }
  if (!r.done()) throw DecodeError("trailing bytes in chunk");
  return chunk;
}

}  // namespace hermes
