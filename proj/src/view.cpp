#include "hermes/view.hpp"

#include "hermes/message.hpp"

namespace hermes {

std::string encode_view(const MembershipView& view) {
  ByteWriter w;
  w.u64(view.epoch);
  w.u64(static_cast<std::uint64_t>(view.lease_until));
  w.u32(static_cast<std::uint32_t>(view.live.size()));
  for (auto n : view.live) w.u32(n);
  w.u32(static_cast<std::uint32_t>(view.shadows.size()));
  for (auto n : view.shadows) w.u32(n);
  return w.str();
}

MembershipView decode_view(const std::string& bytes) {
  ByteReader r(bytes);
  MembershipView view;
  view.epoch = r.u64();
  view.lease_until = static_cast<SimTime>(r.u64());
  for (auto n = r.u32(); n > 0; --n) view.live.insert(r.u32());
  for (auto n = r.u32(); n > 0; --n) view.shadows.insert(r.u32());
  if (!r.done()) throw DecodeError("trailing bytes in view");
  return view;
}

}  // namespace hermes
