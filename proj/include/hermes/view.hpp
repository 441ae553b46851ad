#pragma once

#include <set>
#include <string>

#include "hermes/types.hpp"

namespace hermes {

// Membership as installed at a node: epoch, live replicas (shadows included)
// and the lease that keeps the node operational.
struct MembershipView {
  Epoch epoch = 0;
  std::set<NodeId> live;
  // Members that joined in this update and must sync before serving.
  std::set<NodeId> shadows;
  SimTime lease_until = 0;

  friend bool operator==(const MembershipView&, const MembershipView&) = default;
};

std::string encode_view(const MembershipView& view);
MembershipView decode_view(const std::string& bytes);

}  // namespace hermes
