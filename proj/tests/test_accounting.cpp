#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hermes/runner.hpp"

using namespace hermes;

namespace {

// Loss-free writes on a small key set so coordinators race and some commit
// from Trans. mlt is long enough that nothing is retransmitted or replayed.
Scenario contended(std::uint32_t nodes, bool o1, bool o3, std::uint64_t seed) {
  Scenario s;
  s.nodes = nodes;
  s.seed = seed;
  s.workload.keys = 4;
  s.workload.write_ratio = 1.0;
  s.duration = 2 * kMillisecond;
  s.protocol_config.skip_trans_val = o1;
  s.protocol_config.broadcast_acks = o3;
  s.protocol_config.mlt = 5 * kMillisecond;
  return s;
}

}  // namespace

TEST_CASE("message counters match the closed-form costs") {
  for (std::uint32_t n : {3u, 5u}) {
    for (bool o1 : {false, true}) {
      for (bool o3 : {false, true}) {
        CAPTURE(n);
        CAPTURE(o1);
        CAPTURE(o3);
        auto r = run_scenario(contended(n, o1, o3, 5 + n));
        const auto& h = r.metrics.hermes;
        REQUIRE(h.retransmits == 0);
        REQUIRE(h.replays == 0);
        CHECK(r.metrics.pending_at_end == 0);
        CHECK(h.updates_issued == h.commits_valid + h.commits_trans);
        CHECK(h.commits_trans > 0);
        const std::uint64_t f = n - 1;
        CHECK(r.metrics.sent(MsgKind::Inv) == f * h.updates_issued);
        if (o3) {
          CHECK(r.metrics.sent(MsgKind::Ack) == f * f * h.updates_issued);
          CHECK(r.metrics.sent(MsgKind::Val) == 0);
        } else {
          CHECK(r.metrics.sent(MsgKind::Ack) == f * h.updates_issued);
          const std::uint64_t validated = o1 ? h.commits_valid : h.commits_valid + h.commits_trans;
          CHECK(r.metrics.sent(MsgKind::Val) == f * validated);
        }
        CHECK(r.metrics.protocol_messages == r.metrics.sent(MsgKind::Inv) +
                                                 r.metrics.sent(MsgKind::Ack) +
                                                 r.metrics.sent(MsgKind::Val));
      }
    }
  }
}
