#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hermes/linearizability.hpp"
#include "hermes/runner.hpp"

using namespace hermes;

namespace {

Scenario quiet(std::uint32_t nodes, double write_ratio) {
  Scenario s;
  s.nodes = nodes;
  s.workload.keys = 50;
  s.workload.write_ratio = write_ratio;
  s.duration = 2 * kMillisecond;
  s.link.jitter_fraction = 0.0;
  s.link.base_delay = 10 * kMicrosecond;
  return s;
}

}  // namespace

TEST_CASE("read-only hermes run serves every read locally with no protocol traffic") {
  auto r = run_scenario(quiet(5, 0.0));
  CHECK(r.metrics.reads_completed > 1000);
  CHECK(r.metrics.reads_local == r.metrics.reads_completed);
  CHECK(r.metrics.protocol_messages == 0);
  CHECK(r.metrics.membership_messages > 0);
}

TEST_CASE("read-only craq run serves every read locally") {
  auto s = quiet(5, 0.0);
  s.protocol = ProtocolKind::Craq;
  auto r = run_scenario(s);
  CHECK(r.metrics.reads_local == r.metrics.reads_completed);
  CHECK(r.metrics.protocol_messages == 0);
}

TEST_CASE("hermes write latency is two one-way delays at every cluster size") {
  for (std::uint32_t n : {3u, 5u, 7u}) {
    auto r = run_scenario(quiet(n, 0.3));
    REQUIRE_FALSE(r.metrics.write_latencies.empty());
    // Writes that found their key busy wait in the stall queue first.
    std::size_t exact = 0;
    for (const auto& c : r.completions)
      if (c.kind == OpKind::Write && c.completed - c.invoked == 20 * kMicrosecond) ++exact;
    CHECK(exact > 0);
    CHECK(percentile(r.metrics.write_latencies, 0.5) == 20 * kMicrosecond);
  }
}

TEST_CASE("craq write latency is 2(n-1) one-way delays") {
  for (std::uint32_t n : {3u, 5u, 7u}) {
    auto s = quiet(n, 0.3);
    s.protocol = ProtocolKind::Craq;
    auto r = run_scenario(s);
    REQUIRE_FALSE(r.metrics.write_latencies.empty());
    for (auto l : r.metrics.write_latencies) CHECK(l == 2 * (n - 1) * 10 * kMicrosecond);
  }
}

TEST_CASE("same seed gives identical trace, history and csv") {
  auto s = quiet(5, 0.2);
  s.link.jitter_fraction = 0.2;
  s.link.drop_probability = 0.01;
  s.workload.rmw_ratio = 0.05;
  RunOptions o;
  o.trace = true;
  auto a = run_scenario(s, o);
  auto b = run_scenario(s, o);
  CHECK(a.trace == b.trace);
  CHECK(a.history.events == b.history.events);
  CHECK(csv_row(a) == csv_row(b));
  s.seed = 2;
  CHECK(run_scenario(s, o).trace != a.trace);
}

TEST_CASE("lossy run with a crash stays linearizable") {
  Scenario s;
  s.nodes = 5;
  s.workload.keys = 20;
  s.workload.write_ratio = 0.2;
  s.workload.rmw_ratio = 0.05;
  s.workload.distribution = KeyDistribution::Zipfian;
  s.link.drop_probability = 0.01;
  s.link.duplicate_probability = 0.01;
  s.duration = 40 * kMillisecond;
  s.membership.lease = 10 * kMillisecond;
  s.membership.detector_interval = 2 * kMillisecond;
  s.faults.push_back(sim::CrashFault{3, 5 * kMillisecond});
  auto r = run_scenario(s);
  auto report = check_history(r.history);
  CHECK(report.linearizable);
  CHECK(r.membership.size() >= 2);
  CHECK(r.metrics.completed_ok > 1000);
  MESSAGE("ops=" << r.metrics.completed_ok << " refused=" << r.metrics.refused
                 << " pending=" << r.metrics.pending_at_end << " replays=" << r.metrics.hermes.replays);
}
