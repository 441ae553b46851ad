#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "hermes/explorer.hpp"

using namespace hermes;

TEST_CASE("standard explorations pass with full coverage") {
  for (const auto& cfg : standard_explorations()) {
    auto r = explore(cfg);
    CAPTURE(cfg.name);
    for (const auto& e : r.examples) MESSAGE(e);
    MESSAGE(cfg.name << ": states=" << r.states << " terminals=" << r.terminals);
    CHECK(r.complete);
    CHECK(r.violations == 0);
    CHECK(r.deadlocks == 0);
    CHECK(r.terminals > 0);
  }
}

TEST_CASE("write-RMW race commits the RMW in some orderings only") {
  auto cfg = standard_explorations()[1];
  auto r = explore(cfg);
  CHECK(r.ok());
  CHECK(r.rmw_commit_terminals > 0);
  CHECK(r.rmw_commit_terminals < r.terminals);
}

TEST_CASE("without probe reads a lost VAL leaves a replica Invalid and is reported") {
  auto cfg = standard_explorations()[2];
  cfg.probe_reads = false;
  cfg.ops.pop_back();
  auto r = explore(cfg);
  CHECK(r.complete);
  CHECK(r.violations > 0);
  REQUIRE_FALSE(r.examples.empty());
  CHECK(r.examples[0].find("ended") != std::string::npos);
}

TEST_CASE("a crash with no reconfiguration is reported as a deadlock") {
  ExplorerConfig cfg;
  cfg.name = "stuck";
  cfg.nodes = 3;
  cfg.protocol.mlt = 0;
  cfg.ops = {{1, OpKind::Write, "4", {}}};
  cfg.crash = 3;
  cfg.reconfigure = false;
  auto r = explore(cfg);
  CHECK(r.deadlocks > 0);
  CHECK_FALSE(r.ok());
}

TEST_CASE("state bound yields partial coverage, never a silent pass") {
  auto cfg = standard_explorations()[0];
  cfg.state_bound = 100;
  auto r = explore(cfg);
  CHECK_FALSE(r.complete);
  CHECK_FALSE(r.ok());
}

TEST_CASE("configurations outside the envelope are rejected") {
  auto cfg = standard_explorations()[0];
  cfg.nodes = 4;
  CHECK_THROWS_AS(explore(cfg), std::invalid_argument);
  cfg = standard_explorations()[0];
  cfg.max_drops = 2;
  cfg.max_duplicates = 1;
  CHECK_THROWS_AS(explore(cfg), std::invalid_argument);
  cfg = standard_explorations()[0];
  cfg.protocol.mlt = 5;
  CHECK_THROWS_AS(explore(cfg), std::invalid_argument);
  cfg = standard_explorations()[4];
  cfg.ops.push_back({2, OpKind::Read, {}, {}});
  CHECK_THROWS_AS(explore(cfg), std::invalid_argument);
}

TEST_CASE("explorer config text") {
  std::istringstream in(R"(# small race
name = mini
nodes = 2
op = write 1 5
op = faa 2 3   # rmw
max_drops = 1
)");
  auto c = parse_explorer_config(in);
  CHECK(c.name == "mini");
  CHECK(c.nodes == 2);
  REQUIRE(c.ops.size() == 2);
  CHECK(c.ops[0].value == "5");
  CHECK(c.ops[1].rmw == RmwSpec::fetch_add(3));
  CHECK(c.max_drops == 1);
  CHECK(c.protocol.mlt == 0);
  CHECK(explore(c).ok());

  std::istringstream bad_kind("op = swap 1 2\n");
  CHECK_THROWS_AS(parse_explorer_config(bad_kind), std::invalid_argument);
  std::istringstream too_big("nodes = 4\nop = read 1\n");
  CHECK_THROWS_AS(parse_explorer_config(too_big), std::invalid_argument);
  std::istringstream missing("op = cas 1 0\n");
  CHECK_THROWS_AS(parse_explorer_config(missing), std::invalid_argument);
}
