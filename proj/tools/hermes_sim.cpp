// hermes-sim: run scenarios, check histories, explore, replay the golden trace.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hermes/explorer.hpp"
#include "hermes/golden.hpp"
#include "hermes/history.hpp"
#include "hermes/linearizability.hpp"
#include "hermes/runner.hpp"
#include "hermes/scenario.hpp"

namespace fs = std::filesystem;
using namespace hermes;

namespace {

// One JSON object per line on stderr so scripts can parse failures.
int fail(const std::string& code, const std::string& message, nlohmann::json extra = {}) {
  nlohmann::json line = {{"error", code}, {"message", message}};
  if (extra.is_object()) line.update(extra);
  std::cerr << line.dump() << '\n';
  return 1;
}

struct Outputs {
  std::string out_dir = ".";
  bool csv = false;
  bool history = false;
  bool trace = false;
  std::optional<std::uint64_t> seed;
};

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("HERMES_SIM_SEED");
  if (!v || !*v) return std::nullopt;
  return std::stoull(v);
}

Scenario load(const std::string& path, const Outputs& o) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  auto s = parse_scenario(in);
  if (o.seed) s.seed = *o.seed;
  else if (auto e = env_seed()) s.seed = *e;
  return s;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// Writes the requested artifacts and returns the checker verdict.
int finish_run(const RunResult& r, const Outputs& o, const std::string& stem) {
  fs::create_directories(o.out_dir);
  if (o.csv) write_file(fs::path(o.out_dir) / (stem + ".csv"), csv_header() + csv_row(r));
  if (o.history) {
    std::ostringstream h;
    write_history(h, r.history);
    write_file(fs::path(o.out_dir) / (stem + ".history"), h.str());
  }
  if (o.trace) write_file(fs::path(o.out_dir) / (stem + ".trace"), r.trace);

  auto report = check_history(r.history);
  const auto& m = r.metrics;
  std::cout << "scenario " << r.scenario.id << " seed " << r.scenario.seed << ": " << m.completed_ok
            << " ops ok, " << m.aborts << " aborts, " << m.protocol_messages << " protocol msgs, "
            << report.keys_checked << " keys checked, "
            << (report.linearizable ? "linearizable" : "NOT linearizable") << '\n';
  if (!report.linearizable) {
    const auto& [key, v] = *report.failures.begin();
    std::string last = v.violating_prefix.empty() ? "" : format_event(v.violating_prefix.back());
    return fail("linearizability", "history is not linearizable",
                {{"scenario", r.scenario.id}, {"seed", r.scenario.seed}, {"key", key},
                 {"failed_keys", report.failures.size()}, {"culprit", last}});
  }
  return 0;
}

int cmd_run(const std::string& config, const Outputs& o) {
  auto s = load(config, o);
  auto r = run_scenario(s, RunOptions{.trace = o.trace});
  return finish_run(r, o, s.id);
}

int cmd_check(const std::string& path) {
  std::ifstream in(path);
  if (!in) return fail("io", "cannot open " + path);
  auto h = read_history(in);
  auto report = check_history(h);
  std::cout << report.keys_checked << " keys checked, " << report.fast_path_keys << " via fast path\n";
  for (const auto& [key, v] : report.failures) {
    std::cout << "key " << key << ": violation, minimal prefix of " << v.violating_prefix.size()
              << " events:\n";
    for (const auto& ev : v.violating_prefix) std::cout << "  " << format_event(ev) << '\n';
  }
  if (!report.linearizable)
    return fail("linearizability", "history is not linearizable",
                {{"failed_keys", report.failures.size()}, {"first_key", report.failures.begin()->first}});
  std::cout << "linearizable\n";
  return 0;
}

int cmd_explore(const std::string& target) {
  std::vector<ExplorerConfig> configs;
  for (const auto& c : standard_explorations())
    if (target == "standard" || target == c.name) configs.push_back(c);
  if (configs.empty()) {
    std::ifstream in(target);
    if (!in) return fail("io", "cannot open " + target);
    configs.push_back(parse_explorer_config(in));
  }
  int rc = 0;
  for (const auto& c : configs) {
    auto r = explore(c);
    std::cout << r.name << ": " << r.states << " states, " << r.transitions << " transitions, "
              << r.terminals << " terminals, " << r.violations << " violations, " << r.deadlocks
              << " deadlocks, coverage " << (r.complete ? "full" : "partial") << '\n';
    for (const auto& e : r.examples) std::cout << "  " << e << '\n';
    if (!r.ok()) {
      rc = fail("explore", r.complete ? "property violated" : "state bound reached",
                {{"config", r.name}, {"violations", r.violations}, {"deadlocks", r.deadlocks}});
    }
  }
  return rc;
}

int cmd_golden() {
  auto r = run_concurrent_write_example();
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    std::cout << (i + 1) << "\t";
    for (const auto& c : r.steps[i].cells) std::cout << c << ' ';
    std::cout << "\t" << r.steps[i].action << '\n';
  }
  std::cout << "strip:";
  for (const auto& col : r.strip) std::cout << " [" << col << "]";
  std::cout << '\n';
  if (!r.matches) return fail("golden", r.mismatch);
  std::cout << "matches\n";
  return 0;
}

// name=v1,v2,... ; several --param flags form a grid.
int cmd_sweep(const std::string& config, const std::vector<std::string>& params, const Outputs& o) {
  auto base = load(config, o);
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& p : params) {
    auto eq = p.find('=');
    if (eq == std::string::npos) return fail("usage", "--param expects name=v1,v2,...");
    std::vector<std::string> values;
    std::istringstream in(p.substr(eq + 1));
    for (std::string v; std::getline(in, v, ',');) values.push_back(v);
    if (values.empty()) return fail("usage", "--param " + p + " has no values");
    axes.emplace_back(p.substr(0, eq), values);
  }
  std::vector<std::vector<std::pair<std::string, std::string>>> points{{}};
  for (const auto& [name, values] : axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& pt : points)
      for (const auto& v : values) {
        auto q = pt;
        q.emplace_back(name, v);
        next.push_back(q);
      }
    points = std::move(next);
  }

  std::ostringstream csv;
  csv << csv_header();
  int rc = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto s = base;
    for (const auto& [name, v] : points[i]) apply_setting(s, name, v);
    s.validate();
    auto r = run_scenario(s, RunOptions{.trace = o.trace});
    csv << csv_row(r);
    auto point_outputs = o;
    point_outputs.csv = false;
    if (finish_run(r, point_outputs, s.id + "-" + std::to_string(i)) != 0) rc = 1;
  }
  if (o.csv) {
    fs::create_directories(o.out_dir);
    write_file(fs::path(o.out_dir) / (base.id + "-sweep.csv"), csv.str());
  } else {
    std::cout << csv.str();
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hermes replication simulator"};
  app.require_subcommand(1);
  Outputs o;
  std::uint64_t seed = 0;
  auto add_outputs = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "override the scenario seed (else HERMES_SIM_SEED)");
    sub->add_option("--out-dir", o.out_dir, "directory for written artifacts");
    sub->add_flag("--csv", o.csv, "write CSV metrics");
    sub->add_flag("--history", o.history, "write the client history");
    sub->add_flag("--trace", o.trace, "write the message trace");
  };

  std::string path;
  std::vector<std::string> params;
  auto* run = app.add_subcommand("run", "run one scenario and check its history");
  run->add_option("config", path, "scenario file")->required();
  add_outputs(run);
  auto* check = app.add_subcommand("check", "check a recorded history for linearizability");
  check->add_option("history", path, "history file")->required();
  auto* expl = app.add_subcommand("explore", "exhaustively explore a small configuration");
  expl->add_option("config", path, "explorer file, a standard name, or 'standard'")->required();
  auto* golden = app.add_subcommand("golden", "replay the scripted concurrent-write example");
  auto* sweep = app.add_subcommand("sweep", "run a scenario over a parameter grid");
  sweep->add_option("config", path, "scenario file")->required();
  sweep->add_option("--param", params, "name=v1,v2,... (repeatable)")->required();
  add_outputs(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    if (rc != 0) fail("usage", e.what());
    return rc;
  }

  try {
    if ((run->parsed() && run->count("--seed")) || (sweep->parsed() && sweep->count("--seed"))) o.seed = seed;
    if (run->parsed()) return cmd_run(path, o);
    if (check->parsed()) return cmd_check(path);
    if (expl->parsed()) return cmd_explore(path);
    if (golden->parsed()) return cmd_golden();
    if (sweep->parsed()) return cmd_sweep(path, params, o);
  } catch (const ScenarioError& e) {
    return fail("scenario", e.what(), {{"field", e.field()}});
  } catch (const HistoryFormatError& e) {
    return fail("history_format", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
