// Copyright (c) 2026 The pndsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// pndsim: label loads, run scenarios on the OoO model, compare labelled and
// unlabelled runs.
//
// Exit codes: 0 ok, 1 usage, 2 parse/validation error, 3 architectural state
// mismatch, 4 simulator failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pndsim/analysis.hpp"
#include "pndsim/harness.hpp"
#include "pndsim/lowering.hpp"
#include "pndsim/ooo.hpp"
#include "pndsim/parse.hpp"
#include "pndsim/scenario.hpp"

namespace fs = std::filesystem;
using namespace pndsim;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitMismatch = 3;
constexpr int kExitSim = 4;

int cmd_label(const std::string& path, const std::string& report) {
  mir::Program prog = mir::parse_program_file(path);
  auto res = analysis::label_pass(prog);
  if (report == "json") {
    std::cout << analysis::to_json(res.report).dump(2) << "\n";
    return 0;
  }
  std::cout << mir::print_program(res.program);
  std::cout << "# " << res.report.labelled_count() << " of " << res.report.loads.size()
            << " loop loads labelled\n";
  for (const auto& l : res.report.loads) {
    std::cout << "# pc 0x" << std::hex << l.pc << std::dec << (l.labelled ? " pnd" : " blocked by");
    for (const auto& b : l.blockers) std::cout << " 0x" << std::hex << b.pc << std::dec;
    std::cout << "\n";
  }
  return 0;
}

int cmd_run(const std::string& scenario, const std::string& config, const std::string& labels, bool trace,
            const std::string& out) {
  Scenario sc = load_scenario(resolve_scenario(scenario));
  CpuConfig cfg = resolve_config(config, fs::path(resolve_scenario(scenario)).parent_path());
  bool labels_on = labels == "on";
  auto labelled = analysis::label_pass(sc.program);
  Trace t = lower(labelled.program, sc.inputs);
  MachineState init = initial_state(labelled.program, sc.inputs);
  MachineState golden = run_inorder(t, init);
  SimResult r = simulate(t, cfg, init, labels_on, {trace});
  bool equal = r.state == golden;

  nlohmann::json j = {{"scenario", sc.name},
                      {"labels", labels_on ? "on" : "off"},
                      {"state_equal", equal},
                      {"config", to_json(cfg)},
                      {"metrics", to_json(r.metrics)}};
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream os(out);
    os << j.dump(2) << "\n";
  }
  if (trace) print_events(std::cerr, r.events);
  if (!equal) {
    std::cerr << "error: final state differs from the in-order reference\n";
    return kExitMismatch;
  }
  return 0;
}

int cmd_dump(const std::string& scenario) {
  Scenario sc = load_scenario(resolve_scenario(scenario));
  auto labelled = analysis::label_pass(sc.program);
  dump_trace(std::cout, lower(labelled.program, sc.inputs));
  return 0;
}

int cmd_compare(std::vector<std::string> scenarios, const std::string& out_dir) {
  if (scenarios.empty())
    for (const auto& p : corpus_scenarios()) scenarios.push_back(p.string());
  std::vector<ComparisonRow> rows;
  for (const auto& s : scenarios) {
    Scenario sc = load_scenario(resolve_scenario(s));
    auto r = run_comparison(sc);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  SummaryReport summary = summarize(rows);

  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "comparison.csv");
    write_csv(os, rows);
  }
  {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    std::ofstream os(fs::path(out_dir) / "comparison.json");
    os << arr.dump(2) << "\n";
  }
  {
    std::ofstream os(fs::path(out_dir) / "summary.json");
    os << to_json(summary).dump(2) << "\n";
  }
  {
    std::ofstream os(fs::path(out_dir) / "summary.csv");
    write_summary_csv(os, summary);
  }
  write_summary_csv(std::cout, summary);

  bool failed = false;
  for (const auto& r : rows) {
    if (r.failed()) {
      std::cerr << "FAILED: " << r.scenario << " on " << r.config.name << "\n";
      failed = true;
    }
  }
  return failed ? kExitMismatch : 0;
}

int cmd_presets() {
  std::printf("%-8s %5s %5s %6s %5s %10s %12s\n", "config", "width", "iq", "rob", "lsq", "ssit/lfst", "clear_period");
  for (const auto& c : presets())
    std::printf("%-8s %5u %5u %6u %5u %10u %12llu\n", c.name.c_str(), c.width, c.iq_entries, c.rob_entries,
                c.lq_entries, c.predictor.ssit_entries, static_cast<unsigned long long>(c.predictor.clear_period));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Store Sets OoO model with statically labelled loads"};
  app.require_subcommand(1);

  std::string label_path, label_report = "text";
  auto* label = app.add_subcommand("label", "Run the labelling pass over a program");
  label->add_option("program", label_path, "Program file")->required();
  label->add_option("--report", label_report, "Report format")->check(CLI::IsMember({"text", "json"}));

  std::string run_scenario, run_config = "small", run_labels = "on", run_out;
  bool run_trace = false;
  auto* run = app.add_subcommand("run", "Simulate one scenario on one config");
  run->add_option("scenario", run_scenario, "Scenario file or corpus name")->required();
  run->add_option("--config", run_config, "small|large|xlarge or a JSON config file");
  run->add_option("--labels", run_labels, "Honour pnd labels")->check(CLI::IsMember({"on", "off"}));
  run->add_flag("--trace", run_trace, "Print the per-cycle event log to stderr");
  run->add_option("--out", run_out, "Write metrics JSON here instead of stdout");

  std::vector<std::string> cmp_scenarios;
  std::string cmp_out = "results";
  auto* compare = app.add_subcommand("compare", "Labelled vs unlabelled comparison (whole corpus if none given)");
  compare->add_option("scenarios", cmp_scenarios, "Scenario files or corpus names");
  compare->add_option("--out", cmp_out, "Output directory");

  std::string dump_scenario;
  auto* dump = app.add_subcommand("dump", "Print the lowered dynamic op stream");
  dump->add_option("scenario", dump_scenario, "Scenario file or corpus name")->required();

  auto* presets_cmd = app.add_subcommand("presets", "Print the CPU presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*label) return cmd_label(label_path, label_report);
    if (*run) return cmd_run(run_scenario, run_config, run_labels, run_trace, run_out);
    if (*compare) return cmd_compare(cmp_scenarios, cmp_out);
    if (*dump) return cmd_dump(dump_scenario);
    if (*presets_cmd) return cmd_presets();
  } catch (const mir::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitInput;
  } catch (const mir::ValidationError& e) {
    std::cerr << "invalid program:\n" << e.what() << "\n";
    return kExitInput;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitInput;
  } catch (const LoweringError& e) {
    std::cerr << "lowering error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitInput;
  } catch (const SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return kExitSim;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
