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

#pragma once

// Labelled-vs-unlabelled experiment driver and report writers.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pndsim/analysis.hpp"
#include "pndsim/lowering.hpp"
#include "pndsim/ooo.hpp"
#include "pndsim/scenario.hpp"

namespace pndsim {

struct ComparisonRow {
  std::string scenario;
  CpuConfig config;
  std::size_t labelled_loads = 0;  // static count
  RunMetrics unlabelled;
  RunMetrics labelled;
  double lookup_reduction_pct = 0.0;
  double cpi_change_pct = 0.0;
  bool state_equal = false;

  bool failed() const { return !state_equal; }
  double cpi_ratio() const {
    return unlabelled.cpi() > 0 ? labelled.cpi() / unlabelled.cpi() : 1.0;
  }
};

/// 100 * (1 - lookups_labelled / lookups_unlabelled); zero when the
/// unlabelled run made no lookups.
inline double lookup_reduction_pct(std::uint64_t lookups_unlab, std::uint64_t lookups_lab) {
  if (lookups_unlab == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(lookups_lab) / static_cast<double>(lookups_unlab));
}

/// Labels, lowers once, then simulates every configured CPU twice from the
/// same initial state. Rows whose final state differs from the in-order
/// reference are marked failed.
inline std::vector<ComparisonRow> run_comparison(const Scenario& s) {
  auto labelled = analysis::label_pass(s.program);
  Trace trace = lower(labelled.program, s.inputs);
  MachineState init = initial_state(labelled.program, s.inputs);
  MachineState golden = run_inorder(trace, init);

  std::vector<ComparisonRow> rows;
  for (const auto& cfg : s.configs) {
    ComparisonRow row;
    row.scenario = s.name;
    row.config = cfg;
    row.labelled_loads = labelled.report.labelled_count();
    SimResult off = simulate(trace, cfg, init, false);
    SimResult on = simulate(trace, cfg, init, true);
    row.unlabelled = off.metrics;
    row.labelled = on.metrics;
    row.state_equal = off.state == golden && on.state == golden;
    row.lookup_reduction_pct = lookup_reduction_pct(off.metrics.mdp_lookups, on.metrics.mdp_lookups);
    row.cpi_change_pct = 100.0 * (row.cpi_ratio() - 1.0);
    rows.push_back(std::move(row));
  }
  return rows;
}

struct ConfigSummary {
  std::string config;
  std::size_t rows = 0;
  std::size_t failed_rows = 0;
  double mean_lookup_reduction_pct = 0.0;
  double max_lookup_reduction_pct = 0.0;
  double geomean_cpi_ratio = 1.0;
  double geomean_cpi_change_pct = 0.0;
};

struct SummaryReport {
  std::vector<ConfigSummary> configs;  // in first-seen order
};

/// Arithmetic mean and max of lookup reduction, geometric mean of the CPI
/// ratio, per config. Failed rows are excluded. Throws when every row failed.
inline SummaryReport summarize(const std::vector<ComparisonRow>& rows) {
  bool any_ok = std::any_of(rows.begin(), rows.end(), [](const ComparisonRow& r) { return !r.failed(); });
  if (!any_ok) throw std::runtime_error("no successful rows to summarize");
  SummaryReport rep;
  std::map<std::string, std::size_t> slot;
  std::vector<double> log_sum;
  for (const auto& r : rows) {
    auto [it, inserted] = slot.emplace(r.config.name, rep.configs.size());
    if (inserted) {
      rep.configs.push_back({r.config.name, 0, 0, 0.0, 0.0, 1.0, 0.0});
      log_sum.push_back(0.0);
    }
    ConfigSummary& c = rep.configs[it->second];
    if (r.failed()) {
      ++c.failed_rows;
      continue;
    }
    ++c.rows;
    c.mean_lookup_reduction_pct += r.lookup_reduction_pct;
    c.max_lookup_reduction_pct = c.rows == 1 ? r.lookup_reduction_pct : std::max(c.max_lookup_reduction_pct, r.lookup_reduction_pct);
    log_sum[it->second] += std::log(r.cpi_ratio());
  }
  for (std::size_t i = 0; i < rep.configs.size(); ++i) {
    ConfigSummary& c = rep.configs[i];
    if (c.rows == 0) continue;
    c.mean_lookup_reduction_pct /= static_cast<double>(c.rows);
    c.geomean_cpi_ratio = std::exp(log_sum[i] / static_cast<double>(c.rows));
    c.geomean_cpi_change_pct = 100.0 * (c.geomean_cpi_ratio - 1.0);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Report formats

/// Stable CSV column order. Config fields are echoed so a row can be
/// reproduced from the report alone.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "scenario",         "config",           "status",           "labelled_loads",
      "committed_insts",  "lookups_unlab",    "lookups_lab",      "bypassed_lab",
      "lpki_unlab",       "lpki_lab",         "lookup_reduction_pct", "cycles_unlab",
      "cycles_lab",       "cpi_unlab",        "cpi_lab",          "cpi_change_pct",
      "violations_unlab", "violations_lab",   "collisions_unlab", "collisions_lab",
      "false_deps_unlab", "false_deps_lab",   "forwardings_unlab", "forwardings_lab",
      "width",            "iq_entries",       "rob_entries",      "lq_entries",
      "sq_entries",       "ssit_entries",     "lfst_entries",     "clear_period",
      "load_latency",     "alu_latency",      "forward_latency",  "squash_penalty",
      "store_store_ordering"};
  return cols;
}

inline void write_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  auto fixed = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    const auto& c = r.config;
    os << r.scenario << "," << c.name << "," << (r.failed() ? "FAILED" : "ok") << "," << r.labelled_loads << ","
       << r.labelled.committed_insts << "," << r.unlabelled.mdp_lookups << "," << r.labelled.mdp_lookups << ","
       << r.labelled.bypassed_lookups << "," << fixed(r.unlabelled.lpki()) << "," << fixed(r.labelled.lpki()) << ","
       << fixed(r.lookup_reduction_pct) << "," << r.unlabelled.cycles << "," << r.labelled.cycles << ","
       << fixed(r.unlabelled.cpi()) << "," << fixed(r.labelled.cpi()) << "," << fixed(r.cpi_change_pct) << ","
       << r.unlabelled.violations << "," << r.labelled.violations << "," << r.unlabelled.index_collisions << ","
       << r.labelled.index_collisions << "," << r.unlabelled.false_dependencies << ","
       << r.labelled.false_dependencies << "," << r.unlabelled.forwardings << "," << r.labelled.forwardings << ","
       << c.width << "," << c.iq_entries << "," << c.rob_entries << "," << c.lq_entries << "," << c.sq_entries
       << "," << c.predictor.ssit_entries << "," << c.predictor.lfst_entries << "," << c.predictor.clear_period
       << "," << c.load_latency << "," << c.alu_latency << "," << c.forward_latency << "," << c.squash_penalty
       << "," << (c.store_store_ordering ? 1 : 0) << "\n";
  }
}

inline nlohmann::json to_json(const ComparisonRow& r) {
  return {{"scenario", r.scenario},
          {"config", to_json(r.config)},
          {"status", r.failed() ? "FAILED" : "ok"},
          {"state_equal", r.state_equal},
          {"labelled_loads", r.labelled_loads},
          {"lookup_reduction_pct", r.lookup_reduction_pct},
          {"cpi_change_pct", r.cpi_change_pct},
          {"unlabelled", to_json(r.unlabelled)},
          {"labelled", to_json(r.labelled)}};
}

inline nlohmann::json to_json(const SummaryReport& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : s.configs)
    arr.push_back({{"config", c.config},
                   {"rows", c.rows},
                   {"failed_rows", c.failed_rows},
                   {"mean_lookup_reduction_pct", c.mean_lookup_reduction_pct},
                   {"max_lookup_reduction_pct", c.max_lookup_reduction_pct},
                   {"geomean_cpi_ratio", c.geomean_cpi_ratio},
                   {"geomean_cpi_change_pct", c.geomean_cpi_change_pct}});
  return {{"configs", arr}};
}

inline void write_summary_csv(std::ostream& os, const SummaryReport& s) {
  os << "config,rows,failed_rows,mean_lookup_reduction_pct,max_lookup_reduction_pct,geomean_cpi_ratio,"
        "geomean_cpi_change_pct\n";
  for (const auto& c : s.configs) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", c.config.c_str(), c.rows, c.failed_rows,
                  c.mean_lookup_reduction_pct, c.max_lookup_reduction_pct, c.geomean_cpi_ratio,
                  c.geomean_cpi_change_pct);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Corpus

#ifndef PNDSIM_DEFAULT_CORPUS
#define PNDSIM_DEFAULT_CORPUS "corpus"
#endif

/// $PNDSIM_CORPUS if set, else the corpus directory baked in at build time.
inline std::filesystem::path corpus_dir() {
  if (const char* env = std::getenv("PNDSIM_CORPUS"); env && *env) return env;
  return PNDSIM_DEFAULT_CORPUS;
}

/// Every `*.scn` in the corpus, sorted by name.
inline std::vector<std::filesystem::path> corpus_scenarios(const std::filesystem::path& dir = corpus_dir()) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".scn") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// A path as given if it exists, otherwise `<corpus>/<name>.scn`.
inline std::filesystem::path resolve_scenario(const std::string& name_or_path) {
  std::filesystem::path p(name_or_path);
  if (std::filesystem::exists(p)) return p;
  auto in_corpus = corpus_dir() / (name_or_path + ".scn");
  if (std::filesystem::exists(in_corpus)) return in_corpus;
  throw ScenarioError("no scenario '" + name_or_path + "' (looked in " + corpus_dir().string() + ")");
}

}  // namespace pndsim
