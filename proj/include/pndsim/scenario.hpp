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

// Key-value scenario files. One setting per line, `#` starts a comment:
//
//   name     = listing1                 (defaults to the file stem)
//   program  = listing1.mir             (relative to the scenario file)
//   entry    = PNDExample
//   repeat   = 1                        (back-to-back invocations of entry)
//   configs  = small large xlarge my.json
//   int n    = 256
//   arr a    = base 0x10000 len 256 esz 4 init fill 1
//   arr c    = alias a offset 2         (view into a's storage)
//   global g = base 0x30000 init iota   (length and esz come from the decl)
//   call f   = g[3] 7, g[4] 9           (scripted writes per dynamic call)
//   addr_delay 0x0 = 40                 (extra address latency for a PC)
//
// Init forms: `fill V`, `iota [start [stride]]`, `values v0 v1 ...`,
// `random SEED LO HI`.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pndsim/lowering.hpp"
#include "pndsim/ooo.hpp"
#include "pndsim/parse.hpp"

namespace pndsim {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  std::string name;
  std::filesystem::path program_path;
  mir::Program program;
  LoweringInputs inputs;
  std::vector<CpuConfig> configs;
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline std::int64_t to_int(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ScenarioError("line " + std::to_string(line) + ": expected an integer, got '" + s + "'");
  }
}

inline std::vector<std::int64_t> init_values(const std::vector<std::string>& w, std::size_t at, std::int64_t len,
                                             int line) {
  std::vector<std::int64_t> v;
  if (at >= w.size()) throw ScenarioError("line " + std::to_string(line) + ": missing init form");
  const std::string& kind = w[at];
  auto arg = [&](std::size_t k, std::int64_t dflt) {
    return at + k < w.size() ? to_int(w[at + k], line) : dflt;
  };
  if (kind == "fill") {
    v.assign(static_cast<std::size_t>(len), arg(1, 0));
  } else if (kind == "iota") {
    std::int64_t start = arg(1, 0), stride = arg(2, 1);
    for (std::int64_t i = 0; i < len; ++i) v.push_back(start + i * stride);
  } else if (kind == "values") {
    for (std::size_t k = at + 1; k < w.size(); ++k) v.push_back(to_int(w[k], line));
  } else if (kind == "random") {
    std::mt19937_64 rng(static_cast<std::uint64_t>(arg(1, 1)));
    std::int64_t lo = arg(2, 0), hi = arg(3, 1000);
    if (hi < lo) throw ScenarioError("line " + std::to_string(line) + ": random range is empty");
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    for (std::int64_t i = 0; i < len; ++i) v.push_back(lo + static_cast<std::int64_t>(rng() % span));
  } else {
    throw ScenarioError("line " + std::to_string(line) + ": unknown init form '" + kind + "'");
  }
  return v;
}

}  // namespace detail

/// Resolves a config token: a preset name or a JSON file path.
inline CpuConfig resolve_config(const std::string& token, const std::filesystem::path& relative_to = {}) {
  if (auto p = find_preset(token)) return *p;
  std::filesystem::path path(token);
  if (path.is_relative() && !relative_to.empty() && !std::filesystem::exists(path)) path = relative_to / path;
  std::ifstream in(path);
  if (!in) throw ScenarioError("unknown config '" + token + "' (not a preset or readable file)");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ScenarioError("config file " + path.string() + ": " + e.what());
  }
  CpuConfig c = config_from_json(j);
  if (!j.contains("name")) c.name = path.stem().string();
  return c;
}

/// Parses scenario text. `dir` is where relative program and config paths
/// are resolved. Throws ScenarioError, or mir::ParseError/ValidationError for
/// the referenced program.
inline Scenario parse_scenario(const std::string& text, const std::filesystem::path& dir,
                               const std::string& default_name = "scenario") {
  Scenario sc;
  sc.name = default_name;
  std::vector<std::string> config_tokens;
  struct Pending {
    std::string name;
    std::vector<std::string> words;
    int line;
    bool global;
  };
  std::vector<Pending> arrays;
  std::istringstream is(text);
  int line_no = 0;
  for (std::string raw; std::getline(is, raw);) {
    ++line_no;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    std::string line = detail::trim(raw);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ScenarioError("line " + std::to_string(line_no) + ": expected key = value");
    auto lhs = detail::words(line.substr(0, eq));
    std::string rhs = detail::trim(line.substr(eq + 1));
    if (lhs.empty()) throw ScenarioError("line " + std::to_string(line_no) + ": missing key");
    const std::string& key = lhs[0];
    auto need_sub = [&] {
      if (lhs.size() != 2) throw ScenarioError("line " + std::to_string(line_no) + ": '" + key + "' needs a name");
      return lhs[1];
    };
    if (key == "name") {
      sc.name = rhs;
    } else if (key == "program") {
      sc.program_path = dir / rhs;
    } else if (key == "entry") {
      sc.inputs.entry = rhs;
    } else if (key == "repeat") {
      sc.inputs.repeat = static_cast<std::uint32_t>(detail::to_int(rhs, line_no));
    } else if (key == "configs") {
      config_tokens = detail::words(rhs);
    } else if (key == "int") {
      sc.inputs.scalars[need_sub()] = detail::to_int(rhs, line_no);
    } else if (key == "arr" || key == "global") {
      arrays.push_back({need_sub(), detail::words(rhs), line_no, key == "global"});
    } else if (key == "call") {
      std::string callee = need_sub();
      auto& script = sc.inputs.call_scripts[callee];
      std::istringstream parts(rhs);
      for (std::string part; std::getline(parts, part, ',');) {
        auto w = detail::words(part);
        auto lb = w.empty() ? std::string::npos : w[0].find('[');
        if (w.size() != 2 || lb == std::string::npos || w[0].back() != ']')
          throw ScenarioError("line " + std::to_string(line_no) + ": call writes look like 'arr[idx] value'");
        CallWrite cw;
        cw.array = w[0].substr(0, lb);
        cw.index = detail::to_int(w[0].substr(lb + 1, w[0].size() - lb - 2), line_no);
        cw.value = detail::to_int(w[1], line_no);
        script.push_back(cw);
      }
    } else if (key == "addr_delay") {
      auto pc = static_cast<std::uint64_t>(detail::to_int(need_sub(), line_no));
      sc.inputs.addr_delay[pc] = static_cast<std::uint32_t>(detail::to_int(rhs, line_no));
    } else {
      throw ScenarioError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (sc.program_path.empty()) throw ScenarioError("scenario has no 'program'");
  if (sc.inputs.entry.empty()) throw ScenarioError("scenario has no 'entry'");
  sc.program = mir::parse_program_file(sc.program_path.string());

  // Owning placements first so aliases can refer to them.
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& a : arrays) {
      const auto& w = a.words;
      bool alias = !w.empty() && w[0] == "alias";
      if (alias != (pass == 1)) continue;
      ArrayPlacement pl;
      if (alias) {
        if (w.size() < 2) throw ScenarioError("line " + std::to_string(a.line) + ": alias needs a target");
        auto it = sc.inputs.arrays.find(w[1]);
        if (it == sc.inputs.arrays.end())
          throw ScenarioError("line " + std::to_string(a.line) + ": alias target '" + w[1] + "' is not placed");
        std::int64_t off = 0;
        if (w.size() == 4 && w[2] == "offset") off = detail::to_int(w[3], a.line);
        else if (w.size() != 2) throw ScenarioError("line " + std::to_string(a.line) + ": expected 'alias NAME [offset K]'");
        pl = it->second;
        pl.init.clear();
        pl.is_alias = true;
        pl.base += static_cast<std::uint64_t>(off * pl.elem_size);
        pl.length -= off;
      } else {
        const mir::ArrayDecl* decl = a.global ? sc.program.find_global(a.name) : nullptr;
        if (a.global && !decl)
          throw ScenarioError("line " + std::to_string(a.line) + ": no global array '" + a.name + "'");
        if (decl) {
          pl.length = decl->length;
          pl.elem_size = decl->elem_size;
        }
        std::size_t k = 0;
        while (k < w.size()) {
          if (w[k] == "base" && k + 1 < w.size()) {
            pl.base = static_cast<std::uint64_t>(detail::to_int(w[k + 1], a.line));
            k += 2;
          } else if (w[k] == "len" && k + 1 < w.size()) {
            pl.length = detail::to_int(w[k + 1], a.line);
            k += 2;
          } else if (w[k] == "esz" && k + 1 < w.size()) {
            pl.elem_size = detail::to_int(w[k + 1], a.line);
            k += 2;
          } else if (w[k] == "init") {
            pl.init = detail::init_values(w, k + 1, pl.length, a.line);
            break;
          } else {
            throw ScenarioError("line " + std::to_string(a.line) + ": unexpected '" + w[k] + "'");
          }
        }
      }
      sc.inputs.arrays[a.name] = pl;
    }
  }

  if (config_tokens.empty()) config_tokens = {"small", "large", "xlarge"};
  for (const auto& t : config_tokens) sc.configs.push_back(resolve_config(t, dir));
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.parent_path(), path.stem().string());
}

}  // namespace pndsim
