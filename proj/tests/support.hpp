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

// Test-only helpers: a random program generator and a brute-force address
// enumerator that walks the program tree directly (no lowering).

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "pndsim/analysis.hpp"
#include "pndsim/lowering.hpp"
#include "pndsim/parse.hpp"

namespace pndsim::testsupport {

struct GenOptions {
  int max_depth = 2;
  std::int64_t max_trip = 512;
  std::int64_t max_iterations = 16384;  // per outermost nest
};

/// A generated program with concrete placements. Non-restrict array
/// parameters share one buffer at random element offsets, which is the
/// worst case the analysis has to tolerate.
struct RandomCase {
  std::string text;
  mir::Program program;
  LoweringInputs inputs;
};

namespace detail {

struct Gen {
  std::mt19937_64& rng;
  GenOptions opt;
  std::ostringstream os;
  std::vector<std::string> arrays;    // every array name visible in the body
  std::vector<std::string> writable;  // arrays a store may target
  std::vector<std::string> regs;
  int next_reg = 0;
  int stmts = 0;
  std::int64_t n = 0;                // value bound to the scalar parameter
  std::vector<std::int64_t> outer_max;  // largest value of each open ivar

  int uni(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng); }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(uni(0, static_cast<int>(v.size()) - 1))]; }

  std::string index(const std::vector<std::string>& ivars) {
    static const int coefs[] = {1, 1, 1, 2, 2, 3, -1, -2};
    if (ivars.empty() || coin(0.12)) return std::to_string(uni(0, 12));
    std::string out;
    std::int64_t k = uni(0, 6);
    int nterms = ivars.size() > 1 && coin(0.25) ? 2 : 1;
    std::vector<std::string> used;
    if (nterms == 2) {
      used = ivars;
    } else {
      used.push_back(coin(0.7) ? ivars.back() : pick(ivars));
    }
    bool first = true;
    for (const auto& v : used) {
      int c = coefs[uni(0, 7)];
      if (c < 0) k += static_cast<std::int64_t>(-c) * opt.max_trip * 3;  // keep indices non-negative
      std::string term = (std::abs(c) == 1 ? "" : std::to_string(std::abs(c)) + "*") + v;
      if (first) {
        out = c < 0 ? std::to_string(k) + " - " + term : term;
        if (c < 0) k = 0;
      } else {
        out += (c < 0 ? " - " : " + ") + term;
      }
      first = false;
    }
    if (k > 0) out += " + " + std::to_string(k);
    return out;
  }

  std::string reg_or_ivar(const std::vector<std::string>& ivars) {
    if (!ivars.empty() && (regs.empty() || coin(0.3))) return pick(ivars);
    if (regs.empty()) return fresh_reg();
    return pick(regs);
  }

  std::string fresh_reg() {
    std::string r = "r" + std::to_string(next_reg++);
    regs.push_back(r);
    return r;
  }

  void instr(const std::string& pad, const std::vector<std::string>& ivars) {
    ++stmts;
    int kind = uni(0, 9);
    if (kind < 4) {
      std::string dst = regs.size() < 6 || coin(0.5) ? fresh_reg() : pick(regs);
      os << pad << "load " << dst << " = " << pick(arrays) << "[" << index(ivars) << "]\n";
    } else if (kind < 7 && !writable.empty()) {
      std::string src = reg_or_ivar(ivars);
      os << pad << "store " << pick(writable) << "[" << index(ivars) << "] = " << src << "\n";
    } else if (kind < 9) {
      static const char* ops[] = {"+", "-", "*", "&", "|", "^"};
      std::string a = reg_or_ivar(ivars), b = reg_or_ivar(ivars);
      std::string dst = regs.size() < 6 || coin(0.3) ? fresh_reg() : pick(regs);
      os << pad << "alu " << dst << " = " << a << " " << ops[uni(0, 5)] << " " << b << "\n";
    } else {
      os << pad << "call f" << uni(0, 2) << " reads(*) writes(";
      if (coin(0.2)) {
        os << "*";
      } else {
        std::set<std::string> names;
        int n = uni(0, 2);
        for (int k = 0; k < n && !writable.empty(); ++k) names.insert(pick(writable));
        bool first = true;
        for (const auto& nm : names) {
          os << (first ? "" : ", ") << nm;
          first = false;
        }
      }
      os << ")\n";
    }
  }

  /// Emits a loop with a trip count chosen so the nest stays within budget.
  void loop(const std::string& pad, std::vector<std::string>& ivars, int depth, std::int64_t budget) {
    static const char* names[] = {"i", "j", "k"};
    std::string iv = names[ivars.size()];
    std::int64_t max_trip = std::min<std::int64_t>(opt.max_trip, std::max<std::int64_t>(budget, 1));
    std::int64_t trip = std::uniform_int_distribution<std::int64_t>(0, max_trip)(rng);
    if (coin(0.05)) trip = 0;
    static const int steps[] = {1, 1, 1, 2, 3, -1, -2};
    int step = steps[uni(0, 6)];
    std::string lo, hi;
    std::int64_t ivar_max = 0;
    if (step > 0) {
      std::int64_t start = uni(0, 4);
      lo = std::to_string(start);
      hi = std::to_string(start + trip * step);
      if (step == 1 && start == 0 && ivars.empty() && n <= max_trip && coin(0.3)) {
        hi = "n";
        trip = n;
      } else if (step == 1 && start == 0 && !ivars.empty() && outer_max.back() <= max_trip && coin(0.15)) {
        hi = ivars.back();  // triangular
        trip = outer_max.back();
      }
      ivar_max = start + trip * step;
    } else {
      std::int64_t start = trip * (-step) + uni(0, 3);
      lo = std::to_string(start);
      hi = std::to_string(start - trip * (-step));
      ivar_max = start;
    }
    os << pad << "for " << iv << " = " << lo << " to " << hi << " step " << step << " {\n";
    ivars.push_back(iv);
    outer_max.push_back(ivar_max);
    int count = uni(1, 5);
    for (int s = 0; s < count; ++s) {
      if (depth < opt.max_depth && coin(0.25))
        loop(pad + "  ", ivars, depth + 1, std::max<std::int64_t>(budget / std::max<std::int64_t>(trip, 1), 1));
      else
        instr(pad + "  ", ivars);
    }
    outer_max.pop_back();
    ivars.pop_back();
    os << pad << "}\n";
  }
};

/// Independent enumeration of affine indices over the loop tree.
struct Walker {
  const mir::Program& prog;
  std::map<std::string, std::int64_t> env;

  std::int64_t eval(const mir::Affine& a) const {
    std::int64_t v = a.offset;
    for (const auto& t : a.terms) v += t.coef * env.at(t.name);
    return v;
  }

  template <class F>
  void walk(const std::vector<mir::Stmt>& body, F&& f) {
    for (const auto& s : body) {
      if (!s.is_loop()) {
        f(s.instr());
        continue;
      }
      const mir::Loop& l = s.loop();
      std::int64_t lo = eval(l.lower), hi = eval(l.upper);
      for (std::int64_t v = lo; l.step > 0 ? v < hi : v > hi; v += l.step) {
        env[l.ivar] = v;
        walk(l.body, f);
      }
      env.erase(l.ivar);
    }
  }
};

}  // namespace detail

/// Generates one valid program with a single function `F(arrays..., int n)`
/// and placements for every array. Indices are non-negative by construction.
inline RandomCase random_case(std::mt19937_64& rng, GenOptions opt = {}) {
  for (;;) {
    detail::Gen g{rng, opt, {}, {}, {}, {}, 0, 0, 0, {}};
    g.n = std::uniform_int_distribution<std::int64_t>(0, opt.max_trip)(rng);
    int nparams = g.uni(2, 4);
    int nglobals = g.uni(0, 2);
    struct P {
      std::string name;
      bool restrict_, readonly;
    };
    std::vector<P> params;
    for (int k = 0; k < nglobals; ++k) g.os << "array G" << k << "[16384] esz 4\n";
    for (int k = 0; k < nparams; ++k) {
      P p{"A" + std::to_string(k), g.coin(0.35), g.coin(0.25)};
      params.push_back(p);
    }
    g.os << "fn F(";
    for (const auto& p : params)
      g.os << "arr " << p.name << (p.restrict_ ? " restrict" : "") << (p.readonly ? " readonly" : "") << ", ";
    g.os << "int n) {\n";
    for (const auto& p : params) {
      g.arrays.push_back(p.name);
      if (!p.readonly) g.writable.push_back(p.name);
    }
    for (int k = 0; k < nglobals; ++k) {
      g.arrays.push_back("G" + std::to_string(k));
      g.writable.push_back("G" + std::to_string(k));
    }
    int top = g.uni(1, 3);
    for (int t = 0; t < top; ++t) {
      std::vector<std::string> ivars;
      if (g.coin(0.15)) g.instr("  ", ivars);
      g.loop("  ", ivars, 1, opt.max_iterations);
    }
    g.os << "}\n";

    RandomCase rc;
    rc.text = g.os.str();
    rc.program = mir::parse_program(rc.text);
    std::int64_t n = g.n;
    rc.inputs.entry = "F";
    rc.inputs.scalars["n"] = n;

    // Size every array from the indices it actually touches.
    std::map<std::string, std::int64_t> max_idx;
    bool negative = false;
    detail::Walker w{rc.program, {{"n", n}}};
    w.walk(rc.program.functions[0].body, [&](const mir::Instr& in) {
      if (!in.addr) return;
      std::int64_t idx = w.eval(in.addr->index);
      if (idx < 0) negative = true;
      auto& m = max_idx[in.addr->base];
      m = std::max(m, idx);
    });
    if (negative) continue;

    std::uniform_int_distribution<std::int64_t> val(-1000, 1000);
    auto fill = [&](std::int64_t len) {
      std::vector<std::int64_t> v(static_cast<std::size_t>(len));
      for (auto& x : v) x = val(rng);
      return v;
    };
    std::uint64_t next_base = 0x100000;
    std::int64_t shared_len = 0;
    std::vector<std::pair<std::string, std::int64_t>> shared;  // name, element offset
    for (const auto& p : params) {
      std::int64_t len = max_idx.count(p.name) ? max_idx[p.name] + 1 : 1;
      ArrayPlacement pl;
      pl.length = len;
      pl.elem_size = 4;
      if (p.restrict_ || p.readonly) {
        pl.base = next_base;
        pl.init = fill(len);
        next_base += 0x100000;
        rc.inputs.arrays[p.name] = pl;
      } else {
        std::int64_t off = g.coin(0.5) ? 0 : g.uni(0, 8);
        shared.push_back({p.name, off});
        shared_len = std::max(shared_len, off + len);
        pl.base = 0x8000000 + static_cast<std::uint64_t>(off) * 4;
        pl.is_alias = true;
        rc.inputs.arrays[p.name] = pl;
      }
    }
    if (!shared.empty()) {
      ArrayPlacement owner;
      owner.base = 0x8000000;
      owner.length = shared_len;
      owner.elem_size = 4;
      owner.init = fill(shared_len);
      // The first sharer owns the storage for initial_state().
      auto& first = rc.inputs.arrays[shared.front().first];
      std::int64_t off = shared.front().second;
      first.is_alias = false;
      first.init.assign(owner.init.begin() + off, owner.init.begin() + off + first.length);
      for (std::size_t k = 1; k < shared.size(); ++k) {
        auto& pl = rc.inputs.arrays[shared[k].first];
        // Bytes outside the owner's range need their own initial values.
        std::int64_t o = shared[k].second;
        if (o < off || o + pl.length > off + first.length) {
          pl.is_alias = false;
          pl.init.assign(owner.init.begin() + o, owner.init.begin() + o + pl.length);
        }
      }
    }
    for (int k = 0; k < nglobals; ++k) {
      ArrayPlacement pl;
      pl.base = 0x20000000 + static_cast<std::uint64_t>(k) * 0x100000;
      pl.init = fill(64);
      rc.inputs.arrays["G" + std::to_string(k)] = pl;
    }
    return rc;
  }
}

/// A labelled load whose dynamic reads meet a same-nest dynamic write.
struct SoundnessViolation {
  std::uint64_t load_pc = 0;
  std::uint64_t byte = 0;
};

/// Brute force over each outermost nest: collects every byte written by a
/// store (or possibly written by a call, per its summary) and checks that no
/// pnd load in the same nest reads any of them.
inline std::vector<SoundnessViolation> check_soundness(const mir::Program& labelled, const LoweringInputs& in) {
  const mir::Function& fn = *labelled.find_function(in.entry);
  std::map<std::string, ArrayPlacement> pl = resolve_placements(labelled, in);
  auto bytes_of = [&](const std::string& base, std::int64_t idx, auto&& out) {
    const auto& p = pl.at(base);
    for (std::int64_t b = 0; b < p.elem_size; ++b) out(p.base + static_cast<std::uint64_t>(idx * p.elem_size + b));
  };
  auto writable = [&](const std::string& name) {
    const mir::Param* p = fn.find_param(name);
    return !(p && p->readonly);
  };

  std::vector<SoundnessViolation> bad;
  for (const auto& top : fn.body) {
    if (!top.is_loop()) continue;
    std::vector<mir::Stmt> nest{top};
    detail::Walker w{labelled, {}};
    for (const auto& [k, v] : in.scalars) w.env[k] = v;

    std::unordered_set<std::uint64_t> written;
    std::set<std::string> call_written;  // whole arrays, expanded once below
    std::vector<std::pair<std::uint64_t, std::uint64_t>> reads;  // pc, byte
    w.walk(nest, [&](const mir::Instr& ins) {
      switch (ins.kind) {
        case mir::InstrKind::Store:
          bytes_of(ins.addr->base, w.eval(ins.addr->index), [&](std::uint64_t b) { written.insert(b); });
          break;
        case mir::InstrKind::Load:
          if (ins.pnd)
            bytes_of(ins.addr->base, w.eval(ins.addr->index),
                     [&](std::uint64_t b) { reads.push_back({ins.id * 4ull, b}); });
          break;
        case mir::InstrKind::Call:
          for (const auto& [name, p] : pl) {
            if (ins.summary.may_write_to(name) && writable(name)) call_written.insert(name);
          }
          break;
        case mir::InstrKind::Alu: break;
      }
    });
    for (const auto& name : call_written)
      for (std::int64_t i = 0; i < pl.at(name).length; ++i)
        bytes_of(name, i, [&](std::uint64_t b) { written.insert(b); });
    for (const auto& [pc, b] : reads)
      if (written.count(b)) bad.push_back({pc, b});
  }
  return bad;
}

}  // namespace pndsim::testsupport
