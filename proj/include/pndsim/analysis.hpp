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

// Nest-scoped "predict no dependency" labelling. Every load inside a loop nest
// is paired with every store and call of the same outermost nest; a load is
// labelled only when each pair is proven dependence-free.

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pndsim/mir.hpp"

namespace pndsim::analysis {

using mir::AddrExpr;
using mir::Function;
using mir::Instr;
using mir::Loop;
using mir::Program;

enum class AliasResult { NoAlias, MayAlias };

enum class DepValue { NoDep, MayDep };

enum class DepReason {
  DistinctRestrictBases,
  DistinctObjects,
  ReadOnlyBase,
  DisjointAffine,
  DisjointModRef,
  Conservative,
};

inline const char* to_string(DepReason r) {
  switch (r) {
    case DepReason::DistinctRestrictBases: return "DistinctRestrictBases";
    case DepReason::DistinctObjects: return "DistinctObjects";
    case DepReason::ReadOnlyBase: return "ReadOnlyBase";
    case DepReason::DisjointAffine: return "DisjointAffine";
    case DepReason::DisjointModRef: return "DisjointModRef";
    case DepReason::Conservative: return "Conservative";
  }
  return "?";
}

struct DepResult {
  DepValue value = DepValue::MayDep;
  DepReason reason = DepReason::Conservative;

  static DepResult no_dep(DepReason r) { return {DepValue::NoDep, r}; }
  static DepResult may_dep() { return {DepValue::MayDep, DepReason::Conservative}; }
  bool is_no_dep() const { return value == DepValue::NoDep; }
  bool operator==(const DepResult&) const = default;
};

/// The function an access lives in, plus the program's globals.
struct Scope {
  const Program* prog = nullptr;
  const Function* fn = nullptr;
};

/// An address together with its enclosing loops, outermost first.
struct Access {
  const AddrExpr* addr = nullptr;
  std::vector<const Loop*> loops;
};

namespace detail {

inline bool is_restrict(const Scope& s, const std::string& base) {
  const mir::Param* p = s.fn->find_param(base);
  return p && p->restrict_;
}

inline bool is_readonly(const Scope& s, const std::string& base) {
  const mir::Param* p = s.fn->find_param(base);
  return p && p->readonly;
}

inline bool is_global(const Scope& s, const std::string& base) {
  return !s.fn->find_param(base) && s.prog->find_global(base);
}

/// Decides a pair of distinct base names. nullopt means they may overlap.
inline std::optional<DepReason> distinct_bases(const Scope& s, const std::string& a,
                                               const std::string& b) {
  if (is_global(s, a) && is_global(s, b)) return DepReason::DistinctObjects;
  if (is_restrict(s, a) || is_restrict(s, b)) return DepReason::DistinctRestrictBases;
  return std::nullopt;
}

inline const Loop* owning_loop(const std::vector<const Loop*>& loops, const std::string& ivar) {
  for (auto it = loops.rbegin(); it != loops.rend(); ++it)
    if ((*it)->ivar == ivar) return *it;
  return nullptr;
}

struct StaticRange {
  std::int64_t trip = 0;
  std::int64_t span = 0;  // |last - first| over the ivar values
};

inline std::optional<StaticRange> static_range(const Loop& l) {
  if (!l.lower.is_constant() || !l.upper.is_constant() || l.step == 0) return std::nullopt;
  std::int64_t lo = l.lower.offset, hi = l.upper.offset, st = l.step;
  std::int64_t trip = 0;
  if (st > 0 && lo < hi) trip = (hi - lo + st - 1) / st;
  if (st < 0 && lo > hi) trip = (lo - hi + (-st) - 1) / (-st);
  StaticRange r;
  r.trip = trip;
  r.span = trip > 0 ? (trip - 1) * std::llabs(st) : 0;
  return r;
}

}  // namespace detail

/// Affine dependence test for two accesses to the same base. Handles ZIV and
/// strong SIV; anything else is conservatively MayDep.
inline DepResult dep_test(const Access& load, const Access& store) {
  const mir::Affine& li = load.addr->index;
  const mir::Affine& si = store.addr->index;

  if (li.is_constant() && si.is_constant()) {
    if (li.offset != si.offset) return DepResult::no_dep(DepReason::DisjointAffine);
    return DepResult::may_dep();
  }

  if (li.terms.size() == 1 && si.terms.size() == 1 && li.terms[0].name == si.terms[0].name &&
      li.terms[0].coef == si.terms[0].coef) {
    const std::string& ivar = li.terms[0].name;
    const Loop* ll = detail::owning_loop(load.loops, ivar);
    const Loop* sl = detail::owning_loop(store.loops, ivar);
    // Same name bound by two different loops is not a single iteration space.
    if (ll == nullptr || ll != sl) return DepResult::may_dep();

    std::int64_t c = li.terms[0].coef;
    std::int64_t delta = si.offset - li.offset;
    if (delta % c != 0) return DepResult::no_dep(DepReason::DisjointAffine);
    std::int64_t distance = std::llabs(delta / c);
    if (auto r = detail::static_range(*ll)) {
      if (r->trip == 0 || distance > r->span) return DepResult::no_dep(DepReason::DisjointAffine);
    }
    return DepResult::may_dep();
  }

  return DepResult::may_dep();
}

inline AliasResult alias_query(const Scope& s, const Access& a, const Access& b) {
  const std::string& ab = a.addr->base;
  const std::string& bb = b.addr->base;
  if (ab != bb) return detail::distinct_bases(s, ab, bb) ? AliasResult::NoAlias : AliasResult::MayAlias;
  return dep_test(a, b).is_no_dep() ? AliasResult::NoAlias : AliasResult::MayAlias;
}

/// Dependence between a load and a store of the same nest.
inline DepResult store_dependence(const Scope& s, const Access& load, const Access& store) {
  const std::string& lb = load.addr->base;
  const std::string& sb = store.addr->base;
  if (detail::is_readonly(s, lb)) return DepResult::no_dep(DepReason::ReadOnlyBase);
  if (lb != sb) {
    if (auto r = detail::distinct_bases(s, lb, sb)) return DepResult::no_dep(*r);
    return DepResult::may_dep();
  }
  return dep_test(load, store);
}

/// Whether a call can write what the load reads. Reads never block.
inline DepResult modref_blocks(const Scope& s, const mir::ModRefSummary& call, const AddrExpr& load) {
  if (detail::is_readonly(s, load.base)) return DepResult::no_dep(DepReason::ReadOnlyBase);
  if (call.writes_unknown()) return DepResult::may_dep();
  for (const auto& w : *call.may_write) {
    if (w == load.base || !detail::distinct_bases(s, w, load.base)) return DepResult::may_dep();
  }
  return DepResult::no_dep(DepReason::DisjointModRef);
}

// ---------------------------------------------------------------------------
// Labelling pass

struct Blocker {
  std::uint64_t pc = 0;
  DepResult dep;
  bool operator==(const Blocker&) const = default;
};

struct LoadLabel {
  std::uint64_t pc = 0;
  bool labelled = false;
  std::vector<Blocker> blockers;
  bool operator==(const LoadLabel&) const = default;
};

/// One entry per load that sits inside a loop nest, in textual order. Loads
/// outside every loop are never candidates and are not listed.
struct LabelReport {
  std::vector<LoadLabel> loads;

  std::size_t labelled_count() const {
    std::size_t n = 0;
    for (const auto& l : loads) n += l.labelled;
    return n;
  }
  const LoadLabel* find(std::uint64_t pc) const {
    for (const auto& l : loads)
      if (l.pc == pc) return &l;
    return nullptr;
  }
  bool operator==(const LabelReport&) const = default;
};

inline std::uint64_t pc_of(mir::StaticId id) { return static_cast<std::uint64_t>(id) * 4; }

inline nlohmann::json to_json(const LabelReport& r) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : r.loads) {
    nlohmann::json blockers = nlohmann::json::array();
    for (const auto& b : l.blockers) blockers.push_back({{"pc", b.pc}, {"reason", to_string(b.dep.reason)}});
    arr.push_back({{"pc", l.pc}, {"labelled", l.labelled}, {"blockers", blockers}});
  }
  return arr;
}

namespace detail {

struct NestItem {
  const Instr* instr;
  std::vector<const Loop*> loops;
};

inline void collect_nest(const Loop& outer, std::vector<NestItem>& out) {
  std::vector<const Loop*> stack{&outer};
  mir::for_each_instr(
      outer.body, [&](const Instr& in, const std::vector<const Loop*>& loops) { out.push_back({&in, loops}); },
      stack);
}

inline void label_nest(const Scope& scope, const Loop& outer, mir::Loop& outer_mut, LabelReport& report) {
  std::vector<NestItem> items;
  collect_nest(outer, items);

  std::vector<mir::StaticId> labelled_ids;
  for (const auto& ld : items) {
    if (ld.instr->kind != mir::InstrKind::Load) continue;
    LoadLabel entry;
    entry.pc = pc_of(ld.instr->id);
    Access load_acc{&*ld.instr->addr, ld.loops};
    for (const auto& other : items) {
      DepResult dep;
      if (other.instr->kind == mir::InstrKind::Store) {
        dep = store_dependence(scope, load_acc, Access{&*other.instr->addr, other.loops});
      } else if (other.instr->kind == mir::InstrKind::Call) {
        dep = modref_blocks(scope, other.instr->summary, *ld.instr->addr);
      } else {
        continue;
      }
      if (!dep.is_no_dep()) entry.blockers.push_back({pc_of(other.instr->id), dep});
    }
    entry.labelled = entry.blockers.empty();
    if (entry.labelled) labelled_ids.push_back(ld.instr->id);
    report.loads.push_back(std::move(entry));
  }

  mir::for_each_instr_mut(outer_mut.body, [&](Instr& in) {
    for (auto id : labelled_ids)
      if (in.id == id) in.pnd = true;
  });
}

}  // namespace detail

struct LabelResult {
  Program program;
  LabelReport report;
};

/// Clears any existing pnd flags, then labels every load proven free of
/// dependences on all stores and calls within its outermost enclosing loop.
inline LabelResult label_pass(const Program& input) {
  LabelResult res{input, {}};
  for (auto& fn : res.program.functions)
    mir::for_each_instr_mut(fn.body, [](Instr& in) { in.pnd = false; });

  // Analysis reads from `input` (same shape) while flags go into the copy.
  for (std::size_t f = 0; f < input.functions.size(); ++f) {
    const Function& fn = input.functions[f];
    Scope scope{&input, &fn};
    for (std::size_t k = 0; k < fn.body.size(); ++k) {
      if (!fn.body[k].is_loop()) continue;
      detail::label_nest(scope, fn.body[k].loop(), res.program.functions[f].body[k].loop(), res.report);
    }
  }
  return res;
}

}  // namespace pndsim::analysis
