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

// Mini loop IR: programs are lists of global arrays and functions whose bodies
// are counted loops over affine array accesses.

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pndsim::mir {

using StaticId = std::uint32_t;

/// Sum of `coef * name` terms plus a constant. Terms are kept merged (one per
/// name, in first-appearance order) with zero coefficients dropped, so two
/// affine values that print the same compare equal.
struct Affine {
  struct Term {
    std::int64_t coef = 0;
    std::string name;
    bool operator==(const Term&) const = default;
  };
  std::vector<Term> terms;
  std::int64_t offset = 0;

  static Affine constant(std::int64_t c) { return Affine{{}, c}; }
  static Affine var(std::string name, std::int64_t coef = 1) {
    Affine a;
    a.add_term(coef, std::move(name));
    return a;
  }

  void add_term(std::int64_t coef, const std::string& name) {
    for (auto it = terms.begin(); it != terms.end(); ++it) {
      if (it->name == name) {
        it->coef += coef;
        if (it->coef == 0) terms.erase(it);
        return;
      }
    }
    if (coef != 0) terms.push_back({coef, name});
  }

  Affine& operator+=(const Affine& o) {
    for (const auto& t : o.terms) add_term(t.coef, t.name);
    offset += o.offset;
    return *this;
  }
  Affine& operator-=(const Affine& o) {
    for (const auto& t : o.terms) add_term(-t.coef, t.name);
    offset -= o.offset;
    return *this;
  }

  bool is_constant() const { return terms.empty(); }

  std::int64_t coef_of(const std::string& name) const {
    for (const auto& t : terms)
      if (t.name == name) return t.coef;
    return 0;
  }

  /// Evaluates with `lookup` supplying every named value.
  std::int64_t eval(const std::function<std::int64_t(const std::string&)>& lookup) const {
    std::int64_t v = offset;
    for (const auto& t : terms) v += t.coef * lookup(t.name);
    return v;
  }

  bool operator==(const Affine&) const = default;
};

/// Array access `base[index]`, index in element units.
struct AddrExpr {
  std::string base;
  Affine index;
  bool operator==(const AddrExpr&) const = default;
};

/// Declared may-read / may-write sets of a call. nullopt means Unknown (`*`),
/// which subsumes every set.
struct ModRefSummary {
  std::optional<std::set<std::string>> may_read = std::set<std::string>{};
  std::optional<std::set<std::string>> may_write = std::set<std::string>{};

  bool writes_unknown() const { return !may_write.has_value(); }
  bool may_write_to(const std::string& base) const {
    return !may_write || may_write->count(base) != 0;
  }
  bool operator==(const ModRefSummary&) const = default;
};

enum class InstrKind { Load, Store, Call, Alu };

inline const char* to_string(InstrKind k) {
  switch (k) {
    case InstrKind::Load: return "load";
    case InstrKind::Store: return "store";
    case InstrKind::Call: return "call";
    case InstrKind::Alu: return "alu";
  }
  return "?";
}

enum class AluOp { Add, Sub, Mul, And, Or, Xor };

inline const char* to_string(AluOp op) {
  switch (op) {
    case AluOp::Add: return "+";
    case AluOp::Sub: return "-";
    case AluOp::Mul: return "*";
    case AluOp::And: return "&";
    case AluOp::Or: return "|";
    case AluOp::Xor: return "^";
  }
  return "?";
}

inline std::int64_t apply(AluOp op, std::int64_t a, std::int64_t b) {
  // Wrapping arithmetic; done in unsigned to keep overflow defined.
  auto ua = static_cast<std::uint64_t>(a);
  auto ub = static_cast<std::uint64_t>(b);
  switch (op) {
    case AluOp::Add: return static_cast<std::int64_t>(ua + ub);
    case AluOp::Sub: return static_cast<std::int64_t>(ua - ub);
    case AluOp::Mul: return static_cast<std::int64_t>(ua * ub);
    case AluOp::And: return a & b;
    case AluOp::Or: return a | b;
    case AluOp::Xor: return a ^ b;
  }
  return 0;
}

/// One static instruction. `id` is assigned densely in textual order and
/// becomes the PC (id * 4) after lowering.
///
/// Operand conventions by kind:
///   Load:  dst = base[addr]
///   Store: base[addr] = srcs[0]
///   Alu:   dst = srcs[0] op srcs[1]
///   Call:  callee, summary
/// A source naming an enclosing induction variable reads that variable.
struct Instr {
  StaticId id = 0;
  InstrKind kind = InstrKind::Alu;
  std::optional<AddrExpr> addr;
  std::string dst;
  std::vector<std::string> srcs;
  AluOp op = AluOp::Add;
  std::string callee;
  ModRefSummary summary;
  bool pnd = false;

  bool is_mem() const { return kind == InstrKind::Load || kind == InstrKind::Store; }
  bool operator==(const Instr&) const = default;
};

struct Stmt;

struct Loop {
  std::string ivar;
  Affine lower;
  Affine upper;
  std::int64_t step = 1;
  std::vector<Stmt> body;

  bool operator==(const Loop&) const;
};

struct Stmt {
  std::variant<Loop, Instr> node;

  bool is_loop() const { return std::holds_alternative<Loop>(node); }
  const Loop& loop() const { return std::get<Loop>(node); }
  Loop& loop() { return std::get<Loop>(node); }
  const Instr& instr() const { return std::get<Instr>(node); }
  Instr& instr() { return std::get<Instr>(node); }

  bool operator==(const Stmt&) const = default;
};

inline bool Loop::operator==(const Loop&) const = default;

enum class ParamKind { Array, Scalar };

struct Param {
  std::string name;
  ParamKind kind = ParamKind::Array;
  bool restrict_ = false;
  bool readonly = false;
  bool operator==(const Param&) const = default;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  std::vector<Stmt> body;

  const Param* find_param(const std::string& n) const {
    for (const auto& p : params)
      if (p.name == n) return &p;
    return nullptr;
  }
  bool operator==(const Function&) const = default;
};

struct ArrayDecl {
  std::string name;
  std::int64_t length = 0;
  std::int64_t elem_size = 4;
  bool operator==(const ArrayDecl&) const = default;
};

struct Program {
  std::vector<ArrayDecl> globals;
  std::vector<Function> functions;

  const ArrayDecl* find_global(const std::string& n) const {
    for (const auto& g : globals)
      if (g.name == n) return &g;
    return nullptr;
  }
  const Function* find_function(const std::string& n) const {
    for (const auto& f : functions)
      if (f.name == n) return &f;
    return nullptr;
  }
  bool operator==(const Program&) const = default;
};

// ---------------------------------------------------------------------------
// Traversal helpers

/// Visits every instruction in `body` with the stack of enclosing loops
/// (outermost first).
template <typename F>
void for_each_instr(const std::vector<Stmt>& body, F&& f,
                    std::vector<const Loop*>& stack) {
  for (const auto& s : body) {
    if (s.is_loop()) {
      stack.push_back(&s.loop());
      for_each_instr(s.loop().body, f, stack);
      stack.pop_back();
    } else {
      f(s.instr(), static_cast<const std::vector<const Loop*>&>(stack));
    }
  }
}

template <typename F>
void for_each_instr(const std::vector<Stmt>& body, F&& f) {
  std::vector<const Loop*> stack;
  for_each_instr(body, f, stack);
}

template <typename F>
void for_each_instr_mut(std::vector<Stmt>& body, F&& f) {
  for (auto& s : body) {
    if (s.is_loop())
      for_each_instr_mut(s.loop().body, f);
    else
      f(s.instr());
  }
}

/// Reassigns static ids densely in textual order across the whole program.
inline void renumber(Program& p) {
  StaticId next = 0;
  for (auto& fn : p.functions)
    for_each_instr_mut(fn.body, [&](Instr& i) { i.id = next++; });
}

inline std::size_t count_instrs(const Program& p) {
  std::size_t n = 0;
  for (const auto& fn : p.functions) for_each_instr(fn.body, [&](const Instr&, auto&) { ++n; });
  return n;
}

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  std::string function;
  std::string message;
  bool operator==(const Diagnostic&) const = default;
};

namespace detail {

struct Validator {
  const Program& prog;
  std::vector<Diagnostic> out;
  std::set<StaticId> seen_ids;

  void report(const std::string& fn, std::string msg) { out.push_back({fn, std::move(msg)}); }

  bool is_array(const Function& fn, const std::string& n) const {
    if (const Param* p = fn.find_param(n)) return p->kind == ParamKind::Array;
    return prog.find_global(n) != nullptr;
  }

  bool is_readonly(const Function& fn, const std::string& n) const {
    const Param* p = fn.find_param(n);
    return p && p->readonly;
  }

  static bool is_ivar(const std::vector<const Loop*>& loops, const std::string& n) {
    for (const Loop* l : loops)
      if (l->ivar == n) return true;
    return false;
  }

  void check_bound(const Function& fn, const Affine& e, const std::vector<const Loop*>& loops,
                   const char* which) {
    for (const auto& t : e.terms) {
      const Param* p = fn.find_param(t.name);
      bool ok = (p && p->kind == ParamKind::Scalar) || is_ivar(loops, t.name);
      if (!ok)
        report(fn.name, std::string("loop ") + which + " bound uses '" + t.name +
                            "', which is neither a scalar parameter nor an enclosing induction variable");
    }
  }

  void check_instr(const Function& fn, const Instr& in, const std::vector<const Loop*>& loops) {
    if (!seen_ids.insert(in.id).second)
      report(fn.name, "duplicate static id " + std::to_string(in.id));
    if (in.pnd && in.kind != InstrKind::Load)
      report(fn.name, std::string("pnd flag on non-load (") + to_string(in.kind) + ")");
    if (in.is_mem() != in.addr.has_value())
      report(fn.name, std::string(to_string(in.kind)) +
                          (in.is_mem() ? " is missing an address" : " must not carry an address"));
    if (in.addr) {
      if (!is_array(fn, in.addr->base))
        report(fn.name, "reference to undeclared array '" + in.addr->base + "'");
      for (const auto& t : in.addr->index.terms)
        if (!is_ivar(loops, t.name))
          report(fn.name, "address of '" + in.addr->base + "' uses '" + t.name +
                              "', which is not an enclosing induction variable");
      if (in.kind == InstrKind::Store && is_readonly(fn, in.addr->base))
        report(fn.name, "store to readonly parameter '" + in.addr->base + "'");
    }
    if (!in.dst.empty() && is_ivar(loops, in.dst))
      report(fn.name, "induction variable '" + in.dst + "' reassigned in loop body");
    std::size_t want_srcs = in.kind == InstrKind::Alu ? 2 : in.kind == InstrKind::Store ? 1 : 0;
    if (in.srcs.size() != want_srcs)
      report(fn.name, std::string(to_string(in.kind)) + " expects " + std::to_string(want_srcs) +
                          " source operand(s)");
    bool wants_dst = in.kind == InstrKind::Load || in.kind == InstrKind::Alu;
    if (wants_dst == in.dst.empty())
      report(fn.name, std::string(to_string(in.kind)) +
                          (wants_dst ? " needs a destination register" : " has no destination register"));
    if (in.kind == InstrKind::Call) {
      auto check_names = [&](const std::optional<std::set<std::string>>& names, bool writes) {
        if (!names) return;
        for (const auto& n : *names) {
          if (!is_array(fn, n))
            report(fn.name, "call to '" + in.callee + "' references undeclared array '" + n + "'");
          else if (writes && is_readonly(fn, n))
            report(fn.name, "call to '" + in.callee + "' writes readonly parameter '" + n + "'");
        }
      };
      check_names(in.summary.may_read, false);
      check_names(in.summary.may_write, true);
    }
  }

  void check_body(const Function& fn, const std::vector<Stmt>& body,
                  std::vector<const Loop*>& loops) {
    for (const auto& s : body) {
      if (s.is_loop()) {
        const Loop& l = s.loop();
        if (l.step == 0) report(fn.name, "loop over '" + l.ivar + "' has step 0");
        if (is_ivar(loops, l.ivar))
          report(fn.name, "loop reuses enclosing induction variable '" + l.ivar + "'");
        if (fn.find_param(l.ivar) || prog.find_global(l.ivar))
          report(fn.name, "induction variable '" + l.ivar + "' shadows a declared name");
        check_bound(fn, l.lower, loops, "lower");
        check_bound(fn, l.upper, loops, "upper");
        loops.push_back(&l);
        check_body(fn, l.body, loops);
        loops.pop_back();
      } else {
        check_instr(fn, s.instr(), loops);
      }
    }
  }

  void run() {
    std::set<std::string> names;
    for (const auto& g : prog.globals) {
      if (!names.insert(g.name).second) report("", "duplicate array '" + g.name + "'");
      if (g.length <= 0 || g.elem_size <= 0 || g.elem_size > 8)
        report("", "array '" + g.name + "' needs positive length and element size in 1..8");
    }
    std::set<std::string> fn_names;
    for (const auto& fn : prog.functions) {
      if (!fn_names.insert(fn.name).second) report(fn.name, "duplicate function name '" + fn.name + "'");
      std::set<std::string> pnames;
      for (const auto& p : fn.params) {
        if (!pnames.insert(p.name).second)
          report(fn.name, "duplicate parameter '" + p.name + "'");
        if (prog.find_global(p.name)) report(fn.name, "parameter '" + p.name + "' shadows a global");
        if (p.kind == ParamKind::Scalar && (p.restrict_ || p.readonly))
          report(fn.name, "scalar parameter '" + p.name + "' cannot carry pointer attributes");
      }
      std::vector<const Loop*> loops;
      check_body(fn, fn.body, loops);
    }
  }
};

}  // namespace detail

/// Returns one diagnostic per broken invariant; empty means the program is valid.
inline std::vector<Diagnostic> validate(const Program& p) {
  detail::Validator v{p, {}, {}};
  v.run();
  return std::move(v.out);
}

// ---------------------------------------------------------------------------
// Printing

inline std::string print_affine(const Affine& a) {
  std::ostringstream os;
  bool first = true;
  // A leading negative term cannot be written directly, so start from the
  // constant in that case.
  if (a.terms.empty() || a.offset != 0 || a.terms.front().coef < 0) {
    os << a.offset;
    first = false;
  }
  for (const auto& t : a.terms) {
    std::int64_t c = t.coef;
    if (!first) {
      os << (c < 0 ? " - " : " + ");
      if (c < 0) c = -c;
    }
    if (c != 1) os << c << "*";
    os << t.name;
    first = false;
  }
  return os.str();
}

namespace detail {

inline void print_names(std::ostream& os, const std::optional<std::set<std::string>>& names) {
  if (!names) {
    os << "*";
    return;
  }
  bool first = true;
  for (const auto& n : *names) {
    if (!first) os << ", ";
    os << n;
    first = false;
  }
}

inline void print_body(std::ostream& os, const std::vector<Stmt>& body, int depth) {
  std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  for (const auto& s : body) {
    if (s.is_loop()) {
      const Loop& l = s.loop();
      os << pad << "for " << l.ivar << " = " << print_affine(l.lower) << " to "
         << print_affine(l.upper) << " step " << l.step << " {\n";
      print_body(os, l.body, depth + 1);
      os << pad << "}\n";
      continue;
    }
    const Instr& in = s.instr();
    os << pad;
    switch (in.kind) {
      case InstrKind::Load:
        if (in.pnd) os << "pnd ";
        os << "load " << in.dst << " = " << in.addr->base << "[" << print_affine(in.addr->index) << "]";
        break;
      case InstrKind::Store:
        os << "store " << in.addr->base << "[" << print_affine(in.addr->index) << "] = " << in.srcs.at(0);
        break;
      case InstrKind::Alu:
        os << "alu " << in.dst << " = " << in.srcs.at(0) << " " << to_string(in.op) << " " << in.srcs.at(1);
        break;
      case InstrKind::Call:
        os << "call " << in.callee << " reads(";
        print_names(os, in.summary.may_read);
        os << ") writes(";
        print_names(os, in.summary.may_write);
        os << ")";
        break;
    }
    os << "\n";
  }
}

}  // namespace detail

/// Renders `p` in the textual grammar accepted by parse_program.
inline std::string print_program(const Program& p) {
  std::ostringstream os;
  for (const auto& g : p.globals)
    os << "array " << g.name << "[" << g.length << "] esz " << g.elem_size << "\n";
  for (const auto& fn : p.functions) {
    if (os.tellp() > 0) os << "\n";
    os << "fn " << fn.name << "(";
    for (std::size_t i = 0; i < fn.params.size(); ++i) {
      const Param& prm = fn.params[i];
      if (i) os << ", ";
      os << (prm.kind == ParamKind::Array ? "arr " : "int ") << prm.name;
      if (prm.restrict_) os << " restrict";
      if (prm.readonly) os << " readonly";
    }
    os << ") {\n";
    detail::print_body(os, fn.body, 1);
    os << "}\n";
  }
  return os.str();
}

}  // namespace pndsim::mir
