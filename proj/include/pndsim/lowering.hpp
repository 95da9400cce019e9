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

// Unrolls a program into a dynamic instruction stream with concrete byte
// addresses, and executes such streams in order as the architectural
// reference.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pndsim/mir.hpp"

namespace pndsim {

class LoweringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OpKind { Load, Store, Alu, Call };

inline const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::Load: return "load";
    case OpKind::Store: return "store";
    case OpKind::Alu: return "alu";
    case OpKind::Call: return "call";
  }
  return "?";
}

using RegId = std::uint32_t;

/// A source operand: a register, or an induction-variable value folded to an
/// immediate at lowering time.
struct Operand {
  bool is_reg = false;
  RegId reg = 0;
  std::int64_t imm = 0;

  static Operand of_reg(RegId r) { return {true, r, 0}; }
  static Operand of_imm(std::int64_t v) { return {false, 0, v}; }
  bool operator==(const Operand&) const = default;
};

struct ScriptedWrite {
  std::uint64_t addr = 0;
  std::uint32_t size = 0;
  std::int64_t value = 0;
  bool operator==(const ScriptedWrite&) const = default;
};

struct DynOp {
  std::uint64_t seq = 0;
  std::uint64_t pc = 0;
  OpKind kind = OpKind::Alu;
  std::uint64_t addr = 0;  // loads and stores
  std::uint32_t size = 0;
  std::vector<Operand> srcs;  // alu: two; store: the data operand
  std::optional<RegId> dst;
  mir::AluOp alu_op = mir::AluOp::Add;
  bool pnd = false;
  /// Extra cycles after dispatch before the address is known.
  std::uint32_t addr_ready_latency = 0;
  std::vector<ScriptedWrite> writes;  // calls only

  bool is_load() const { return kind == OpKind::Load; }
  /// Stores and calls both write memory at commit and sit in the store queue.
  bool is_store_like() const { return kind == OpKind::Store || kind == OpKind::Call; }
  bool is_mem() const { return is_load() || is_store_like(); }
  bool operator==(const DynOp&) const = default;
};

struct Trace {
  std::vector<DynOp> ops;
  std::vector<std::string> reg_names;
};

// ---------------------------------------------------------------------------
// Machine state

/// The value a `size`-byte memory round trip of `v` yields (sign-extended).
inline std::int64_t truncate_to_size(std::int64_t v, std::uint32_t size) {
  if (size == 0 || size >= 8) return v;
  const unsigned shift = 64 - 8 * size;
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(v) << shift) >> shift;
}

/// Little-endian byte memory plus named registers. Bytes never written and
/// not part of an array are absent, so equality is exact.
struct MachineState {
  std::map<std::uint64_t, std::uint8_t> memory;
  std::map<std::string, std::int64_t> registers;

  void write(std::uint64_t addr, std::uint32_t size, std::int64_t value) {
    auto v = static_cast<std::uint64_t>(value);
    for (std::uint32_t b = 0; b < size; ++b) memory[addr + b] = static_cast<std::uint8_t>(v >> (8 * b));
  }

  /// Reads `size` bytes and sign-extends.
  std::int64_t read(std::uint64_t addr, std::uint32_t size) const {
    std::uint64_t v = 0;
    for (std::uint32_t b = 0; b < size; ++b) {
      auto it = memory.find(addr + b);
      std::uint64_t byte = it == memory.end() ? 0 : it->second;
      v |= byte << (8 * b);
    }
    if (size < 8 && size > 0) {
      std::uint64_t sign = std::uint64_t{1} << (8 * size - 1);
      if (v & sign) v |= ~((sign << 1) - 1);
    }
    return static_cast<std::int64_t>(v);
  }

  bool operator==(const MachineState&) const = default;
};

// ---------------------------------------------------------------------------
// Inputs

struct ArrayPlacement {
  std::uint64_t base = 0;
  std::int64_t length = 0;
  std::int64_t elem_size = 4;
  /// Initial element values; missing trailing elements are zero.
  std::vector<std::int64_t> init;
  /// Views into another placement's storage do not initialise memory.
  bool is_alias = false;
};

struct CallWrite {
  std::string array;
  std::int64_t index = 0;
  std::int64_t value = 0;
};

struct LoweringInputs {
  std::string entry;
  std::uint32_t repeat = 1;
  std::map<std::string, std::int64_t> scalars;
  /// Placement for every array parameter of the entry function and for any
  /// global that should not be auto-placed.
  std::map<std::string, ArrayPlacement> arrays;
  /// Writes performed by each dynamic instance of a call to the named callee.
  std::map<std::string, std::vector<CallWrite>> call_scripts;
  /// Injected address-resolution latency, keyed by PC.
  std::map<std::uint64_t, std::uint32_t> addr_delay;
};

inline constexpr std::uint64_t kAutoGlobalBase = 0x40000000;
inline constexpr std::uint64_t kAutoGlobalStride = 0x100000;

/// Placements for every array visible to `entry`: explicit ones from `in`,
/// plus auto-placed globals.
inline std::map<std::string, ArrayPlacement> resolve_placements(const mir::Program& p,
                                                                const LoweringInputs& in) {
  const mir::Function* fn = p.find_function(in.entry);
  if (!fn) throw LoweringError("entry function '" + in.entry + "' not found");
  std::map<std::string, ArrayPlacement> out;
  for (const auto& prm : fn->params) {
    if (prm.kind != mir::ParamKind::Array) continue;
    auto it = in.arrays.find(prm.name);
    if (it == in.arrays.end()) throw LoweringError("array parameter '" + prm.name + "' is not bound");
    out[prm.name] = it->second;
  }
  for (std::size_t g = 0; g < p.globals.size(); ++g) {
    const auto& decl = p.globals[g];
    ArrayPlacement pl;
    if (auto it = in.arrays.find(decl.name); it != in.arrays.end()) {
      pl = it->second;
    } else {
      pl.base = kAutoGlobalBase + g * kAutoGlobalStride;
    }
    pl.length = decl.length;
    pl.elem_size = decl.elem_size;
    out[decl.name] = pl;
  }
  for (const auto& [name, pl] : out) {
    if (pl.length <= 0 || pl.elem_size <= 0 || pl.elem_size > 8)
      throw LoweringError("array '" + name + "' needs positive length and element size in 1..8");
    if (static_cast<std::int64_t>(pl.init.size()) > pl.length)
      throw LoweringError("array '" + name + "' has more initial values than elements");
  }
  return out;
}

/// Memory image holding every non-alias array with its initial contents.
inline MachineState initial_state(const mir::Program& p, const LoweringInputs& in) {
  MachineState s;
  for (const auto& [name, pl] : resolve_placements(p, in)) {
    if (pl.is_alias) continue;
    for (std::int64_t i = 0; i < pl.length; ++i) {
      std::int64_t v = i < static_cast<std::int64_t>(pl.init.size()) ? pl.init[static_cast<std::size_t>(i)] : 0;
      s.write(pl.base + static_cast<std::uint64_t>(i * pl.elem_size), static_cast<std::uint32_t>(pl.elem_size), v);
    }
  }
  return s;
}

namespace detail {

class Lowerer {
 public:
  Lowerer(const mir::Program& p, const LoweringInputs& in)
      : prog_(p), in_(in), fn_(p.find_function(in.entry)) {
    if (!fn_) throw LoweringError("entry function '" + in.entry + "' not found");
    placements_ = resolve_placements(p, in);
    for (const auto& prm : fn_->params) {
      if (prm.kind != mir::ParamKind::Scalar) continue;
      auto it = in.scalars.find(prm.name);
      if (it == in.scalars.end()) throw LoweringError("scalar parameter '" + prm.name + "' is not bound");
      env_[prm.name] = it->second;
    }
    for (const auto& [callee, writes] : in.call_scripts) {
      for (const auto& w : writes)
        if (!placements_.count(w.array))
          throw LoweringError("call script for '" + callee + "' writes unknown array '" + w.array + "'");
    }
  }

  Trace run() {
    for (std::uint32_t r = 0; r < in_.repeat; ++r) lower_body(fn_->body);
    return std::move(trace_);
  }

 private:
  static constexpr std::size_t kMaxOps = 50'000'000;

  const mir::Program& prog_;
  const LoweringInputs& in_;
  const mir::Function* fn_;
  std::map<std::string, ArrayPlacement> placements_;
  std::unordered_map<std::string, std::int64_t> env_;
  std::vector<std::string> ivars_;
  std::unordered_map<std::string, RegId> reg_ids_;
  Trace trace_;

  std::int64_t lookup(const std::string& n) const {
    auto it = env_.find(n);
    if (it == env_.end()) throw LoweringError("unbound name '" + n + "'");
    return it->second;
  }

  bool is_ivar(const std::string& n) const {
    for (const auto& v : ivars_)
      if (v == n) return true;
    return false;
  }

  RegId reg(const std::string& n) {
    auto [it, inserted] = reg_ids_.emplace(n, static_cast<RegId>(trace_.reg_names.size()));
    if (inserted) trace_.reg_names.push_back(n);
    return it->second;
  }

  Operand operand(const std::string& n) {
    if (is_ivar(n)) return Operand::of_imm(lookup(n));
    return Operand::of_reg(reg(n));
  }

  std::uint64_t address(const mir::AddrExpr& a, std::uint32_t& size) const {
    const ArrayPlacement& pl = placements_.at(a.base);
    std::int64_t idx = a.index.eval([this](const std::string& n) { return lookup(n); });
    if (idx < 0 || idx >= pl.length)
      throw LoweringError("index " + std::to_string(idx) + " out of bounds for '" + a.base + "' (length " +
                          std::to_string(pl.length) + ")");
    size = static_cast<std::uint32_t>(pl.elem_size);
    return pl.base + static_cast<std::uint64_t>(idx * pl.elem_size);
  }

  void emit(DynOp op) {
    if (trace_.ops.size() >= kMaxOps) throw LoweringError("dynamic stream exceeds op limit");
    op.seq = trace_.ops.size();
    if (auto it = in_.addr_delay.find(op.pc); it != in_.addr_delay.end()) op.addr_ready_latency = it->second;
    trace_.ops.push_back(std::move(op));
  }

  void lower_instr(const mir::Instr& in) {
    DynOp op;
    op.pc = static_cast<std::uint64_t>(in.id) * 4;
    switch (in.kind) {
      case mir::InstrKind::Load:
        op.kind = OpKind::Load;
        op.addr = address(*in.addr, op.size);
        op.dst = reg(in.dst);
        op.pnd = in.pnd;
        break;
      case mir::InstrKind::Store:
        op.kind = OpKind::Store;
        op.addr = address(*in.addr, op.size);
        op.srcs.push_back(operand(in.srcs.at(0)));
        break;
      case mir::InstrKind::Alu:
        op.kind = OpKind::Alu;
        op.srcs.push_back(operand(in.srcs.at(0)));
        op.srcs.push_back(operand(in.srcs.at(1)));
        op.dst = reg(in.dst);
        op.alu_op = in.op;
        break;
      case mir::InstrKind::Call: {
        op.kind = OpKind::Call;
        if (auto it = in_.call_scripts.find(in.callee); it != in_.call_scripts.end()) {
          for (const auto& w : it->second) {
            if (!in.summary.may_write_to(w.array))
              throw LoweringError("call script for '" + in.callee + "' writes '" + w.array +
                                  "', which its summary does not declare");
            mir::AddrExpr a{w.array, mir::Affine::constant(w.index)};
            ScriptedWrite sw;
            sw.addr = address(a, sw.size);
            sw.value = w.value;
            op.writes.push_back(sw);
          }
        }
        break;
      }
    }
    emit(std::move(op));
  }

  void lower_body(const std::vector<mir::Stmt>& body) {
    for (const auto& s : body) {
      if (!s.is_loop()) {
        lower_instr(s.instr());
        continue;
      }
      const mir::Loop& l = s.loop();
      auto eval = [this](const std::string& n) { return lookup(n); };
      std::int64_t lo = l.lower.eval(eval);
      std::int64_t hi = l.upper.eval(eval);
      ivars_.push_back(l.ivar);
      for (std::int64_t i = lo; l.step > 0 ? i < hi : i > hi; i += l.step) {
        env_[l.ivar] = i;
        lower_body(l.body);
      }
      env_.erase(l.ivar);
      ivars_.pop_back();
    }
  }
};

}  // namespace detail

/// Fully unrolls the entry function `in.repeat` times. PCs are static id * 4.
inline Trace lower(const mir::Program& p, const LoweringInputs& in) {
  return detail::Lowerer(p, in).run();
}

/// Executes `t` strictly in sequence order.
inline MachineState run_inorder(const Trace& t, MachineState state) {
  std::vector<std::int64_t> regs(t.reg_names.size(), 0);
  std::vector<bool> written(t.reg_names.size(), false);
  for (std::size_t r = 0; r < t.reg_names.size(); ++r) {
    if (auto it = state.registers.find(t.reg_names[r]); it != state.registers.end()) regs[r] = it->second;
  }
  auto value = [&](const Operand& o) { return o.is_reg ? regs[o.reg] : o.imm; };
  for (const DynOp& op : t.ops) {
    switch (op.kind) {
      case OpKind::Load:
        regs[*op.dst] = state.read(op.addr, op.size);
        written[*op.dst] = true;
        break;
      case OpKind::Store:
        state.write(op.addr, op.size, value(op.srcs[0]));
        break;
      case OpKind::Alu:
        regs[*op.dst] = mir::apply(op.alu_op, value(op.srcs[0]), value(op.srcs[1]));
        written[*op.dst] = true;
        break;
      case OpKind::Call:
        for (const auto& w : op.writes) state.write(w.addr, w.size, w.value);
        break;
    }
  }
  for (std::size_t r = 0; r < regs.size(); ++r)
    if (written[r]) state.registers[t.reg_names[r]] = regs[r];
  return state;
}

/// One op per line: seq, pc, kind, addr, pnd.
inline void dump_trace(std::ostream& os, const Trace& t) {
  os << "# seq pc kind addr pnd\n";
  for (const auto& op : t.ops) {
    os << op.seq << " 0x" << std::hex << op.pc << " " << to_string(op.kind) << " 0x" << op.addr << std::dec
       << " " << (op.pnd ? 1 : 0) << "\n";
  }
}

}  // namespace pndsim
