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

// Cycle-level out-of-order window model. Each cycle runs, in order:
//
//   1. commit      up to `width` completed ops retire from the ROB head;
//                  stores and calls write memory here
//   2. store exec  stores/calls whose address is ready compute it, then search
//                  the LQ for younger issued loads to the same bytes
//                  (a hit is a memory order violation: squash from the load)
//   3. issue       loads and ALU ops with ready operands execute; loads
//                  forward from the youngest older store with a known
//                  matching address, ignoring stores whose address is unknown
//   4. dispatch    up to `width` ops enter ROB/IQ/LQ/SQ; loads consult the
//                  memory dependence predictor
//
// Ops dispatched in cycle c can issue at c + 1 at the earliest.

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pndsim/lowering.hpp"
#include "pndsim/store_sets.hpp"

namespace pndsim {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Clear period per SSIT entry used to scale the presets.
inline constexpr std::uint64_t kClearPeriodPerEntry = 244;

struct CpuConfig {
  std::string name = "custom";
  std::uint32_t width = 8;
  std::uint32_t iq_entries = 64;
  std::uint32_t rob_entries = 192;
  std::uint32_t lq_entries = 32;
  std::uint32_t sq_entries = 32;
  PredictorConfig predictor{32, 32, 32 * kClearPeriodPerEntry, true};
  std::uint32_t load_latency = 4;
  std::uint32_t alu_latency = 1;
  std::uint32_t forward_latency = 1;
  std::uint32_t squash_penalty = 10;
  /// Hold a store until the previous store of its set has executed.
  bool store_store_ordering = true;

  void check() const {
    if (width == 0 || iq_entries == 0 || rob_entries == 0 || lq_entries == 0 || sq_entries == 0 ||
        load_latency == 0 || alu_latency == 0 || forward_latency == 0)
      throw std::invalid_argument("CPU config fields must be positive");
    predictor.check();
  }
  bool operator==(const CpuConfig&) const = default;
};

/// The table's LSQ size is applied to both the LQ and the SQ.
inline CpuConfig make_preset(std::string name, std::uint32_t width, std::uint32_t iq, std::uint32_t rob,
                             std::uint32_t lsq, std::uint32_t mdp_entries) {
  CpuConfig c;
  c.name = std::move(name);
  c.width = width;
  c.iq_entries = iq;
  c.rob_entries = rob;
  c.lq_entries = lsq;
  c.sq_entries = lsq;
  c.predictor = {mdp_entries, mdp_entries, mdp_entries * kClearPeriodPerEntry, true};
  return c;
}

inline CpuConfig small_config() { return make_preset("small", 8, 64, 192, 32, 32); }
inline CpuConfig large_config() { return make_preset("large", 12, 192, 576, 96, 128); }
inline CpuConfig xlarge_config() { return make_preset("xlarge", 12, 384, 1024, 192, 256); }

inline std::vector<CpuConfig> presets() { return {small_config(), large_config(), xlarge_config()}; }

inline std::optional<CpuConfig> find_preset(std::string_view name) {
  for (auto& c : presets())
    if (c.name == name) return c;
  return std::nullopt;
}

inline nlohmann::json to_json(const CpuConfig& c) {
  return {{"name", c.name},
          {"width", c.width},
          {"iq_entries", c.iq_entries},
          {"rob_entries", c.rob_entries},
          {"lq_entries", c.lq_entries},
          {"sq_entries", c.sq_entries},
          {"ssit_entries", c.predictor.ssit_entries},
          {"lfst_entries", c.predictor.lfst_entries},
          {"clear_period", c.predictor.clear_period},
          {"load_latency", c.load_latency},
          {"alu_latency", c.alu_latency},
          {"forward_latency", c.forward_latency},
          {"squash_penalty", c.squash_penalty},
          {"store_store_ordering", c.store_store_ordering}};
}

/// Missing keys keep the defaults of `base`.
inline CpuConfig config_from_json(const nlohmann::json& j, CpuConfig base = small_config()) {
  base.name = j.value("name", std::string("custom"));
  base.width = j.value("width", base.width);
  base.iq_entries = j.value("iq_entries", base.iq_entries);
  base.rob_entries = j.value("rob_entries", base.rob_entries);
  if (j.contains("lsq_entries")) base.lq_entries = base.sq_entries = j.at("lsq_entries").get<std::uint32_t>();
  base.lq_entries = j.value("lq_entries", base.lq_entries);
  base.sq_entries = j.value("sq_entries", base.sq_entries);
  if (j.contains("mdp_entries")) {
    auto e = j.at("mdp_entries").get<std::uint32_t>();
    base.predictor.ssit_entries = base.predictor.lfst_entries = e;
    base.predictor.clear_period = e * kClearPeriodPerEntry;
  }
  base.predictor.ssit_entries = j.value("ssit_entries", base.predictor.ssit_entries);
  base.predictor.lfst_entries = j.value("lfst_entries", base.predictor.lfst_entries);
  base.predictor.clear_period = j.value("clear_period", base.predictor.clear_period);
  base.load_latency = j.value("load_latency", base.load_latency);
  base.alu_latency = j.value("alu_latency", base.alu_latency);
  base.forward_latency = j.value("forward_latency", base.forward_latency);
  base.squash_penalty = j.value("squash_penalty", base.squash_penalty);
  base.store_store_ordering = j.value("store_store_ordering", base.store_store_ordering);
  base.check();
  return base;
}

struct RunMetrics {
  std::uint64_t cycles = 0;
  std::uint64_t committed_insts = 0;
  std::uint64_t mdp_lookups = 0;
  std::uint64_t bypassed_lookups = 0;
  std::uint64_t violations = 0;
  std::uint64_t squashed_ops = 0;
  std::uint64_t index_collisions = 0;
  std::uint64_t false_dependencies = 0;
  std::uint64_t forwardings = 0;
  std::uint64_t trainings = 0;
  std::uint64_t clears = 0;

  double cpi() const { return committed_insts ? static_cast<double>(cycles) / static_cast<double>(committed_insts) : 0.0; }
  double lpki() const {
    return committed_insts ? 1000.0 * static_cast<double>(mdp_lookups) / static_cast<double>(committed_insts) : 0.0;
  }
  bool operator==(const RunMetrics&) const = default;
};

inline nlohmann::json to_json(const RunMetrics& m) {
  return {{"cycles", m.cycles},
          {"committed_insts", m.committed_insts},
          {"mdp_lookups", m.mdp_lookups},
          {"bypassed_lookups", m.bypassed_lookups},
          {"violations", m.violations},
          {"squashed_ops", m.squashed_ops},
          {"index_collisions", m.index_collisions},
          {"false_dependencies", m.false_dependencies},
          {"forwardings", m.forwardings},
          {"trainings", m.trainings},
          {"clears", m.clears},
          {"cpi", m.cpi()},
          {"lpki", m.lpki()}};
}

enum class EventKind { Dispatch, Issue, StoreExec, Violation, Squash, Commit };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Dispatch: return "dispatch";
    case EventKind::Issue: return "issue";
    case EventKind::StoreExec: return "store-exec";
    case EventKind::Violation: return "violation";
    case EventKind::Squash: return "squash";
    case EventKind::Commit: return "commit";
  }
  return "?";
}

/// One entry of the optional per-cycle log. For Issue, `aux` is the store a
/// load forwarded from (-1 when it read memory). For Violation, `seq` is the
/// load and `aux` the store. StoreExec is logged once per written range.
struct SimEvent {
  std::uint64_t cycle = 0;
  EventKind kind = EventKind::Dispatch;
  SeqNum seq = 0;
  Addr pc = 0;
  Addr addr = 0;
  std::uint32_t size = 0;
  std::int64_t aux = -1;
};

inline void print_events(std::ostream& os, const std::vector<SimEvent>& events) {
  os << "# cycle event seq pc addr\n";
  for (const auto& e : events)
    os << e.cycle << " " << to_string(e.kind) << " " << e.seq << " 0x" << std::hex << e.pc << " 0x" << e.addr
       << std::dec << "\n";
}

enum class SlotState : std::uint8_t { Idle, Dispatched, Issued };

/// Per-op runtime state. Completed is Issued with complete_cycle <= now;
/// squashed ops return to Idle.
struct WindowSlot {
  SlotState state = SlotState::Idle;
  std::uint64_t dispatch_cycle = 0;
  std::uint64_t issue_cycle = 0;
  std::uint64_t complete_cycle = 0;
  std::optional<SeqNum> predicted_dep;
  std::optional<SeqNum> store_pred;
  std::optional<SeqNum> forwarded_from;
  bool addr_known = false;
  bool data_ready = false;
  std::int64_t value = 0;
};

struct SimResult {
  MachineState state;
  RunMetrics metrics;
  std::vector<SimEvent> events;
};

struct SimOptions {
  bool record_events = false;
};

class OooSimulator {
 public:
  explicit OooSimulator(CpuConfig cfg) : cfg_(std::move(cfg)), pred_(cfg_.predictor) { cfg_.check(); }

  /// Back to an empty machine with a cleared predictor.
  void reset() { reset(cfg_); }
  void reset(const CpuConfig& cfg) {
    cfg.check();
    cfg_ = cfg;
    pred_ = StoreSetPredictor(cfg_.predictor);
    metrics_ = {};
  }

  const CpuConfig& config() const { return cfg_; }
  const StoreSetPredictor& predictor() const { return pred_; }
  const RunMetrics& metrics() const { return metrics_; }

  /// Runs `trace` to completion from `init`. With `labels_enabled` false every
  /// pnd bit is ignored. The predictor state carries over between calls on
  /// the same simulator until reset().
  SimResult run(const Trace& trace, const MachineState& init, bool labels_enabled, SimOptions opts = {}) {
    Run r(*this, trace, init, labels_enabled, opts);
    r.execute();
    metrics_ = r.metrics;
    const auto& pc = pred_.counters();
    metrics_.mdp_lookups = pc.lookups - r.base_counters.lookups;
    metrics_.bypassed_lookups = pc.bypassed_lookups - r.base_counters.bypassed_lookups;
    metrics_.index_collisions = pc.index_collisions - r.base_counters.index_collisions;
    metrics_.trainings = pc.trainings - r.base_counters.trainings;
    metrics_.clears = pc.clears - r.base_counters.clears;
    return {std::move(r.state), metrics_, std::move(r.events)};
  }

 private:
  struct Run {
    OooSimulator& sim;
    const CpuConfig& cfg;
    const std::vector<DynOp>& ops;
    const Trace& trace;
    bool labels;
    SimOptions opts;
    MachineState state;
    RunMetrics metrics;
    PredictorCounters base_counters;
    std::vector<SimEvent> events;

    std::vector<WindowSlot> slots;
    // producers[seq][k]: op producing source k of seq, if any.
    std::vector<std::vector<std::optional<SeqNum>>> producers;
    std::vector<std::int64_t> arch_init;  // initial register values by RegId

    SeqNum commit_ptr = 0;
    SeqNum dispatch_ptr = 0;
    std::deque<SeqNum> lq, sq;
    std::vector<SeqNum> iq;  // sorted by seq
    std::uint64_t now = 0;
    std::uint64_t resume_cycle = 0;
    std::uint64_t last_commit_cycle = 0;

    Run(OooSimulator& s, const Trace& t, const MachineState& init, bool labels_enabled, SimOptions o)
        : sim(s),
          cfg(s.cfg_),
          ops(t.ops),
          trace(t),
          labels(labels_enabled),
          opts(o),
          state(init),
          base_counters(s.pred_.counters()),
          slots(t.ops.size()),
          producers(t.ops.size()) {
      for (std::size_t i = 0; i < ops.size(); ++i)
        if (ops[i].seq != i) throw SimulationError("trace sequence numbers must be dense from 0");
      std::vector<std::optional<SeqNum>> last_writer(t.reg_names.size());
      for (const auto& op : ops) {
        auto& p = producers[op.seq];
        for (const auto& src : op.srcs) p.push_back(src.is_reg ? last_writer[src.reg] : std::nullopt);
        if (op.dst) last_writer[*op.dst] = op.seq;
      }
      arch_init.assign(t.reg_names.size(), 0);
      for (std::size_t r = 0; r < t.reg_names.size(); ++r)
        if (auto it = init.registers.find(t.reg_names[r]); it != init.registers.end()) arch_init[r] = it->second;
    }

    void log(EventKind k, const DynOp& op, Addr addr, std::uint32_t size, std::int64_t aux = -1) {
      if (opts.record_events) events.push_back({now, k, op.seq, op.pc, addr, size, aux});
    }

    bool completed(SeqNum s) const {
      return s < commit_ptr || (slots[s].state == SlotState::Issued && slots[s].complete_cycle <= now);
    }

    bool operand_ready(const DynOp& op, std::size_t k) const {
      const auto& p = producers[op.seq][k];
      return !p || completed(*p);
    }

    std::int64_t operand_value(const DynOp& op, std::size_t k) const {
      const Operand& o = op.srcs[k];
      if (!o.is_reg) return o.imm;
      const auto& p = producers[op.seq][k];
      return p ? slots[*p].value : arch_init[o.reg];
    }

    /// A store-like op has executed (its address is known) or already left.
    bool store_executed(SeqNum s) const { return s < commit_ptr || slots[s].addr_known; }

    bool addr_ready(const DynOp& op) const {
      return now >= slots[op.seq].dispatch_cycle + 1 + op.addr_ready_latency;
    }

    static bool overlaps(Addr a, std::uint32_t as, Addr b, std::uint32_t bs) { return a < b + bs && b < a + as; }

    bool op_done(SeqNum s) const {
      const DynOp& op = ops[s];
      const WindowSlot& w = slots[s];
      if (op.is_store_like()) return w.addr_known && w.data_ready;
      return w.state == SlotState::Issued && w.complete_cycle <= now;
    }

    void commit() {
      for (std::uint32_t n = 0; n < cfg.width && commit_ptr < dispatch_ptr; ++n) {
        if (!op_done(commit_ptr)) break;
        const DynOp& op = ops[commit_ptr];
        WindowSlot& w = slots[commit_ptr];
        switch (op.kind) {
          case OpKind::Store: state.write(op.addr, op.size, w.value); break;
          case OpKind::Call:
            for (const auto& wr : op.writes) state.write(wr.addr, wr.size, wr.value);
            break;
          case OpKind::Load:
          case OpKind::Alu: state.registers[trace.reg_names[*op.dst]] = w.value; break;
        }
        if (op.is_load()) lq.pop_front();
        if (op.is_store_like()) sq.pop_front();
        log(EventKind::Commit, op, op.addr, op.size);
        ++commit_ptr;
        ++metrics.committed_insts;
        last_commit_cycle = now;
      }
    }

    void squash_from(SeqNum first) {
      for (SeqNum s = first; s < dispatch_ptr; ++s) slots[s] = WindowSlot{};
      metrics.squashed_ops += dispatch_ptr - first;
      while (!lq.empty() && lq.back() >= first) lq.pop_back();
      while (!sq.empty() && sq.back() >= first) sq.pop_back();
      std::erase_if(iq, [first](SeqNum s) { return s >= first; });
      sim.pred_.squash(first);
      if (opts.record_events) events.push_back({now, EventKind::Squash, first, ops[first].pc, 0, 0, -1});
      dispatch_ptr = first;
      resume_cycle = now + cfg.squash_penalty;
    }

    /// Oldest younger load that read stale data for bytes this store writes.
    std::optional<SeqNum> find_violation(const DynOp& st) const {
      for (SeqNum l : lq) {
        if (l <= st.seq) continue;
        const WindowSlot& w = slots[l];
        if (w.state != SlotState::Issued) continue;
        if (w.forwarded_from && *w.forwarded_from > st.seq) continue;
        const DynOp& ld = ops[l];
        if (st.kind == OpKind::Store) {
          if (overlaps(st.addr, st.size, ld.addr, ld.size)) return l;
        } else {
          for (const auto& wr : st.writes)
            if (overlaps(wr.addr, wr.size, ld.addr, ld.size)) return l;
        }
      }
      return std::nullopt;
    }

    void capture_store_data() {
      for (SeqNum s : sq) {
        WindowSlot& w = slots[s];
        if (!w.addr_known || w.data_ready) continue;
        const DynOp& op = ops[s];
        if (op.kind == OpKind::Store && !operand_ready(op, 0)) continue;
        if (op.kind == OpKind::Store) w.value = operand_value(op, 0);
        w.data_ready = true;
        w.complete_cycle = now;
      }
    }

    void execute_stores() {
      std::vector<SeqNum> ready;
      for (SeqNum s : iq) {
        const DynOp& op = ops[s];
        if (!op.is_store_like() || !addr_ready(op)) continue;
        const WindowSlot& w = slots[s];
        if (cfg.store_store_ordering && w.store_pred && !store_executed(*w.store_pred)) continue;
        ready.push_back(s);
      }
      for (SeqNum s : ready) {
        WindowSlot& w = slots[s];
        if (s >= dispatch_ptr || w.state != SlotState::Dispatched) continue;  // squashed meanwhile
        const DynOp& op = ops[s];
        w.state = SlotState::Issued;
        w.issue_cycle = now;
        w.addr_known = true;
        std::erase(iq, s);
        sim.pred_.store_issued(op.pc, op.seq);
        if (op.kind == OpKind::Store) {
          log(EventKind::StoreExec, op, op.addr, op.size);
        } else {
          for (const auto& wr : op.writes) log(EventKind::StoreExec, op, wr.addr, wr.size);
        }
        if (auto l = find_violation(op)) {
          const DynOp& ld = ops[*l];
          ++metrics.violations;
          if (opts.record_events) events.push_back({now, EventKind::Violation, ld.seq, ld.pc, ld.addr, ld.size,
                                                    static_cast<std::int64_t>(op.seq)});
          sim.pred_.train_violation(ld.pc, op.pc, ld.pnd && labels);
          squash_from(*l);
        }
      }
      capture_store_data();
    }

    enum class Forward { None, Value, Blocked };

    /// Youngest older store overlapping the load with a known address.
    Forward search_sq(const DynOp& ld, SeqNum& from, std::int64_t& value) const {
      for (auto it = sq.rbegin(); it != sq.rend(); ++it) {
        SeqNum s = *it;
        if (s > ld.seq) continue;
        const WindowSlot& w = slots[s];
        if (!w.addr_known) continue;
        const DynOp& st = ops[s];
        if (st.kind == OpKind::Store) {
          if (!overlaps(st.addr, st.size, ld.addr, ld.size)) continue;
          if (st.addr != ld.addr || st.size != ld.size || !w.data_ready) return Forward::Blocked;
          from = s;
          value = truncate_to_size(w.value, st.size);
          return Forward::Value;
        }
        // Calls: the youngest overlapping scripted write wins.
        for (auto wr = st.writes.rbegin(); wr != st.writes.rend(); ++wr) {
          if (!overlaps(wr->addr, wr->size, ld.addr, ld.size)) continue;
          if (wr->addr != ld.addr || wr->size != ld.size) return Forward::Blocked;
          from = s;
          value = truncate_to_size(wr->value, wr->size);
          return Forward::Value;
        }
      }
      return Forward::None;
    }

    void issue() {
      std::vector<SeqNum> issued;
      for (SeqNum s : iq) {
        const DynOp& op = ops[s];
        WindowSlot& w = slots[s];
        if (op.kind == OpKind::Alu) {
          if (!operand_ready(op, 0) || !operand_ready(op, 1)) continue;
          w.value = mir::apply(op.alu_op, operand_value(op, 0), operand_value(op, 1));
          w.state = SlotState::Issued;
          w.issue_cycle = now;
          w.complete_cycle = now + cfg.alu_latency;
          log(EventKind::Issue, op, 0, 0);
          issued.push_back(s);
          continue;
        }
        if (!op.is_load() || !addr_ready(op)) continue;
        if (w.predicted_dep && !store_executed(*w.predicted_dep)) continue;
        SeqNum from = 0;
        std::int64_t value = 0;
        Forward f = search_sq(op, from, value);
        if (f == Forward::Blocked) continue;
        if (w.predicted_dep) {
          const DynOp& st = ops[*w.predicted_dep];
          bool match = false;
          if (st.kind == OpKind::Store) {
            match = overlaps(st.addr, st.size, op.addr, op.size);
          } else {
            for (const auto& wr : st.writes) match |= overlaps(wr.addr, wr.size, op.addr, op.size);
          }
          if (!match) ++metrics.false_dependencies;
        }
        w.state = SlotState::Issued;
        w.issue_cycle = now;
        if (f == Forward::Value) {
          w.value = value;
          w.forwarded_from = from;
          w.complete_cycle = now + cfg.forward_latency;
          ++metrics.forwardings;
        } else {
          w.value = state.read(op.addr, op.size);
          w.forwarded_from.reset();
          w.complete_cycle = now + cfg.load_latency;
        }
        log(EventKind::Issue, op, op.addr, op.size, f == Forward::Value ? static_cast<std::int64_t>(from) : -1);
        issued.push_back(s);
      }
      for (SeqNum s : issued) std::erase(iq, s);
    }

    void dispatch() {
      if (now < resume_cycle) return;
      for (std::uint32_t n = 0; n < cfg.width && dispatch_ptr < ops.size(); ++n) {
        const DynOp& op = ops[dispatch_ptr];
        if (dispatch_ptr - commit_ptr >= cfg.rob_entries || iq.size() >= cfg.iq_entries) break;
        if (op.is_load() && lq.size() >= cfg.lq_entries) break;
        if (op.is_store_like() && sq.size() >= cfg.sq_entries) break;
        WindowSlot& w = slots[dispatch_ptr];
        w = WindowSlot{};
        w.state = SlotState::Dispatched;
        w.dispatch_cycle = now;
        if (op.is_load()) {
          w.predicted_dep = sim.pred_.lookup_load(op.pc, op.pnd && labels);
          sim.pred_.memop_tick();
          lq.push_back(op.seq);
        } else if (op.is_store_like()) {
          auto prev = sim.pred_.dispatch_store(op.pc, op.seq);
          if (cfg.store_store_ordering) w.store_pred = prev;
          sim.pred_.memop_tick();
          sq.push_back(op.seq);
        }
        iq.push_back(op.seq);
        log(EventKind::Dispatch, op, op.addr, op.size);
        ++dispatch_ptr;
      }
    }

    void execute() {
      if (ops.empty()) return;
      const std::uint64_t watchdog = static_cast<std::uint64_t>(cfg.rob_entries) * 64;
      for (now = 0;; ++now) {
        commit();
        if (commit_ptr == ops.size()) break;
        execute_stores();
        issue();
        dispatch();
        if (now - last_commit_cycle > watchdog)
          throw SimulationError("no forward progress: op " + std::to_string(commit_ptr) + " stuck at cycle " +
                                std::to_string(now));
      }
      metrics.cycles = now + 1;
    }
  };

  CpuConfig cfg_;
  StoreSetPredictor pred_;
  RunMetrics metrics_;
};

/// Fresh simulator per call.
inline SimResult simulate(const Trace& trace, const CpuConfig& cfg, const MachineState& init, bool labels_enabled,
                          SimOptions opts = {}) {
  OooSimulator sim(cfg);
  return sim.run(trace, init, labels_enabled, opts);
}

}  // namespace pndsim
