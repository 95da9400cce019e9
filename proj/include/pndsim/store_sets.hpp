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

// Store Sets memory dependence predictor: a PC-indexed Store Set ID Table
// (SSIT) and a Last Fetched Store Table (LFST), wholesale cleared every
// `clear_period` memory operations.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace pndsim {

using SeqNum = std::uint64_t;
using Addr = std::uint64_t;

struct PredictorConfig {
  std::uint32_t ssit_entries = 1024;
  std::uint32_t lfst_entries = 1024;
  std::uint64_t clear_period = 249856;
  /// Record the full PC of each SSIT writer to count index collisions.
  /// Never affects predictions.
  bool track_collisions = true;

  void check() const {
    if (!std::has_single_bit(ssit_entries) || !std::has_single_bit(lfst_entries))
      throw std::invalid_argument("SSIT and LFST sizes must be powers of two");
    if (clear_period == 0) throw std::invalid_argument("clear period must be positive");
  }
  bool operator==(const PredictorConfig&) const = default;
};

struct SsitEntry {
  bool valid = false;
  std::uint32_t ssid = 0;
  Addr shadow_pc = 0;
  bool operator==(const SsitEntry&) const = default;
};

struct LfstEntry {
  bool valid = false;
  SeqNum store_seq = 0;
  bool operator==(const LfstEntry&) const = default;
};

struct PredictorCounters {
  std::uint64_t lookups = 0;
  std::uint64_t index_collisions = 0;
  std::uint64_t trainings = 0;
  std::uint64_t clears = 0;
  std::uint64_t bypassed_lookups = 0;
  bool operator==(const PredictorCounters&) const = default;
};

class StoreSetPredictor {
 public:
  explicit StoreSetPredictor(const PredictorConfig& cfg) : cfg_(cfg) {
    cfg_.check();
    ssit_.resize(cfg_.ssit_entries);
    lfst_.resize(cfg_.lfst_entries);
  }

  std::uint32_t index(Addr pc) const { return static_cast<std::uint32_t>((pc >> 2) & (cfg_.ssit_entries - 1)); }

  /// Called when a load dispatches. PND loads touch nothing but the bypass
  /// counter. Returns the sequence number of the store to wait for, if any.
  std::optional<SeqNum> lookup_load(Addr pc, bool pnd) {
    if (pnd) {
      ++counters_.bypassed_lookups;
      return std::nullopt;
    }
    ++counters_.lookups;
    const SsitEntry& e = ssit_[index(pc)];
    if (!e.valid) return std::nullopt;
    if (cfg_.track_collisions && e.shadow_pc != pc) ++counters_.index_collisions;
    const LfstEntry& last = lfst_[e.ssid];
    if (!last.valid) return std::nullopt;
    return last.store_seq;
  }

  /// Called when a store dispatches, in program order. Returns the previous
  /// store of the same set still in flight, then makes this store the set's
  /// last fetched store.
  std::optional<SeqNum> dispatch_store(Addr pc, SeqNum seq) {
    const SsitEntry& e = ssit_[index(pc)];
    if (!e.valid) return std::nullopt;
    LfstEntry& last = lfst_[e.ssid];
    std::optional<SeqNum> prev;
    if (last.valid) prev = last.store_seq;
    last = {true, seq};
    return prev;
  }

  void store_issued(Addr pc, SeqNum seq) {
    const SsitEntry& e = ssit_[index(pc)];
    if (!e.valid) return;
    LfstEntry& last = lfst_[e.ssid];
    if (last.valid && last.store_seq == seq) last.valid = false;
  }

  /// Records that the load at `load_pc` was reordered above the store at
  /// `store_pc`. Violations by PND loads leave the tables untouched.
  void train_violation(Addr load_pc, Addr store_pc, bool load_is_pnd) {
    if (load_is_pnd) return;
    SsitEntry& le = ssit_[index(load_pc)];
    SsitEntry& se = ssit_[index(store_pc)];
    std::uint32_t ssid;
    if (!le.valid && !se.valid) {
      ssid = index(load_pc) & (cfg_.lfst_entries - 1);
    } else if (le.valid && !se.valid) {
      ssid = le.ssid;
    } else if (!le.valid && se.valid) {
      ssid = se.ssid;
    } else {
      ssid = std::min(le.ssid, se.ssid);
    }
    write_entry(le, ssid, load_pc);
    write_entry(se, ssid, store_pc);
    ++counters_.trainings;
  }

  /// Counts one dispatched memory op; clears both tables when the period
  /// elapses. Returns whether a clear happened.
  bool memop_tick() {
    if (++ops_since_clear_ < cfg_.clear_period) return false;
    clear();
    ++counters_.clears;
    return true;
  }

  /// Drops LFST entries naming squashed stores (sequence >= `first_squashed`).
  void squash(SeqNum first_squashed) {
    for (auto& e : lfst_)
      if (e.valid && e.store_seq >= first_squashed) e.valid = false;
  }

  const PredictorConfig& config() const { return cfg_; }
  const PredictorCounters& counters() const { return counters_; }
  const std::vector<SsitEntry>& ssit() const { return ssit_; }
  const std::vector<LfstEntry>& lfst() const { return lfst_; }
  std::uint64_t ops_since_clear() const { return ops_since_clear_; }

  void dump(std::ostream& os) const {
    os << "SSIT index valid ssid shadow_pc\n";
    for (std::size_t i = 0; i < ssit_.size(); ++i) {
      const auto& e = ssit_[i];
      os << i << " " << e.valid << " " << e.ssid << " 0x" << std::hex << e.shadow_pc << std::dec << "\n";
    }
    os << "LFST index valid store_seq\n";
    for (std::size_t i = 0; i < lfst_.size(); ++i)
      os << i << " " << lfst_[i].valid << " " << lfst_[i].store_seq << "\n";
  }

 private:
  void write_entry(SsitEntry& e, std::uint32_t ssid, Addr pc) {
    e.valid = true;
    e.ssid = ssid;
    e.shadow_pc = cfg_.track_collisions ? pc : 0;
  }

  void clear() {
    std::fill(ssit_.begin(), ssit_.end(), SsitEntry{});
    std::fill(lfst_.begin(), lfst_.end(), LfstEntry{});
    ops_since_clear_ = 0;
  }

  PredictorConfig cfg_;
  std::vector<SsitEntry> ssit_;
  std::vector<LfstEntry> lfst_;
  std::uint64_t ops_since_clear_ = 0;
  PredictorCounters counters_;
};

}  // namespace pndsim
