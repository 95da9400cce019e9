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

#include <gtest/gtest.h>

#include <sstream>

#include "pndsim/analysis.hpp"
#include "pndsim/lowering.hpp"
#include "pndsim/parse.hpp"

using namespace pndsim;

namespace {

ArrayPlacement place(std::uint64_t base, std::int64_t len, std::int64_t esz = 4, std::vector<std::int64_t> init = {}) {
  ArrayPlacement p;
  p.base = base;
  p.length = len;
  p.elem_size = esz;
  p.init = std::move(init);
  return p;
}

}  // namespace

TEST(Lower, PcsSequenceAndImmediates) {
  auto p = mir::parse_program(
      "fn f(arr a, int n) {\n  for i = 0 to n step 1 {\n    load x = a[i]\n    alu y = x + i\n    store a[i] = y\n"
      "  }\n}\n");
  LoweringInputs in;
  in.entry = "f";
  in.scalars["n"] = 3;
  in.arrays["a"] = place(0x1000, 3);
  Trace t = lower(p, in);
  ASSERT_EQ(t.ops.size(), 9u);
  for (std::size_t k = 0; k < t.ops.size(); ++k) {
    EXPECT_EQ(t.ops[k].seq, k);
    EXPECT_EQ(t.ops[k].pc, (k % 3) * 4);
  }
  EXPECT_EQ(t.ops[3].addr, 0x1004u);
  EXPECT_EQ(t.ops[3].size, 4u);
  const DynOp& alu = t.ops[4];
  ASSERT_EQ(alu.srcs.size(), 2u);
  EXPECT_TRUE(alu.srcs[0].is_reg);
  EXPECT_FALSE(alu.srcs[1].is_reg);
  EXPECT_EQ(alu.srcs[1].imm, 1);
}

TEST(Lower, HalfOpenAndNegativeSteps) {
  auto p = mir::parse_program("fn f(arr a) {\n  for i = 5 to 0 step -2 {\n    load x = a[i]\n  }\n}\n");
  LoweringInputs in;
  in.entry = "f";
  in.arrays["a"] = place(0, 8, 1);
  Trace t = lower(p, in);
  ASSERT_EQ(t.ops.size(), 3u);  // 5, 3, 1
  EXPECT_EQ(t.ops[0].addr, 5u);
  EXPECT_EQ(t.ops[2].addr, 1u);
}

TEST(Lower, RepeatRunsEntryBackToBack) {
  auto p = mir::parse_program("fn f(arr a) {\n  for i = 0 to 2 step 1 {\n    load x = a[i]\n  }\n}\n");
  LoweringInputs in;
  in.entry = "f";
  in.repeat = 3;
  in.arrays["a"] = place(0, 2);
  Trace t = lower(p, in);
  ASSERT_EQ(t.ops.size(), 6u);
  EXPECT_EQ(t.ops[5].seq, 5u);
  EXPECT_EQ(t.ops[5].pc, 0u);
}

TEST(Lower, PndSurvivesAndDelayApplies) {
  auto p = analysis::label_pass(mir::parse_program(
                                    "fn f(arr a restrict, arr b restrict) {\n  for i = 0 to 2 step 1 {\n"
                                    "    store a[i] = i\n    load x = b[i]\n  }\n}\n"))
               .program;
  LoweringInputs in;
  in.entry = "f";
  in.arrays["a"] = place(0, 2);
  in.arrays["b"] = place(0x100, 2);
  in.addr_delay[0] = 7;
  Trace t = lower(p, in);
  EXPECT_EQ(t.ops[0].addr_ready_latency, 7u);
  EXPECT_EQ(t.ops[1].addr_ready_latency, 0u);
  EXPECT_TRUE(t.ops[1].pnd);
  EXPECT_FALSE(t.ops[0].pnd);
}

TEST(Lower, Errors) {
  auto p = mir::parse_program("fn f(arr a, int n) {\n  for i = 0 to n step 1 {\n    load x = a[i]\n  }\n}\n");
  LoweringInputs in;
  in.entry = "f";
  in.arrays["a"] = place(0, 2);
  EXPECT_THROW(lower(p, in), LoweringError);  // n unbound
  in.scalars["n"] = 3;
  EXPECT_THROW(lower(p, in), LoweringError);  // a[2] out of bounds
  in.scalars["n"] = 2;
  EXPECT_NO_THROW(lower(p, in));
  in.entry = "g";
  EXPECT_THROW(lower(p, in), LoweringError);
  in.entry = "f";
  in.arrays.clear();
  EXPECT_THROW(lower(p, in), LoweringError);
}

TEST(Lower, CallScriptsMustMatchSummary) {
  auto p = mir::parse_program(
      "array g[4] esz 2\narray h[4] esz 2\nfn f() {\n  for i = 0 to 2 step 1 {\n    call k reads() writes(g)\n  }\n}\n");
  LoweringInputs in;
  in.entry = "f";
  in.call_scripts["k"] = {{"g", 1, -3}};
  Trace t = lower(p, in);
  ASSERT_EQ(t.ops.size(), 2u);
  ASSERT_EQ(t.ops[0].writes.size(), 1u);
  EXPECT_EQ(t.ops[0].writes[0].addr, kAutoGlobalBase + 2);
  EXPECT_EQ(t.ops[0].writes[0].size, 2u);
  in.call_scripts["k"] = {{"h", 1, 5}};
  EXPECT_THROW(lower(p, in), LoweringError);
}

TEST(MachineState, LittleEndianAndSignExtension) {
  MachineState s;
  s.write(0x10, 4, 0x11223344);
  EXPECT_EQ(s.memory.at(0x10), 0x44);
  EXPECT_EQ(s.memory.at(0x13), 0x11);
  s.write(0x20, 2, -2);
  EXPECT_EQ(s.read(0x20, 2), -2);
  EXPECT_EQ(s.read(0x20, 1), -2);
  s.write(0x30, 1, 0x80);
  EXPECT_EQ(s.read(0x30, 1), -128);
  EXPECT_EQ(truncate_to_size(0x1ff, 1), -1);
  EXPECT_EQ(truncate_to_size(300, 8), 300);
}

TEST(InOrder, ComputesListing1) {
  auto p = mir::parse_program(
      "fn f(arr a restrict, arr b restrict, int n) {\n  for i = 0 to n step 1 {\n    load x = a[i]\n"
      "    load y = b[i]\n    alu z = x + y\n    store a[i] = z\n  }\n}\n");
  LoweringInputs in;
  in.entry = "f";
  in.scalars["n"] = 4;
  in.arrays["a"] = place(0x100, 4, 4, {1, 2, 3, 4});
  in.arrays["b"] = place(0x200, 4, 4, {10, 20, 30, 40});
  MachineState s = run_inorder(lower(p, in), initial_state(p, in));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(s.read(0x100 + 4 * i, 4), (i + 1) * 11);
  EXPECT_EQ(s.registers.at("z"), 44);
}

TEST(InitialState, AliasesShareStorage) {
  auto p = mir::parse_program("fn f(arr a, arr c) {\n  store c[0] = z\n}\n");
  LoweringInputs in;
  in.entry = "f";
  in.arrays["a"] = place(0x100, 4, 4, {1, 2, 3, 4});
  ArrayPlacement c = place(0x108, 2);
  c.is_alias = true;
  in.arrays["c"] = c;
  MachineState s = initial_state(p, in);
  EXPECT_EQ(s.memory.size(), 16u);
  MachineState after = run_inorder(lower(p, in), s);
  EXPECT_EQ(after.read(0x108, 4), 0);
  EXPECT_EQ(after.read(0x104, 4), 2);
}

TEST(DumpTrace, OneLinePerOp) {
  auto p = mir::parse_program("fn f(arr a) {\n  for i = 0 to 2 step 1 {\n    load x = a[i]\n  }\n}\n");
  LoweringInputs in;
  in.entry = "f";
  in.arrays["a"] = place(0x40, 2);
  std::ostringstream os;
  dump_trace(os, lower(p, in));
  EXPECT_EQ(os.str(), "# seq pc kind addr pnd\n0 0x0 load 0x40 0\n1 0x0 load 0x44 0\n");
}
