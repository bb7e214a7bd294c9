// Copyright 2026 The ONDA Toolchain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "onda/qvm.h"
#include "test_util.h"

namespace onda {
namespace {

constexpr std::uint8_t kT0 = 19, kT1 = 20, kT2 = 21;

Program asm_or_die(std::string_view src) {
  AssemblyResult r = assemble(src);
  if (!r.program) throw std::runtime_error(r.diagnostics.to_string());
  return *r.program;
}

TEST(InitState, Reset) {
  Program p = asm_or_die("halt\n");
  Simulator sim(p);
  QState s = sim.init_state();
  ASSERT_EQ(s.branches.size(), 1u);
  const MachineConfig& c = s.branches[0].config;
  EXPECT_EQ(c.pc, 0);
  EXPECT_EQ(c.regs[reg::kUr], 1u);
  EXPECT_EQ(c.regs[reg::kGrp], p.garbage_base);
  EXPECT_EQ(c.regs[reg::kSp], p.stack_base);
  EXPECT_EQ(c.regs[reg::kFp], p.stack_base);
  EXPECT_EQ(s.branches[0].amp, Amplitude(1.0));
}

TEST(InitState, DataAndOverlap) {
  Program p = asm_or_die(".data\n.word 3\n.text\nhalt\n");
  EXPECT_EQ(Simulator(p).init_state().branches[0].config.mem.load(0), 3u);
  p.garbage_base = 0;
  EXPECT_THROW(Simulator{p}, RuntimeError);
}

TEST(Step, Sequential) {
  Program p = asm_or_die("addi $t1, 6\nadd $t2, $t1\n");
  Simulator sim(p);
  QState s = sim.step(sim.init_state());
  EXPECT_EQ(s.branches[0].config.regs[kT1], 6u);
  EXPECT_EQ(s.branches[0].config.pc, 1);
  s = sim.step(s);
  EXPECT_EQ(s.branches[0].config.regs[kT2], 6u);
  EXPECT_TRUE(s.branches[0].config.halted);
  EXPECT_EQ(s.branches[0].config.pc, 2);
}

TEST(Step, HadamardAndPhase) {
  Simulator sim(asm_or_die("hq $t0, 1\nzq $t0, 1\nhq $t0, 1\n"));
  QState s = sim.step(sim.init_state());
  ASSERT_EQ(s.branches.size(), 2u);
  for (const Branch& b : s.branches) EXPECT_NEAR(b.amp.real(), 1.0 / std::sqrt(2.0), 1e-15);
  s = sim.step(s);
  EXPECT_GT(s.branches[0].amp.real(), 0);  // t0 = 0 keeps its sign
  EXPECT_LT(s.branches[1].amp.real(), 0);
  s = sim.step(s);
  // H Z H |0> = |1>.
  ASSERT_EQ(s.branches.size(), 1u);
  EXPECT_EQ(s.branches[0].config.regs[kT0], 1u);
  EXPECT_NEAR(std::abs(s.branches[0].amp), 1.0, 1e-12);
}

TEST(Step, HadamardTensorSigns) {
  // Oracle: amplitude of |v> from |old> is 2^(-b/2) (-1)^(old.v).
  Program p = asm_or_die("hq $t0, 3\n");
  Simulator sim(p);
  QState s = sim.init_state();
  s.branches[0].config.regs[kT0] = 0b101 | 0x80;
  s = sim.step(s);
  ASSERT_EQ(s.branches.size(), 8u);
  for (const Branch& b : s.branches) {
    Word v = b.config.regs[kT0] & 7;
    EXPECT_EQ(b.config.regs[kT0] & ~7u, 0x80u);
    int parity = __builtin_popcount(v & 0b101) % 2;
    EXPECT_NEAR(b.amp.real(), (parity ? -1 : 1) / std::sqrt(8.0), 1e-15);
  }
}

TEST(Step, DestructiveInterference) {
  Program p = asm_or_die("nop\n");
  Simulator sim(p);
  QState s = sim.init_state();
  Branch other = s.branches[0];
  s.branches[0].amp = 0.6;
  other.config.mem.store(100, 7);  // differs only in one memory word
  other.amp = -0.6;
  s.branches.push_back(other);
  std::sort(s.branches.begin(), s.branches.end(),
            [](const Branch& a, const Branch& b) { return a.config < b.config; });
  RunStats stats;
  QState t = sim.step(s, &stats);
  EXPECT_EQ(t.branches.size(), 2u);
  EXPECT_EQ(stats.merges, 0u);

  // Same configurations with opposite amplitudes cancel completely once a
  // Hadamard cycle brings them together.
  Simulator h(asm_or_die("hq $t0, 1\nhq $t0, 1\n"));
  QState u = h.init_state();
  u.branches[0].config.regs[kT0] = 1;
  u = h.step(h.step(u, &stats), &stats);
  ASSERT_EQ(u.branches.size(), 1u);
  EXPECT_EQ(u.branches[0].config.regs[kT0], 1u);
  EXPECT_GT(stats.merges, 0u);
}

TEST(Step, ConditionalJump) {
  Program p = asm_or_die("caddi $t0, 1, $ur, 2\nnop\nnop\nnop\nnop\n");
  Simulator sim(p);
  QState s = sim.init_state();
  s.branches[0].config.regs[kT0] = 1;
  s = sim.step(s);
  EXPECT_EQ(s.branches[0].config.pc, 3);
}

TEST(Step, ReExecutionWhenUrIsZero) {
  Program p = asm_or_die("addi $ur, -1\naddi $t0, 1\naddi $ur, 1\n");
  Simulator sim(p);
  QState s = sim.step(sim.init_state());
  EXPECT_EQ(s.branches[0].config.pc, 0);  // ur = 0, pc unchanged
  s = sim.step(s);
  EXPECT_EQ(s.branches[0].config.regs[reg::kUr], static_cast<Word>(-1));
  EXPECT_EQ(s.branches[0].config.pc, -1);
  EXPECT_TRUE(s.branches[0].config.crashed);
}

TEST(Step, HaltedFixedPoint) {
  Program p = asm_or_die("halt\n");
  RunResult r = run(p);
  EXPECT_EQ(r.stats.cycles, 1u);
  EXPECT_EQ(r.unhalted_mass, 0.0);
  Simulator sim(p);
  QState s = sim.step(sim.init_state());
  QState t = sim.step(s);
  ASSERT_EQ(t.branches.size(), 1u);
  EXPECT_EQ(t.branches[0].config, s.branches[0].config);
  EXPECT_EQ(t.branches[0].amp, s.branches[0].amp);
}

TEST(Step, CrashMassReported) {
  RunResult r = run(asm_or_die("hq $t0, 1\ncaddi $t0, 1, $ur, 40\nhalt\n"));
  EXPECT_NEAR(r.crashed_mass, 0.5, 1e-12);
}

TEST(Run, SuperposeShiftPhase) {
  RunResult r = run(asm_or_die("hq $t0, 6\nhq $t0, 2\naddi $t0, 1\nzq $t0, 1\n"));
  ASSERT_EQ(r.ensemble.size(), 1u);
  const QState& s = r.ensemble[0].state;
  ASSERT_EQ(s.branches.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(s.branches[i].config.regs[kT0], 4 * i + 1);
    EXPECT_NEAR(s.branches[i].amp.real(), -0.25, 1e-12);
    EXPECT_NEAR(s.branches[i].amp.imag(), 0.0, 1e-12);
  }
}

TEST(Run, MeasurementEvents) {
  RunResult r = run(asm_or_die("hq $t0, 2\nmeas $t0\nhalt\n"));
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].pc, 1);
  EXPECT_EQ(r.events[0].reg, kT0);
  ASSERT_EQ(r.events[0].dist.size(), 4u);
  for (const auto& [v, p] : r.events[0].dist) EXPECT_NEAR(p, 0.25, 1e-12);
  EXPECT_EQ(r.ensemble.size(), 4u);
  double total = 0;
  for (const auto& m : r.ensemble) {
    total += m.probability;
    EXPECT_NEAR(m.state.norm_squared(), 1.0, 1e-12);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Run, DesynchronizedMeasurement) {
  Program p = asm_or_die("hq $t0, 1\ncaddi $t0, 1, $ur, 1\nmeas $t1\nhalt\n");
  try {
    run(p);
    FAIL();
  } catch (const RuntimeError& e) {
    EXPECT_NE(std::string(e.what()).find("desynchronized measurement"), std::string::npos);
  }
}

TEST(Run, CycleLimit) {
  // Endless two-instruction loop entered at the second instruction.
  RunLimits limits;
  limits.max_cycles = 10;
  RunResult r = run(asm_or_die("addi $ur, 2\nL: addi $ur, -2\n.entry L\n"), limits);
  EXPECT_EQ(r.stats.cycles, 10u);
  EXPECT_NEAR(r.unhalted_mass, 1.0, 1e-15);
}

TEST(Run, TraceAndInvariants) {
  std::ostringstream trace;
  RunLimits limits;
  limits.trace = &trace;
  limits.trace_top_k = 2;
  limits.check_invariants = true;
  RunResult r = run(asm_or_die("hq $t0, 3\naddi $t1, 4\nhq $t0, 3\n"), limits);
  EXPECT_EQ(r.stats.peak_branches, 8u);
  EXPECT_EQ(r.stats.class_histogram.at(InstructionClass::kHadamard), 9u);
  EXPECT_NE(trace.str().find("cycle 1 pc 1 [addi $t1, 4]"), std::string::npos);
}

TEST(Run, GarbageInvariantDetectsDirtyRegion) {
  Program p = asm_or_die("addi $t0, 9\nswapm $t0, $grp, 1\n");
  RunLimits limits;
  limits.check_invariants = true;
  EXPECT_THROW(run(p, limits), RuntimeError);
  // Bumping the pointer first keeps the region clean at every cycle.
  p = asm_or_die("addi $t0, 9\naddi $grp, 1\nswapm $t0, $grp, -1\n");
  EXPECT_NO_THROW(run(p, limits));
}

TEST(Partition, Examples) {
  Simulator sim(asm_or_die("hq $t0, 1\n"));
  QState s = sim.init_state();
  s.branches[0].config.regs[kT0] = 5;
  auto single = measure_partition(s, kT0);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].value, 5u);
  EXPECT_EQ(single[0].probability, 1.0);

  auto two = measure_partition(sim.step(sim.init_state()), kT0);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_NEAR(two[0].probability, 0.5, 1e-15);
  EXPECT_NEAR(two[1].probability, 0.5, 1e-15);
  EXPECT_NEAR(two[1].state.norm_squared(), 1.0, 1e-15);
}

TEST(Sample, DeterministicAndCollapsed) {
  Program p = asm_or_die("hq $t0, 4\nmeas $t0\nhq $t1, 1\nhq $t1, 1\nmeas $t1\nhalt\n");
  SampleResult a = sample_run(p, 500, 7);
  SampleResult b = sample_run(p, 500, 7);
  ASSERT_EQ(a.events.size(), 2u);
  EXPECT_EQ(a.events[0].dist, b.events[0].dist);
  EXPECT_EQ(a.events[1].dist, (std::map<Word, double>{{0, 500.0}}));
  double total = 0;
  for (const auto& [v, c] : a.events[0].dist) total += c;
  EXPECT_EQ(total, 500.0);
  EXPECT_EQ(a.events[0].dist.size(), 16u);
  SampleResult c = sample_run(p, 500, 8);
  EXPECT_NE(a.events[0].dist, c.events[0].dist);
}

// Random measurement-free programs that never write $ur, with quantum ops on
// a few bits so branch counts stay small.
Program random_reversible_program(std::mt19937_64& rng, std::size_t len) {
  Program p;
  p.mem_words = 256;
  p.stack_base = 0;
  p.garbage_base = 128;
  while (p.instructions.size() < len) {
    Instruction in = testing::random_instruction(rng);
    InstructionClass cls = classify(in);
    if (cls == InstructionClass::kMeasurement || cls == InstructionClass::kHalt) continue;
    if (in.rd == reg::kUr || in.ra == reg::kUr || in.rb == reg::kUr || in.rc == reg::kUr) continue;
    if (in.opcode == Opcode::kTcs || in.opcode == Opcode::kItcs) continue;  // write $ur implicitly
    if ((in.opcode == Opcode::kSwap || in.opcode == Opcode::kCswap) && in.rd == reg::kGrp) continue;
    if (cls == InstructionClass::kHadamard) in.imm = 1 + rng() % 3;
    if (in.opcode == Opcode::kZq) in.imm = 1 + rng() % 32;
    p.instructions.push_back(in);
  }
  return p;
}

TEST(Reversibility, RandomPrograms) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    Program p = random_reversible_program(rng, 12);
    Simulator sim(p);
    QState s0 = sim.init_state();
    QState s = s0;
    std::size_t k = 1 + rng() % 11;
    for (std::size_t i = 0; i < k; ++i) s = sim.step(s);
    for (std::size_t i = 0; i < k; ++i) s = sim.step_inverse(s);
    ASSERT_EQ(s.branches.size(), s0.branches.size());
    EXPECT_EQ(s.branches[0].config, s0.branches[0].config);
    EXPECT_NEAR(std::abs(s.branches[0].amp - s0.branches[0].amp), 0.0, 1e-12);
  }
}

TEST(Reversibility, NormConservedPerCycle) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    Simulator sim(random_reversible_program(rng, 16));
    QState s = sim.init_state();
    for (int i = 0; i < 16; ++i) {
      s = sim.step(s);
      ASSERT_NEAR(s.norm_squared(), 1.0, 1e-9);
    }
  }
}

TEST(Reversibility, MeasurementBlocksInverse) {
  Simulator sim(asm_or_die("meas $t0\nhalt\n"));
  QState s = sim.step(sim.init_state());
  try {
    sim.step_inverse(s);
    FAIL();
  } catch (const RuntimeError& e) {
    EXPECT_NE(std::string(e.what()).find("cannot invert across measurement"), std::string::npos);
  }
}

TEST(Reversibility, HaltedBranchesUnhalt) {
  Simulator sim(asm_or_die("hq $t0, 1\ncaddi $t0, 1, $ur, 1\nhalt\ncaddi $t0, 1, $ur, -1\n"));
  QState s0 = sim.init_state();
  QState s = s0;
  for (int i = 0; i < 3; ++i) s = sim.step(s);
  // The t0=1 branch fell off the end; t0=0 sits on halt.
  ASSERT_EQ(s.branches.size(), 2u);
  EXPECT_TRUE(s.branches[0].config.halted && s.branches[1].config.halted);
  for (int i = 0; i < 3; ++i) s = sim.step_inverse(s);
  ASSERT_EQ(s.branches.size(), 1u);
  EXPECT_EQ(s.branches[0].config, s0.branches[0].config);
}

TEST(Memory, CopyOnWriteIsInvisible) {
  std::vector<Word> init = {1, 2, 3};
  Memory a(300, init);
  Memory b = a;
  b.store(200, 5);
  EXPECT_EQ(a.load(200), 0u);
  EXPECT_EQ(b.load(200), 5u);
  EXPECT_NE(a, b);
  EXPECT_LT(a, b);
  b.store(200, 0);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_TRUE(a.zero_from(3));
  EXPECT_FALSE(a.zero_from(2));
  EXPECT_EQ(a.to_vector()[1], 2u);
}

}  // namespace
}  // namespace onda
