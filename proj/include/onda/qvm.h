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

// Cycle-accurate simulator of the quantum microarchitecture. A state is a
// sparse superposition of classical machine configurations; one call to
// Simulator::step applies the fetch/decode/execute/PC-update cycle to every
// branch and merges branches whose configurations coincide.

#ifndef ONDA_QVM_H_
#define ONDA_QVM_H_

#include <array>
#include <compare>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "onda/assembler.h"
#include "onda/isa.h"

namespace onda {

using Amplitude = std::complex<double>;

// Word-addressed memory: an immutable initial image shared by every copy
// plus a sorted list of words that differ from it, copied on write. Program
// memory stays sparse (stack, garbage, a few data words), so copies and
// comparisons cost time proportional to what the program has touched.
// Equality and ordering compare contents, address by address.
class Memory {
 public:
  Memory() : Memory(0) {}
  explicit Memory(Word size, std::span<const Word> init = {});

  Word size() const { return size_; }
  Word load(Word addr) const;
  void store(Word addr, Word value);
  std::uint64_t hash() const { return hash_; }

  // True when every word in [from, size) is zero.
  bool zero_from(Word from) const;
  std::vector<Word> to_vector() const;

  friend bool operator==(const Memory& a, const Memory& b);
  friend std::strong_ordering operator<=>(const Memory& a, const Memory& b);

 private:
  using Entry = std::pair<Word, Word>;
  using Diff = std::vector<Entry>;

  Word base(Word addr) const { return addr < base_->size() ? (*base_)[addr] : 0; }

  std::shared_ptr<const std::vector<Word>> base_;
  std::shared_ptr<const Diff> diff_;
  Word size_ = 0;
  std::uint64_t hash_ = 0;
};

// One classical basis configuration of the machine.
struct MachineConfig final : MachineState {
  std::int64_t pc = 0;
  std::array<Word, kNumRegs> regs{};
  Memory mem;
  bool halted = false;
  bool crashed = false;

  Word reg(std::uint8_t r) const override { return regs[r]; }
  void set_reg(std::uint8_t r, Word v) override {
    if (r != reg::kZero) regs[r] = v;
  }
  Word load(Word addr) const override { return mem.load(addr); }
  void store(Word addr, Word v) override { mem.store(addr, v); }
  Word mem_size() const override { return mem.size(); }

  bool active() const { return !halted && !crashed; }
  std::uint64_t hash() const;

  friend bool operator==(const MachineConfig& a, const MachineConfig& b);
  // Canonical order: pc, registers, memory, then flags.
  friend std::strong_ordering operator<=>(const MachineConfig& a, const MachineConfig& b);
};

struct Branch {
  MachineConfig config;
  Amplitude amp;
};

// Branches are kept in canonical configuration order with unique configs.
struct QState {
  std::vector<Branch> branches;
  std::uint64_t cycle = 0;

  double norm_squared() const;
  const Branch* find(const MachineConfig& c) const;
};

class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunStats {
  std::uint64_t cycles = 0;
  std::size_t peak_branches = 0;
  std::uint64_t merges = 0;
  double pruned_mass = 0.0;
  // Branch-instruction executions per class.
  std::map<InstructionClass, std::uint64_t> class_histogram;
};

struct SimOptions {
  double prune_eps = 1e-12;
  // Verify norm conservation, garbage-region zeros and the no-merge rule
  // for permutation-only cycles after every cycle.
  bool check_invariants = false;
};

struct Outcome {
  Word value = 0;
  double probability = 0.0;
  QState state;
};

struct MeasurementEvent {
  std::int64_t pc = 0;
  std::uint8_t reg = 0;
  std::map<Word, double> dist;
};

struct EnsembleMember {
  std::vector<Word> history;
  double probability = 0.0;
  QState state;
};

struct RunLimits {
  std::uint64_t max_cycles = 10'000'000;
  double prune_eps = 1e-12;
  bool check_invariants = false;
  // Optional per-cycle trace of the top-K branches.
  std::ostream* trace = nullptr;
  std::size_t trace_top_k = 8;
};

struct RunResult {
  std::vector<EnsembleMember> ensemble;
  std::vector<MeasurementEvent> events;
  RunStats stats;
  double unhalted_mass = 0.0;
  double crashed_mass = 0.0;
};

struct SampleResult {
  std::vector<MeasurementEvent> events;  // dist holds counts, not probabilities
  std::uint64_t shots = 0;
  std::uint64_t unhalted_shots = 0;
  RunStats stats;
};

class Simulator {
 public:
  explicit Simulator(Program program, SimOptions options = {});

  const Program& program() const { return program_; }
  const SimOptions& options() const { return options_; }

  // Reset state: pc = entry, $ur = 1, $grp = garbage_base, $sp = $fp =
  // stack_base, memory = data segment then zeros.
  QState init_state() const;

  // One machine cycle on every branch. A branch sitting on `meas` only
  // advances its pc here; collapsing is done by run/measure_partition.
  QState step(const QState& s, RunStats* stats = nullptr) const;

  // Undoes one cycle. Halted branches are assumed to have halted during the
  // cycle being undone. Throws RuntimeError when the cycle executed a
  // measurement.
  QState step_inverse(const QState& s) const;

  // Throws RuntimeError when an invariant enabled by check_invariants fails.
  void check_invariants(const QState& s, double expected_norm) const;

  std::size_t prune(QState& s, RunStats* stats) const;

 private:
  Program program_;
  SimOptions options_;
};

std::vector<Outcome> measure_partition(const QState& s, std::uint8_t reg);

RunResult run(const Program& p, const RunLimits& limits = {});

SampleResult sample_run(const Program& p, std::uint64_t shots, std::uint64_t seed,
                        const RunLimits& limits = {});

}  // namespace onda

#endif  // ONDA_QVM_H_
