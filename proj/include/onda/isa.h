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

// Instruction set of the reversible 64-bit quantum ISA: opcodes, encoding,
// register aliases and the classical (permutation) semantics of every
// instruction.

#ifndef ONDA_ISA_H_
#define ONDA_ISA_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace onda {

using Word = std::uint32_t;
using SWord = std::int32_t;

inline constexpr int kNumRegs = 32;

// Register indices with a fixed architectural role.
namespace reg {
inline constexpr std::uint8_t kZero = 0;
inline constexpr std::uint8_t kUr = 1;
inline constexpr std::uint8_t kTur = 2;
inline constexpr std::uint8_t kV0 = 3;
inline constexpr std::uint8_t kV1 = 4;
inline constexpr std::uint8_t kA0 = 5;
inline constexpr std::uint8_t kS0 = 9;
inline constexpr std::uint8_t kT0 = 19;
inline constexpr std::uint8_t kGrp = 28;
inline constexpr std::uint8_t kSp = 29;
inline constexpr std::uint8_t kFp = 30;
inline constexpr std::uint8_t kRa = 31;
}  // namespace reg

enum class Opcode : std::uint8_t {
  kNop = 0x00,
  kAddi = 0x01,
  kAdd = 0x02,
  kSub = 0x03,
  kNeg = 0x04,
  kNotr = 0x05,
  kXorr = 0x06,
  kXori = 0x07,
  kSwap = 0x08,
  kCswap = 0x09,
  kRoti = 0x0A,
  kCaddi = 0x0B,
  kCadd = 0x0C,
  kCzaddi = 0x0D,
  kTcs = 0x0E,
  kTcai = 0x0F,
  kMadd = 0x10,
  kMsub = 0x11,
  kXand = 0x12,
  kXior = 0x13,
  kXsll = 0x14,
  kXsrl = 0x15,
  kXslt = 0x16,
  kXltu = 0x17,
  kXeq = 0x18,
  kXmulk = 0x19,
  kXdivk = 0x1A,
  kXrem = 0x1B,
  kSwapm = 0x1C,
  kXorm = 0x1D,
  kHq = 0x1E,
  kZq = 0x1F,
  kRzk = 0x20,
  kMeas = 0x21,
  kHalt = 0x22,
  kItcs = 0x23,
  kCsub = 0x24,
  kXsllv = 0x25,
  kXsrlv = 0x26,
};

inline constexpr int kNumOpcodes = 0x27;

enum class InstructionClass { kPermutation, kHadamard, kPhase, kMeasurement, kHalt, kNop };

// Operand slots in assembly order. kBit is a 5-bit literal stored in the ra
// field (rzk only).
enum class Operand : std::uint8_t { kRd, kRa, kRb, kRc, kPol, kImm, kBit };

struct OpcodeInfo {
  Opcode opcode;
  std::string_view mnemonic;
  InstructionClass cls;
  std::array<Operand, 5> operands;
  int num_operands;
};

struct Instruction {
  Opcode opcode = Opcode::kNop;
  std::uint8_t rd = 0;
  std::uint8_t ra = 0;
  std::uint8_t rb = 0;
  std::uint8_t rc = 0;
  bool pol = false;
  SWord imm = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

// Raised for operand-constraint violations, undecodable words and
// non-invertible instructions.
class IsaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Opcode table lookups. `info` throws IsaError for unassigned opcodes.
const OpcodeInfo& info(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(std::string_view mnemonic);
std::span<const OpcodeInfo> opcode_table();

InstructionClass classify(const Instruction& instr);

// Checks the per-opcode operand constraints; returns a diagnostic message or
// nullopt when the instruction is well formed.
std::optional<std::string> validate(const Instruction& instr);

std::uint64_t encode(const Instruction& instr);
Instruction decode(std::uint64_t word);

std::optional<std::uint8_t> register_alias(std::string_view name);
std::string_view register_name(std::uint8_t index);

// Field helpers shared by the simulator and tests.
inline constexpr bool lsb(Word w) { return (w & 1u) != 0; }

Instruction invert_instruction(const Instruction& instr);

// Assembly rendering of one instruction, e.g. "caddi $t0, 0, $ur, 4".
std::string to_string(const Instruction& instr);

// Register/memory view used by exec_permutation. `mem` may be empty for
// instructions that do not touch memory; memory addressing is modulo its
// size.
class MachineState {
 public:
  virtual ~MachineState() = default;
  virtual Word reg(std::uint8_t r) const = 0;
  virtual void set_reg(std::uint8_t r, Word v) = 0;
  virtual Word load(Word addr) const = 0;
  virtual void store(Word addr, Word v) = 0;
  virtual Word mem_size() const = 0;
};

// Applies a Permutation or Nop instruction in place. PC handling is left to
// the caller.
void exec_permutation(const Instruction& instr, MachineState& state);

// Plain register file plus flat memory; the reference MachineState.
class BasicState final : public MachineState {
 public:
  explicit BasicState(Word mem_words = 0) : mem_(mem_words, 0) {}

  Word reg(std::uint8_t r) const override { return regs_[r]; }
  void set_reg(std::uint8_t r, Word v) override {
    if (r != reg::kZero) regs_[r] = v;
  }
  Word load(Word addr) const override { return mem_[addr]; }
  void store(Word addr, Word v) override { mem_[addr] = v; }
  Word mem_size() const override { return static_cast<Word>(mem_.size()); }

  const std::array<Word, kNumRegs>& regs() const { return regs_; }
  const std::vector<Word>& mem() const { return mem_; }

  friend bool operator==(const BasicState& a, const BasicState& b) {
    return a.regs_ == b.regs_ && a.mem_ == b.mem_;
  }

 private:
  std::array<Word, kNumRegs> regs_{};
  std::vector<Word> mem_;
};

}  // namespace onda

#endif  // ONDA_ISA_H_
