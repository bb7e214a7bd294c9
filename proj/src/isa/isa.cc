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

#include "onda/isa.h"

#include <algorithm>
#include <bit>
#include <sstream>

namespace onda {
namespace {

using IC = InstructionClass;
using Op = Operand;

constexpr Op RD = Op::kRd;
constexpr Op RA = Op::kRa;
constexpr Op RB = Op::kRb;
constexpr Op RC = Op::kRc;
constexpr Op POL = Op::kPol;
constexpr Op IMM = Op::kImm;
constexpr Op BIT = Op::kBit;

constexpr OpcodeInfo Row(Opcode op, std::string_view m, IC c) { return {op, m, c, {}, 0}; }
constexpr OpcodeInfo Row(Opcode op, std::string_view m, IC c, Op a) {
  return {op, m, c, {a}, 1};
}
constexpr OpcodeInfo Row(Opcode op, std::string_view m, IC c, Op a, Op b) {
  return {op, m, c, {a, b}, 2};
}
constexpr OpcodeInfo Row(Opcode op, std::string_view m, IC c, Op a, Op b, Op d) {
  return {op, m, c, {a, b, d}, 3};
}
constexpr OpcodeInfo Row(Opcode op, std::string_view m, IC c, Op a, Op b, Op d, Op e) {
  return {op, m, c, {a, b, d, e}, 4};
}
constexpr OpcodeInfo Row(Opcode op, std::string_view m, IC c, Op a, Op b, Op d, Op e, Op f) {
  return {op, m, c, {a, b, d, e, f}, 5};
}

constexpr IC P = IC::kPermutation;

// Indexed by opcode value.
constexpr std::array<OpcodeInfo, kNumOpcodes> kTable = {{
    Row(Opcode::kNop, "nop", IC::kNop),
    Row(Opcode::kAddi, "addi", P, RD, IMM),
    Row(Opcode::kAdd, "add", P, RD, RA),
    Row(Opcode::kSub, "sub", P, RD, RA),
    Row(Opcode::kNeg, "neg", P, RD),
    Row(Opcode::kNotr, "notr", P, RD),
    Row(Opcode::kXorr, "xorr", P, RD, RA),
    Row(Opcode::kXori, "xori", P, RD, IMM),
    Row(Opcode::kSwap, "swap", P, RD, RA),
    Row(Opcode::kCswap, "cswap", P, RC, POL, RD, RA),
    Row(Opcode::kRoti, "roti", P, RD, IMM),
    Row(Opcode::kCaddi, "caddi", P, RC, POL, RD, IMM),
    Row(Opcode::kCadd, "cadd", P, RC, POL, RD, RA),
    Row(Opcode::kCzaddi, "czaddi", P, RC, RD, IMM),
    Row(Opcode::kTcs, "tcs", P, RC, RA, RD, RB),
    Row(Opcode::kTcai, "tcai", P, RC, RA, RD, RB, IMM),
    Row(Opcode::kMadd, "madd", P, RD, RA, RB),
    Row(Opcode::kMsub, "msub", P, RD, RA, RB),
    Row(Opcode::kXand, "xand", P, RD, RA, RB),
    Row(Opcode::kXior, "xior", P, RD, RA, RB),
    Row(Opcode::kXsll, "xsll", P, RD, RA, IMM),
    Row(Opcode::kXsrl, "xsrl", P, RD, RA, IMM),
    Row(Opcode::kXslt, "xslt", P, RD, RA, RB),
    Row(Opcode::kXltu, "xltu", P, RD, RA, RB),
    Row(Opcode::kXeq, "xeq", P, RD, RA, RB),
    Row(Opcode::kXmulk, "xmulk", P, RD, RA, RB, IMM),
    Row(Opcode::kXdivk, "xdivk", P, RD, RA, RB, IMM),
    Row(Opcode::kXrem, "xrem", P, RD, RA, RB),
    Row(Opcode::kSwapm, "swapm", P, RD, RA, IMM),
    Row(Opcode::kXorm, "xorm", P, RD, RA, IMM),
    Row(Opcode::kHq, "hq", IC::kHadamard, RD, IMM),
    Row(Opcode::kZq, "zq", IC::kPhase, RD, IMM),
    Row(Opcode::kRzk, "rzk", IC::kPhase, RD, BIT, IMM),
    Row(Opcode::kMeas, "meas", IC::kMeasurement, RD),
    Row(Opcode::kHalt, "halt", IC::kHalt),
    Row(Opcode::kItcs, "itcs", P, RC, RA, RD, RB),
    Row(Opcode::kCsub, "csub", P, RC, POL, RD, RA),
    Row(Opcode::kXsllv, "xsllv", P, RD, RA, RB),
    Row(Opcode::kXsrlv, "xsrlv", P, RD, RA, RB),
}};

constexpr std::array<std::string_view, kNumRegs> kRegNames = {
    "$zero", "$ur", "$tur", "$v0", "$v1", "$a0", "$a1", "$a2", "$a3", "$s0", "$s1",
    "$s2",   "$s3", "$s4",  "$s5", "$s6", "$s7", "$s8", "$s9", "$t0", "$t1", "$t2",
    "$t3",   "$t4", "$t5",  "$t6", "$t7", "$t8", "$grp", "$sp", "$fp", "$ra"};

bool uses(const OpcodeInfo& oi, Operand op) {
  auto end = oi.operands.begin() + oi.num_operands;
  return std::find(oi.operands.begin(), end, op) != end;
}

// Register fields an opcode writes. $ur is written implicitly by tcs/itcs.
bool writes_rd(Opcode op) {
  switch (op) {
    case Opcode::kNop:
    case Opcode::kZq:
    case Opcode::kRzk:
    case Opcode::kMeas:
    case Opcode::kHalt:
      return false;
    default:
      return true;
  }
}

bool writes_ra(Opcode op) {
  switch (op) {
    case Opcode::kSwap:
    case Opcode::kCswap:
    case Opcode::kTcs:
    case Opcode::kItcs:
      return true;
    default:
      return false;
  }
}

bool writes_rb(Opcode op) {
  return op == Opcode::kTcs || op == Opcode::kItcs || op == Opcode::kTcai;
}

bool distinct(std::initializer_list<std::uint8_t> regs) {
  std::vector<std::uint8_t> v(regs);
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) == v.end();
}

Word rotl(Word v, SWord by) {
  int s = ((by % 32) + 32) % 32;
  return std::rotl(v, s);
}

SWord negate(SWord v) { return static_cast<SWord>(0u - static_cast<Word>(v)); }

}  // namespace

std::span<const OpcodeInfo> opcode_table() { return kTable; }

const OpcodeInfo& info(Opcode op) {
  auto idx = static_cast<std::size_t>(op);
  if (idx >= kTable.size()) throw IsaError("unknown opcode " + std::to_string(idx));
  return kTable[idx];
}

std::optional<Opcode> opcode_from_mnemonic(std::string_view mnemonic) {
  for (const auto& row : kTable)
    if (row.mnemonic == mnemonic) return row.opcode;
  return std::nullopt;
}

InstructionClass classify(const Instruction& instr) { return info(instr.opcode).cls; }

std::optional<std::string> validate(const Instruction& in) {
  auto idx = static_cast<std::size_t>(in.opcode);
  if (idx >= kTable.size()) return "unknown opcode " + std::to_string(idx);
  const OpcodeInfo& oi = kTable[idx];
  for (std::uint8_t r : {in.rd, in.ra, in.rb, in.rc})
    if (r >= kNumRegs) return "register index out of range";

  // Fields the opcode does not use must be zero so encodings are canonical.
  bool bit_in_ra = uses(oi, Operand::kBit);
  if (!uses(oi, Operand::kRd) && in.rd != 0) return "unused rd field must be zero";
  if (!uses(oi, Operand::kRa) && !bit_in_ra && in.ra != 0) return "unused ra field must be zero";
  if (!uses(oi, Operand::kRb) && in.rb != 0) return "unused rb field must be zero";
  if (!uses(oi, Operand::kRc) && in.rc != 0) return "unused rc field must be zero";
  if (!uses(oi, Operand::kPol) && in.pol) return "unused pol field must be zero";
  if (!uses(oi, Operand::kImm) && in.imm != 0) return "unused immediate must be zero";

  if (writes_rd(in.opcode) && uses(oi, Operand::kRd) && in.rd == reg::kZero)
    return "$zero cannot be written";
  if (writes_ra(in.opcode) && in.ra == reg::kZero) return "$zero cannot be written";
  if (writes_rb(in.opcode) && in.rb == reg::kZero) return "$zero cannot be written";

  switch (in.opcode) {
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kXorr:
    case Opcode::kXsll:
    case Opcode::kXsrl:
    case Opcode::kSwapm:
    case Opcode::kXorm:
      if (in.rd == in.ra) return "operand aliasing: rd must differ from ra";
      break;
    case Opcode::kCswap:
      if (in.rc == in.rd || in.rc == in.ra) return "operand aliasing: control register is swapped";
      break;
    case Opcode::kCaddi:
    case Opcode::kCzaddi:
      if (in.rc == in.rd) return "operand aliasing: control register is the target";
      break;
    case Opcode::kCadd:
    case Opcode::kCsub:
      if (in.rc == in.rd) return "operand aliasing: control register is the target";
      if (in.ra == in.rd) return "operand aliasing: rd must differ from ra";
      break;
    case Opcode::kTcs:
    case Opcode::kItcs:
      if (!distinct({in.rc, in.ra, in.rd, in.rb}))
        return "operand aliasing: tcs operands must be distinct";
      if (in.rc == reg::kUr || in.ra == reg::kUr || in.rd == reg::kUr || in.rb == reg::kUr)
        return "operand aliasing: tcs operands must not include $ur";
      break;
    case Opcode::kTcai:
      if (in.rd == in.rc || in.rd == in.ra || in.rb == in.rc || in.rb == in.ra)
        return "operand aliasing: tcai targets must differ from its selectors";
      break;
    case Opcode::kMadd:
    case Opcode::kMsub:
    case Opcode::kXand:
    case Opcode::kXior:
    case Opcode::kXslt:
    case Opcode::kXltu:
    case Opcode::kXeq:
    case Opcode::kXmulk:
    case Opcode::kXdivk:
    case Opcode::kXrem:
    case Opcode::kXsllv:
    case Opcode::kXsrlv:
      if (in.rd == in.ra || in.rd == in.rb) return "operand aliasing: rd must differ from its sources";
      break;
    default:
      break;
  }

  switch (in.opcode) {
    case Opcode::kXsll:
    case Opcode::kXsrl:
    case Opcode::kXdivk:
      if (in.imm < 0 || in.imm > 31) return "shift amount must be in 0..31";
      break;
    case Opcode::kXmulk:
      if (in.imm < 0 || in.imm > 63) return "shift amount must be in 0..63";
      break;
    case Opcode::kHq:
    case Opcode::kZq:
      if (in.imm < 1 || in.imm > 32) return "qubit count must be in 1..32";
      break;
    case Opcode::kRzk:
      if (in.imm == 0 || in.imm < -32 || in.imm > 32) return "rotation order must be in 1..32 (signed)";
      if (in.ra > 31) return "bit index must be in 0..31";
      break;
    default:
      break;
  }
  return std::nullopt;
}

std::uint64_t encode(const Instruction& in) {
  if (auto err = validate(in)) throw IsaError(*err);
  std::uint64_t w = static_cast<std::uint64_t>(in.opcode) & 0x3F;
  w |= static_cast<std::uint64_t>(in.rd & 0x1F) << 6;
  w |= static_cast<std::uint64_t>(in.ra & 0x1F) << 11;
  w |= static_cast<std::uint64_t>(in.rb & 0x1F) << 16;
  w |= static_cast<std::uint64_t>(in.rc & 0x1F) << 21;
  w |= static_cast<std::uint64_t>(in.pol ? 1 : 0) << 26;
  w |= static_cast<std::uint64_t>(static_cast<Word>(in.imm)) << 32;
  return w;
}

Instruction decode(std::uint64_t w) {
  auto op = static_cast<unsigned>(w & 0x3F);
  if (op >= kTable.size()) throw IsaError("unknown opcode 0x" + [&] {
      std::ostringstream os;
      os << std::hex << op;
      return os.str();
    }());
  if ((w >> 27) & 0x1F) throw IsaError("reserved bits must be zero");
  Instruction in;
  in.opcode = static_cast<Opcode>(op);
  in.rd = static_cast<std::uint8_t>((w >> 6) & 0x1F);
  in.ra = static_cast<std::uint8_t>((w >> 11) & 0x1F);
  in.rb = static_cast<std::uint8_t>((w >> 16) & 0x1F);
  in.rc = static_cast<std::uint8_t>((w >> 21) & 0x1F);
  in.pol = ((w >> 26) & 1) != 0;
  in.imm = static_cast<SWord>(static_cast<Word>(w >> 32));
  if (auto err = validate(in)) throw IsaError(*err);
  return in;
}

std::optional<std::uint8_t> register_alias(std::string_view name) {
  for (std::size_t i = 0; i < kRegNames.size(); ++i)
    if (kRegNames[i] == name) return static_cast<std::uint8_t>(i);
  return std::nullopt;
}

std::string_view register_name(std::uint8_t index) {
  if (index >= kNumRegs) throw IsaError("register index out of range");
  return kRegNames[index];
}

Instruction invert_instruction(const Instruction& in) {
  Instruction out = in;
  switch (in.opcode) {
    case Opcode::kAddi:
    case Opcode::kCaddi:
    case Opcode::kCzaddi:
    case Opcode::kTcai:
    case Opcode::kRzk:
      out.imm = negate(in.imm);
      break;
    case Opcode::kRoti:
      out.imm = (32 - ((in.imm % 32) + 32) % 32) % 32;
      break;
    case Opcode::kAdd:
      out.opcode = Opcode::kSub;
      break;
    case Opcode::kSub:
      out.opcode = Opcode::kAdd;
      break;
    case Opcode::kCadd:
      out.opcode = Opcode::kCsub;
      break;
    case Opcode::kCsub:
      out.opcode = Opcode::kCadd;
      break;
    case Opcode::kMadd:
      out.opcode = Opcode::kMsub;
      break;
    case Opcode::kMsub:
      out.opcode = Opcode::kMadd;
      break;
    case Opcode::kTcs:
      out.opcode = Opcode::kItcs;
      break;
    case Opcode::kItcs:
      out.opcode = Opcode::kTcs;
      break;
    case Opcode::kMeas:
      throw IsaError("meas is not invertible");
    case Opcode::kHalt:
      throw IsaError("halt is not invertible");
    default:
      // neg, notr, xor-accumulating ops, swaps, hq and zq are involutions.
      break;
  }
  return out;
}

std::string to_string(const Instruction& in) {
  const OpcodeInfo& oi = info(in.opcode);
  std::string s(oi.mnemonic);
  for (int i = 0; i < oi.num_operands; ++i) {
    s += i == 0 ? " " : ", ";
    switch (oi.operands[i]) {
      case Operand::kRd: s += register_name(in.rd); break;
      case Operand::kRa: s += register_name(in.ra); break;
      case Operand::kRb: s += register_name(in.rb); break;
      case Operand::kRc: s += register_name(in.rc); break;
      case Operand::kPol: s += in.pol ? "1" : "0"; break;
      case Operand::kImm: s += std::to_string(in.imm); break;
      case Operand::kBit: s += std::to_string(in.ra); break;
    }
  }
  return s;
}

void exec_permutation(const Instruction& in, MachineState& st) {
  auto R = [&](std::uint8_t r) { return st.reg(r); };
  auto S = [&](std::uint8_t r) { return static_cast<SWord>(st.reg(r)); };
  auto W = [&](std::uint8_t r, Word v) { st.set_reg(r, v); };
  auto X = [&](std::uint8_t r, Word v) { st.set_reg(r, st.reg(r) ^ v); };
  auto addr = [&]() {
    Word m = st.mem_size();
    if (m == 0) throw IsaError("memory access with no memory");
    return static_cast<Word>(R(in.ra) + static_cast<Word>(in.imm)) % m;
  };
  auto imm = static_cast<Word>(in.imm);
  bool cond = lsb(R(in.rc)) == in.pol;

  switch (in.opcode) {
    case Opcode::kNop:
      break;
    case Opcode::kAddi: W(in.rd, R(in.rd) + imm); break;
    case Opcode::kAdd: W(in.rd, R(in.rd) + R(in.ra)); break;
    case Opcode::kSub: W(in.rd, R(in.rd) - R(in.ra)); break;
    case Opcode::kNeg: W(in.rd, 0u - R(in.rd)); break;
    case Opcode::kNotr: W(in.rd, ~R(in.rd)); break;
    case Opcode::kXorr: X(in.rd, R(in.ra)); break;
    case Opcode::kXori: X(in.rd, imm); break;
    case Opcode::kSwap: {
      Word a = R(in.rd), b = R(in.ra);
      W(in.rd, b);
      W(in.ra, a);
      break;
    }
    case Opcode::kCswap:
      if (cond) {
        Word a = R(in.rd), b = R(in.ra);
        W(in.rd, b);
        W(in.ra, a);
      }
      break;
    case Opcode::kRoti: W(in.rd, rotl(R(in.rd), in.imm)); break;
    case Opcode::kCaddi:
      if (cond) W(in.rd, R(in.rd) + imm);
      break;
    case Opcode::kCadd:
      if (cond) W(in.rd, R(in.rd) + R(in.ra));
      break;
    case Opcode::kCsub:
      if (cond) W(in.rd, R(in.rd) - R(in.ra));
      break;
    case Opcode::kCzaddi:
      if (R(in.rc) == 0) W(in.rd, R(in.rd) + imm);
      break;
    case Opcode::kTcs:
    case Opcode::kItcs: {
      if (in.opcode == Opcode::kItcs) W(in.ra, R(in.ra) ^ 1u);
      bool sel = lsb(R(in.rc)) != lsb(R(in.ra));
      std::uint8_t target = sel ? in.rb : in.rd;
      Word ur = R(reg::kUr), t = R(target);
      W(reg::kUr, t);
      W(target, ur);
      if (in.opcode == Opcode::kTcs) W(in.ra, R(in.ra) ^ 1u);
      break;
    }
    case Opcode::kTcai: {
      bool sel = lsb(R(in.rc)) != lsb(R(in.ra));
      std::uint8_t target = sel ? in.rb : in.rd;
      W(target, R(target) + imm);
      break;
    }
    case Opcode::kMadd: W(in.rd, R(in.rd) + R(in.ra) * R(in.rb)); break;
    case Opcode::kMsub: W(in.rd, R(in.rd) - R(in.ra) * R(in.rb)); break;
    case Opcode::kXand: X(in.rd, R(in.ra) & R(in.rb)); break;
    case Opcode::kXior: X(in.rd, R(in.ra) | R(in.rb)); break;
    case Opcode::kXsll: X(in.rd, R(in.ra) << (imm & 31)); break;
    case Opcode::kXsrl: X(in.rd, R(in.ra) >> (imm & 31)); break;
    case Opcode::kXsllv: X(in.rd, R(in.ra) << (R(in.rb) & 31)); break;
    case Opcode::kXsrlv: X(in.rd, R(in.ra) >> (R(in.rb) & 31)); break;
    case Opcode::kXslt: X(in.rd, S(in.ra) < S(in.rb) ? 1u : 0u); break;
    case Opcode::kXltu: X(in.rd, R(in.ra) < R(in.rb) ? 1u : 0u); break;
    case Opcode::kXeq: X(in.rd, R(in.ra) == R(in.rb) ? 1u : 0u); break;
    case Opcode::kXmulk: {
      std::int64_t p = static_cast<std::int64_t>(S(in.ra)) * static_cast<std::int64_t>(S(in.rb));
      X(in.rd, static_cast<Word>(static_cast<std::uint64_t>(p >> (imm & 63))));
      break;
    }
    case Opcode::kXdivk: {
      std::int64_t d = S(in.rb);
      if (d != 0) {
        std::int64_t n = static_cast<std::int64_t>(S(in.ra)) * (std::int64_t{1} << (imm & 31));
        X(in.rd, static_cast<Word>(static_cast<std::uint64_t>(n / d)));
      }
      break;
    }
    case Opcode::kXrem: {
      std::int64_t d = S(in.rb);
      std::int64_t n = S(in.ra);
      X(in.rd, d == 0 ? R(in.ra) : static_cast<Word>(static_cast<std::uint64_t>(n % d)));
      break;
    }
    case Opcode::kSwapm: {
      Word a = addr();
      Word m = st.load(a);
      st.store(a, R(in.rd));
      W(in.rd, m);
      break;
    }
    case Opcode::kXorm: X(in.rd, st.load(addr())); break;
    default:
      throw IsaError("exec_permutation: '" + std::string(info(in.opcode).mnemonic) +
                     "' is not a permutation instruction");
  }
}

}  // namespace onda
