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

// Random generators shared by the property tests.

#ifndef ONDA_TESTS_TEST_UTIL_H_
#define ONDA_TESTS_TEST_UTIL_H_

#include <random>
#include <vector>

#include "onda/assembler.h"
#include "onda/isa.h"

namespace onda::testing {

inline Word random_word(std::mt19937_64& rng) { return static_cast<Word>(rng()); }

// Rejection-samples a valid instruction, optionally restricted to one class.
inline Instruction random_instruction(std::mt19937_64& rng,
                                      std::optional<InstructionClass> only = std::nullopt) {
  for (;;) {
    Instruction in;
    in.opcode = static_cast<Opcode>(rng() % kNumOpcodes);
    const OpcodeInfo& oi = info(in.opcode);
    if (only && oi.cls != *only) continue;
    for (int i = 0; i < oi.num_operands; ++i) {
      switch (oi.operands[i]) {
        case Operand::kRd: in.rd = rng() % 32; break;
        case Operand::kRa: in.ra = rng() % 32; break;
        case Operand::kRb: in.rb = rng() % 32; break;
        case Operand::kRc: in.rc = rng() % 32; break;
        case Operand::kPol: in.pol = rng() & 1; break;
        case Operand::kBit: in.ra = rng() % 32; break;
        case Operand::kImm:
          // Mix small and full-width immediates so ranged opcodes get hits.
          in.imm = (rng() & 1) ? static_cast<SWord>(rng() % 65) - 32 : static_cast<SWord>(rng());
          break;
      }
    }
    if (!validate(in)) return in;
  }
}

inline Program random_program(std::mt19937_64& rng, std::size_t max_instr = 24,
                              std::size_t max_data = 12) {
  Program p;
  std::size_t n = 1 + rng() % max_instr;
  for (std::size_t i = 0; i < n; ++i) p.instructions.push_back(random_instruction(rng));
  std::size_t d = rng() % (max_data + 1);
  for (std::size_t i = 0; i < d; ++i) p.data.push_back(random_word(rng));
  p.entry = static_cast<Word>(rng() % n);
  p.mem_words = static_cast<Word>(64 + rng() % 4096);
  p.stack_base = static_cast<Word>(d + rng() % 16);
  p.garbage_base = p.stack_base + static_cast<Word>(rng() % 32);
  return p;
}

}  // namespace onda::testing

#endif  // ONDA_TESTS_TEST_UTIL_H_
