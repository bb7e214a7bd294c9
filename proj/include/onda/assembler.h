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

// Two-pass assembler, disassembler and the ONDQ binary image format.

#ifndef ONDA_ASSEMBLER_H_
#define ONDA_ASSEMBLER_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "onda/diagnostics.h"
#include "onda/isa.h"

namespace onda {

inline constexpr Word kDefaultMemWords = 4096;

// Loadable binary image. Instruction addresses count instructions from 0;
// data addresses count words from 0 in a separate memory space.
struct Program {
  std::vector<Instruction> instructions;
  std::vector<Word> data;
  Word entry = 0;
  Word mem_words = kDefaultMemWords;
  Word garbage_base = 0;
  Word stack_base = 0;

  friend bool operator==(const Program&, const Program&) = default;
};

// Returns a description of the first violated image invariant, if any.
std::optional<std::string> check_program(const Program& p);

struct AssemblyResult {
  std::optional<Program> program;  // empty iff diagnostics has errors
  Diagnostics diagnostics;
  // Label values: instruction addresses for .text labels, word addresses for
  // .data labels.
  std::map<std::string, std::int64_t, std::less<>> symbols;
};

AssemblyResult assemble(std::string_view source, std::string_view file_name = "<asm>");

// Renders a program as assembly text that assembles back to the same image.
// Immediates are numeric and layout metadata is emitted as directives. When
// `with_addresses` is set every instruction line carries its address as a
// trailing comment.
std::string disassemble(const Program& p, bool with_addresses = false);

// ONDQ image: "ONDQ1\n", seven little-endian u32 header fields (version,
// entry, n_instr, n_data, mem_words, garbage_base, stack_base), then the
// instruction words (u64 LE) and data words (u32 LE).
inline constexpr std::size_t kImageHeaderBytes = 6 + 7 * 4;
inline constexpr Word kImageVersion = 1;

std::vector<std::uint8_t> emit_binary(const Program& p);

struct LoadResult {
  std::optional<Program> program;
  Diagnostics diagnostics;
};

LoadResult load_binary(std::span<const std::uint8_t> bytes);

}  // namespace onda

#endif  // ONDA_ASSEMBLER_H_
