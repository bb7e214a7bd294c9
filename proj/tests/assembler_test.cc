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

#include <random>

#include "onda/assembler.h"
#include "test_util.h"

namespace onda {
namespace {

bool has_error(const Diagnostics& d, std::string_view needle) {
  for (const auto& item : d.items()) {
    if (item.severity == Severity::kError && item.message.find(needle) != std::string::npos) {
      return true;
    }
  }
  return false;
}

TEST(Assemble, Listing) {
  AssemblyResult r = assemble("addi $t1, 6\nadd $t2, $t1\n");
  ASSERT_TRUE(r.program) << r.diagnostics.to_string();
  ASSERT_EQ(r.program->instructions.size(), 2u);
  EXPECT_EQ(r.program->instructions[0].opcode, Opcode::kAddi);
  EXPECT_EQ(r.program->instructions[0].rd, 20);
  EXPECT_EQ(r.program->instructions[0].imm, 6);
  EXPECT_EQ(r.program->instructions[1].opcode, Opcode::kAdd);
  EXPECT_EQ(r.program->instructions[1].rd, 21);
  EXPECT_EQ(r.program->instructions[1].ra, 20);
}

TEST(Assemble, LabelArithmetic) {
  const char* src =
      "L0: addi $tur, (F - L1)\n"
      "L1: swap $ur, $tur\n"
      "    addi $tur, -(F - L1) + 0\n"
      "    halt\n"
      "    nop\n"
      "F:  swap $ur, $tur\n";
  AssemblyResult r = assemble(src);
  ASSERT_TRUE(r.program) << r.diagnostics.to_string();
  // F is the sixth instruction, L1 the second.
  EXPECT_EQ(r.symbols.at("F"), 5);
  EXPECT_EQ(r.symbols.at("L1"), 1);
  EXPECT_EQ(r.program->instructions[0].imm, 4);
  EXPECT_EQ(r.program->instructions[2].imm, -4);
}

TEST(Assemble, Diagnostics) {
  AssemblyResult r = assemble("nop\n  add $t0, $t0\n");
  EXPECT_FALSE(r.program);
  EXPECT_TRUE(has_error(r.diagnostics, "operand aliasing"));
  ASSERT_FALSE(r.diagnostics.items().empty());
  EXPECT_EQ(r.diagnostics.items()[0].loc.line, 2);
  EXPECT_EQ(r.diagnostics.items()[0].loc.column, 3);

  EXPECT_TRUE(has_error(assemble("frob $t0\n").diagnostics, "unknown mnemonic"));
  EXPECT_TRUE(has_error(assemble("addi $t9, 1\n").diagnostics, "unknown register"));
  EXPECT_TRUE(has_error(assemble("addi $t0, nowhere\n").diagnostics, "unresolved label"));
  EXPECT_TRUE(has_error(assemble("a: nop\na: nop\n").diagnostics, "duplicate label"));
  EXPECT_TRUE(has_error(assemble("addi $t0, 0x100000000\n").diagnostics, "immediate overflow"));
  EXPECT_TRUE(assemble("addi $t0, 0xFFFFFFFF\n").program);
  EXPECT_TRUE(assemble("addi $t0, -2147483648\n").program);
  EXPECT_TRUE(has_error(assemble("addi $t0, -2147483649\n").diagnostics, "immediate overflow"));
}

TEST(Assemble, DataDirectivesAndLayout) {
  const char* src =
      ".data\n"
      "arr: .word 1, -2, 3\n"
      "buf: .zero 2\n"
      ".text\n"
      "main: xorm $t0, $zero, arr + 1\n"
      "halt\n"
      ".mem 512\n.stack 16\n.garbage 100\n.entry main\n";
  AssemblyResult r = assemble(src);
  ASSERT_TRUE(r.program) << r.diagnostics.to_string();
  const Program& p = *r.program;
  EXPECT_EQ(p.data, (std::vector<Word>{1, static_cast<Word>(-2), 3, 0, 0}));
  EXPECT_EQ(r.symbols.at("buf"), 3);
  EXPECT_EQ(p.instructions[0].imm, 1);
  EXPECT_EQ(p.mem_words, 512u);
  EXPECT_EQ(p.stack_base, 16u);
  EXPECT_EQ(p.garbage_base, 100u);
}

TEST(Assemble, LiWarns) {
  AssemblyResult r = assemble("li $t0, 5\n");
  ASSERT_TRUE(r.program);
  EXPECT_EQ(r.program->instructions[0].opcode, Opcode::kAddi);
  ASSERT_EQ(r.diagnostics.items().size(), 1u);
  EXPECT_EQ(r.diagnostics.items()[0].severity, Severity::kWarning);
}

TEST(Assemble, Deterministic) {
  const char* src = "a: addi $t0, b - a\nb: hq $t0, 3\nmeas $t0\n";
  EXPECT_EQ(emit_binary(*assemble(src).program), emit_binary(*assemble(src).program));
}

TEST(Binary, Sizes) {
  Program empty;
  empty.instructions.clear();
  empty.mem_words = 65536;
  EXPECT_EQ(emit_binary(empty).size(), kImageHeaderBytes);
  Program two = *assemble("addi $t1, 6\nadd $t2, $t1\n").program;
  std::vector<std::uint8_t> bytes = emit_binary(two);
  EXPECT_EQ(bytes.size(), kImageHeaderBytes + 16);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "ONDQ1\n");
  // First instruction word, little-endian: opcode byte first.
  std::uint64_t w = encode(two.instructions[0]);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(bytes[kImageHeaderBytes + i], (w >> (8 * i)) & 0xFF);
}

TEST(Binary, LoadErrors) {
  Program p = *assemble("addi $t1, 6\nadd $t2, $t1\n").program;
  std::vector<std::uint8_t> bytes = emit_binary(p);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_TRUE(has_error(load_binary(bad_magic).diagnostics, "not an ONDQ image"));

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_TRUE(has_error(load_binary(truncated).diagnostics, "unexpected end of file"));

  auto version = bytes;
  version[6] = 9;
  EXPECT_TRUE(has_error(load_binary(version).diagnostics, "version"));

  auto garbage_word = bytes;
  garbage_word[kImageHeaderBytes] = 0x3F;
  EXPECT_TRUE(has_error(load_binary(garbage_word).diagnostics, "undecodable"));
}

TEST(Binary, Idempotence) {
  Program p = *assemble("hq $t0, 2\nzq $t0, 1\nmeas $t0\n").program;
  auto once = emit_binary(p);
  auto again = emit_binary(*load_binary(once).program);
  EXPECT_EQ(once, again);
}

TEST(Disassemble, Listing) {
  Program p = *assemble("addi $t1, 6\nadd $t2, $t1\ntcs $t0, $t1, $tur, $t2\n").program;
  std::string text = disassemble(p);
  EXPECT_NE(text.find("addi $t1, 6\n"), std::string::npos);
  EXPECT_NE(text.find("add $t2, $t1\n"), std::string::npos);
  EXPECT_NE(text.find("tcs $t0, $t1, $tur, $t2\n"), std::string::npos);
  std::string addressed = disassemble(p, true);
  EXPECT_NE(addressed.find("# 2"), std::string::npos);
}

TEST(Fuzz, AssembleDisassembleRoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    Program p = testing::random_program(rng);
    ASSERT_FALSE(check_program(p)) << *check_program(p);
    AssemblyResult r = assemble(disassemble(p, i % 2 == 0));
    ASSERT_TRUE(r.program) << r.diagnostics.to_string();
    ASSERT_EQ(*r.program, p);
  }
}

TEST(Fuzz, BinaryRoundTrip) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 10000; ++i) {
    Program p = testing::random_program(rng);
    LoadResult r = load_binary(emit_binary(p));
    ASSERT_TRUE(r.program) << r.diagnostics.to_string();
    ASSERT_EQ(*r.program, p);
  }
}

TEST(Fuzz, LoaderRejectsMutationsCleanly) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 2000; ++i) {
    auto bytes = emit_binary(testing::random_program(rng));
    bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    if (rng() & 1) bytes.resize(rng() % bytes.size());
    LoadResult r = load_binary(bytes);
    EXPECT_NE(r.program.has_value(), r.diagnostics.has_errors());
  }
}

}  // namespace
}  // namespace onda
