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

// ONDA front end and lowering to quantum assembly.
//
// Lowering follows three rules. Expressions are evaluated Bennett style:
// intermediates are computed, the result is XOR-copied out, and the
// intermediates are uncomputed. Control flow moves only through $ur. Values
// that cannot be uncomputed are swapped onto the garbage stack.

#ifndef ONDA_COMPILER_H_
#define ONDA_COMPILER_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "onda/assembler.h"
#include "onda/diagnostics.h"
#include "onda/isa.h"

namespace onda {

enum class BaseType { kInt, kUnsigned, kFloat, kVoid };

struct Type {
  BaseType base = BaseType::kInt;
  bool is_array = false;
  int length = 0;  // arrays only; 0 for array parameters

  bool is_float() const { return base == BaseType::kFloat && !is_array; }
  bool is_scalar() const { return !is_array && base != BaseType::kVoid; }
  Type element() const { return {base, false, 0}; }
  friend bool operator==(const Type&, const Type&) = default;
};

std::string to_string(const Type& t);

struct Function;

struct Symbol {
  enum class Kind { kGlobal, kLocal, kParam };
  std::string name;
  Type type;
  Kind kind = Kind::kLocal;
  int id = 0;
  SourceLoc loc;
  const Function* owner = nullptr;  // null for globals
  int param_index = -1;
};

struct Expr {
  enum class Kind { kInt, kFloat, kVar, kIndex, kUnary, kBinary, kCall, kCast };
  Kind kind = Kind::kInt;
  SourceLoc loc;
  Type type;
  Word value = 0;    // literal bit pattern (Q16.16 for floats)
  std::string op;    // unary/binary operator spelling
  std::string name;  // identifier for kVar/kIndex/kCall
  Symbol* sym = nullptr;
  Function* callee = nullptr;
  std::vector<std::unique_ptr<Expr>> kids;
};

struct Stmt {
  enum class Kind { kDecl, kAssign, kIf, kDoWhile, kPrint, kReturn, kCall, kBlock, kRzk };
  Kind kind = Kind::kBlock;
  SourceLoc loc;
  // kDecl: sym + optional init (or array_init); kAssign: op, target, value;
  // kIf: cond, body[0] then, body[1] else (may be null); kDoWhile: body[0],
  // cond; kPrint/kReturn: value; kCall: value is the call; kBlock: stmts;
  // kRzk: target, args (bit, k).
  Symbol* sym = nullptr;
  std::string op;
  std::unique_ptr<Expr> target;
  std::unique_ptr<Expr> value;
  std::unique_ptr<Expr> cond;
  std::vector<std::unique_ptr<Expr>> array_init;
  bool has_array_init = false;
  std::unique_ptr<Stmt> body[2];
  std::vector<std::unique_ptr<Stmt>> stmts;
  std::vector<std::unique_ptr<Expr>> args;
};

struct Function {
  std::string name;
  Type ret;
  std::vector<Symbol*> params;
  std::unique_ptr<Stmt> body;
  SourceLoc loc;
  bool from_stdlib = false;
};

struct TypedAst {
  std::vector<std::unique_ptr<Symbol>> symbols;
  std::vector<std::unique_ptr<Stmt>> globals;  // kDecl statements
  std::vector<std::unique_ptr<Function>> functions;

  const Function* find_function(std::string_view name) const;
};

struct ParseResult {
  std::unique_ptr<TypedAst> ast;  // null iff diagnostics has errors
  Diagnostics diagnostics;
};

// Parses and type checks. Calls to `sqrt` without a user definition pull in
// the bundled standard-library source.
ParseResult parse(std::string_view source, std::string_view file_name = "<onda>");

// Where lowering placed things; exposed for tests and the CLI listing.
struct LoopInfo {
  std::string top_label;  // first tcs
  std::string end_label;  // closing caddi
  std::uint8_t counter = 0, act = 0, tur1 = 0, tur2 = 0, cond = 0;
};
struct IfInfo {
  std::string label;  // the opening caddi
  std::uint8_t cond = 0;
  int arm_length = 0;  // both arms, after padding
};
struct CallInfo {
  std::string callee;
  std::string c1_label;  // the caller's swap $ur, $tur
  std::string f_label, r_label;
};

struct CompileResult {
  std::optional<std::string> assembly;  // empty iff diagnostics has errors
  Diagnostics diagnostics;
  std::vector<LoopInfo> loops;
  std::vector<IfInfo> ifs;
  std::vector<CallInfo> calls;
  // "function.variable" -> "$reg" or "mem:<label>".
  std::map<std::string, std::string> homes;
};

CompileResult lower_program(const TypedAst& ast);

// Parse, lower and assemble in one go.
struct BuildResult {
  std::optional<Program> program;
  Diagnostics diagnostics;
  CompileResult compiled;
  AssemblyResult assembled;
};
BuildResult build(std::string_view source, std::string_view file_name = "<onda>");

// Direct AST evaluation with the machine's arithmetic conventions. Throws
// std::runtime_error on quantum operators.
struct InterpretResult {
  std::vector<Word> prints;
};
InterpretResult interpret_reference(const TypedAst& ast);

// Q16.16 helpers shared by the front end and tests.
Word to_fixed(double v);
double from_fixed(Word w);

}  // namespace onda

#endif  // ONDA_COMPILER_H_
