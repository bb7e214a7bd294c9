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

// Whole-program facts shared by the checker, the lowering and the
// reference interpreter.

#ifndef ONDA_SRC_COMPILER_ANALYSIS_H_
#define ONDA_SRC_COMPILER_ANALYSIS_H_

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "onda/compiler.h"

namespace onda::detail {

// Source of the bundled standard library.
std::string_view stdlib_source();

class Analysis {
 public:
  explicit Analysis(const TypedAst& ast);

  // Symbols (scalars or arrays) a statement or expression may modify,
  // including writes made through calls. Phase-only operations do not count.
  std::set<const Symbol*> writes(const Stmt& s) const;
  std::set<const Symbol*> writes(const Expr& e) const;
  static std::set<const Symbol*> reads(const Expr& e);
  static bool has_call(const Expr& e);

  bool writes_param(const Function* f, int index) const;
  const std::set<const Function*>& callees(const Function* f) const;

  // Compile-time value of an int expression built from literals and
  // effectively constant variables (declared with a constant initializer
  // and never written).
  std::optional<std::int64_t> const_value(const Expr& e) const;

 private:
  void collect_decls(const Stmt& s);
  void stmt_writes(const Stmt& s, std::set<const Symbol*>& out, bool include_decls) const;
  void call_writes(const Expr& e, std::set<const Symbol*>& out) const;

  std::map<const Function*, std::vector<bool>> param_writes_;
  std::map<const Function*, std::set<const Symbol*>> global_writes_;
  std::map<const Function*, std::set<const Function*>> callees_;
  std::set<const Symbol*> written_;
  std::map<const Symbol*, const Expr*> inits_;
};

// Machine arithmetic used by both the interpreter and constant folding.
Word apply_binary(std::string_view op, Word a, Word b, const Type& operand_type);
Word fixed_from_int(Word a);
Word int_from_fixed(Word a);

}  // namespace onda::detail

#endif  // ONDA_SRC_COMPILER_ANALYSIS_H_
