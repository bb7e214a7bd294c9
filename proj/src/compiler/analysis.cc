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

#include "analysis.h"

namespace onda::detail {
namespace {

// Integer Newton iteration; 16 rounds cover every input up to 2^20 exactly
// and the final correction handles the floor/ceil oscillation.
constexpr std::string_view kStdlib = R"(
int sqrt(int n) {
  int x = n / 2 + 1;
  int i = 0;
  do {
    x = (x + n / x) / 2;
    i += 1;
  } while (i < 16);
  if (x * x > n) {
    x -= 1;
  }
  return x;
}
)";

void for_each_expr(const Stmt& s, const std::function<void(const Expr&)>& fn) {
  for (const Expr* e : {s.target.get(), s.value.get(), s.cond.get()})
    if (e) fn(*e);
  for (auto& a : s.args) fn(*a);
  for (auto& a : s.array_init) fn(*a);
}

void for_each_node(const Expr& e, const std::function<void(const Expr&)>& fn) {
  fn(e);
  for (auto& k : e.kids) for_each_node(*k, fn);
}

void for_each_stmt(const Stmt& s, const std::function<void(const Stmt&)>& fn) {
  fn(s);
  for (auto& b : s.body)
    if (b) for_each_stmt(*b, fn);
  for (auto& c : s.stmts) for_each_stmt(*c, fn);
}

}  // namespace

std::string_view stdlib_source() { return kStdlib; }

Analysis::Analysis(const TypedAst& ast) {
  for (auto& g : ast.globals) collect_decls(*g);
  for (auto& f : ast.functions) {
    param_writes_[f.get()].assign(f->params.size(), false);
    global_writes_[f.get()];
    auto& cs = callees_[f.get()];
    for_each_stmt(*f->body, [&](const Stmt& s) {
      collect_decls(s);
      for_each_expr(s, [&](const Expr& e) {
        for_each_node(e, [&](const Expr& n) {
          if (n.kind == Expr::Kind::kCall && n.callee) cs.insert(n.callee);
        });
      });
    });
  }
  // Propagate callee effects to a fixed point; the relation is monotone so
  // this terminates even on (rejected) recursive programs.
  for (bool changed = true; changed;) {
    changed = false;
    written_.clear();
    for (auto& f : ast.functions) {
      auto& pw = param_writes_[f.get()];
      auto& gw = global_writes_[f.get()];
      std::set<const Symbol*> mine;
      stmt_writes(*f->body, mine, false);
      for (const Symbol* s : mine) {
        if (s->kind == Symbol::Kind::kParam && s->owner == f.get() && !pw[s->param_index]) {
          pw[s->param_index] = true;
          changed = true;
        }
        if (s->kind == Symbol::Kind::kGlobal && gw.insert(s).second) changed = true;
      }
      written_.insert(mine.begin(), mine.end());
    }
  }
}

void Analysis::collect_decls(const Stmt& s) {
  if (s.kind == Stmt::Kind::kDecl) inits_[s.sym] = s.value.get();
}

void Analysis::stmt_writes(const Stmt& s, std::set<const Symbol*>& out, bool include_decls) const {
  for_each_stmt(s, [&](const Stmt& st) {
    if (st.kind == Stmt::Kind::kAssign && st.op != "#=" && st.target->sym) out.insert(st.target->sym);
    if (include_decls && st.kind == Stmt::Kind::kDecl) out.insert(st.sym);
    for_each_expr(st, [&](const Expr& e) { call_writes(e, out); });
  });
}

std::set<const Symbol*> Analysis::writes(const Stmt& s) const {
  std::set<const Symbol*> out;
  stmt_writes(s, out, true);
  return out;
}

std::set<const Symbol*> Analysis::writes(const Expr& e) const {
  std::set<const Symbol*> out;
  call_writes(e, out);
  return out;
}

void Analysis::call_writes(const Expr& e, std::set<const Symbol*>& out) const {
  for_each_node(e, [&](const Expr& n) {
    if (n.kind != Expr::Kind::kCall || !n.callee) return;
    auto pw = param_writes_.find(n.callee);
    if (pw != param_writes_.end()) {
      for (std::size_t k = 0; k < n.kids.size() && k < pw->second.size(); ++k)
        if (pw->second[k] && n.kids[k]->kind == Expr::Kind::kVar && n.kids[k]->sym) out.insert(n.kids[k]->sym);
    }
    auto gw = global_writes_.find(n.callee);
    if (gw != global_writes_.end()) out.insert(gw->second.begin(), gw->second.end());
  });
}

std::set<const Symbol*> Analysis::reads(const Expr& e) {
  std::set<const Symbol*> out;
  for_each_node(e, [&](const Expr& n) {
    if ((n.kind == Expr::Kind::kVar || n.kind == Expr::Kind::kIndex) && n.sym) out.insert(n.sym);
  });
  return out;
}

bool Analysis::has_call(const Expr& e) {
  bool found = false;
  for_each_node(e, [&](const Expr& n) { found = found || n.kind == Expr::Kind::kCall; });
  return found;
}

bool Analysis::writes_param(const Function* f, int index) const {
  auto it = param_writes_.find(f);
  return it != param_writes_.end() && index >= 0 && index < static_cast<int>(it->second.size()) &&
         it->second[index];
}

const std::set<const Function*>& Analysis::callees(const Function* f) const {
  static const std::set<const Function*> kNone;
  auto it = callees_.find(f);
  return it == callees_.end() ? kNone : it->second;
}

std::optional<std::int64_t> Analysis::const_value(const Expr& e) const {
  if (e.type.is_float()) return std::nullopt;
  switch (e.kind) {
    case Expr::Kind::kInt:
      return static_cast<SWord>(e.value);
    case Expr::Kind::kVar: {
      const Symbol* s = e.sym;
      if (!s || !s->type.is_scalar() || s->kind == Symbol::Kind::kParam || written_.count(s)) return std::nullopt;
      auto it = inits_.find(s);
      if (it == inits_.end()) return std::nullopt;
      if (!it->second) return 0;
      return const_value(*it->second);
    }
    case Expr::Kind::kCast:
      return e.kids[0]->type.is_float() ? std::nullopt : const_value(*e.kids[0]);
    case Expr::Kind::kUnary: {
      auto a = const_value(*e.kids[0]);
      if (!a) return std::nullopt;
      Word w = static_cast<Word>(*a);
      if (e.op == "-") w = 0u - w;
      if (e.op == "~") w = ~w;
      if (e.op == "!") w = w == 0;
      return static_cast<SWord>(w);
    }
    case Expr::Kind::kBinary: {
      if (e.op == "@" || e.op == "#") return std::nullopt;
      auto a = const_value(*e.kids[0]);
      auto b = const_value(*e.kids[1]);
      if (!a || !b) return std::nullopt;
      return static_cast<SWord>(
          apply_binary(e.op, static_cast<Word>(*a), static_cast<Word>(*b), e.kids[0]->type));
    }
    default:
      return std::nullopt;
  }
}

Word fixed_from_int(Word a) { return a << 16; }

Word int_from_fixed(Word a) { return static_cast<Word>(static_cast<SWord>(a) / 65536); }

Word apply_binary(std::string_view op, Word a, Word b, const Type& t) {
  auto sa = static_cast<std::int64_t>(static_cast<SWord>(a));
  auto sb = static_cast<std::int64_t>(static_cast<SWord>(b));
  bool fl = t.is_float();
  bool uns = t.base == BaseType::kUnsigned;
  auto trunc = [](std::int64_t v) { return static_cast<Word>(static_cast<std::uint64_t>(v)); };
  if (op == "+") return a + b;
  if (op == "-") return a - b;
  if (op == "*") return fl ? trunc((sa * sb) >> 16) : a * b;
  if (op == "/") {
    if (b == 0) return 0;
    return trunc((fl ? sa * 65536 : sa) / sb);
  }
  if (op == "%") return b == 0 ? a : trunc(sa % sb);
  if (op == "&") return a & b;
  if (op == "|") return a | b;
  if (op == "^") return a ^ b;
  if (op == "<<") return a << (b & 31);
  if (op == ">>") return a >> (b & 31);
  if (op == "==") return a == b;
  if (op == "!=") return a != b;
  if (op == "<") return uns ? a < b : sa < sb;
  if (op == "<=") return uns ? a <= b : sa <= sb;
  if (op == ">") return uns ? a > b : sa > sb;
  if (op == ">=") return uns ? a >= b : sa >= sb;
  if (op == "&&") return a != 0 && b != 0;
  if (op == "||") return a != 0 || b != 0;
  return 0;
}

}  // namespace onda::detail
