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

// Tree-walking evaluator used as the differential-testing oracle. It mirrors
// the language semantics, not the generated code: calls inside a statement
// run first (innermost first), variable arguments are moved into the callee
// and moved back afterwards, arrays have static storage.

#include <functional>
#include <map>
#include <stdexcept>

#include "analysis.h"
#include "onda/compiler.h"

namespace onda {
namespace {

constexpr std::uint64_t kStepLimit = 10'000'000;

class Interpreter {
 public:
  explicit Interpreter(const TypedAst& ast) : ast_(ast) {}

  InterpretResult run() {
    for (auto& g : ast_.globals) {
      if (g->sym->type.is_array) {
        make_array(*g);
      } else {
        scalars_[g->sym] = g->value ? g->value->value : 0;
      }
    }
    for (auto& f : ast_.functions) collect_arrays(*f->body);
    call_function(*ast_.find_function("main"), {});
    return std::move(out_);
  }

 private:
  void collect_arrays(const Stmt& s) {
    if (s.kind == Stmt::Kind::kDecl && s.sym->type.is_array) make_array(s);
    for (auto& b : s.body)
      if (b) collect_arrays(*b);
    for (auto& c : s.stmts) collect_arrays(*c);
  }

  void make_array(const Stmt& d) {
    auto& v = arrays_[d.sym];
    v.assign(d.sym->type.length, 0);
    for (std::size_t i = 0; i < d.array_init.size(); ++i) v[i] = d.array_init[i]->value;
  }

  std::vector<Word>& array(const Symbol* s) {
    auto ref = array_refs_.find(s);
    if (ref != array_refs_.end()) return *ref->second;
    return arrays_.at(s);
  }

  Word& element(const Expr& e, Word index) {
    auto& a = array(e.sym);
    if (index >= a.size()) throw std::runtime_error("array index " + std::to_string(index) + " out of range");
    return a[index];
  }

  void tick() {
    if (++steps_ > kStepLimit) throw std::runtime_error("step limit exceeded");
  }

  // ---- calls ----

  // Runs every call in `e`, innermost first, remembering the results.
  void hoist(const Expr* e) {
    if (!e) return;
    for (auto& k : e->kids) hoist(k.get());
    if (e->kind == Expr::Kind::kCall) results_[e] = call(*e);
  }

  Word call(const Expr& e) {
    const Function& f = *e.callee;
    std::vector<Word> args;
    std::vector<const Symbol*> moved;
    std::vector<std::vector<Word>*> refs;
    for (std::size_t k = 0; k < e.kids.size(); ++k) {
      const Expr& a = *e.kids[k];
      if (f.params[k]->type.is_array) {
        refs.push_back(&array(a.sym));
        args.push_back(0);
      } else if (a.kind == Expr::Kind::kVar &&
                 std::find(moved.begin(), moved.end(), a.sym) == moved.end()) {
        args.push_back(scalars_.at(a.sym));
        scalars_[a.sym] = 0;
        moved.push_back(a.sym);
        refs.push_back(nullptr);
      } else {
        args.push_back(eval(a));
        refs.push_back(nullptr);
      }
    }
    auto outer = std::move(results_);
    results_.clear();
    Word result = call_function(f, args, refs);
    results_ = std::move(outer);
    std::size_t m = 0;
    for (std::size_t k = 0; k < e.kids.size(); ++k) {
      const Expr& a = *e.kids[k];
      if (f.params[k]->type.is_array || a.kind != Expr::Kind::kVar) continue;
      if (m < moved.size() && moved[m] == a.sym) {
        scalars_[a.sym] = scalars_.at(f.params[k]);
        ++m;
      }
    }
    return result;
  }

  Word call_function(const Function& f, const std::vector<Word>& args,
                     const std::vector<std::vector<Word>*>& refs = {}) {
    for (std::size_t k = 0; k < f.params.size(); ++k) {
      if (f.params[k]->type.is_array) {
        array_refs_[f.params[k]] = refs[k];
      } else {
        scalars_[f.params[k]] = args[k];
      }
    }
    Word ret = 0;
    for (auto& s : f.body->stmts) {
      if (s->kind == Stmt::Kind::kReturn) {
        if (s->value) {
          hoist(s->value.get());
          ret = eval(*s->value);
          results_.clear();
        }
        break;
      }
      exec(*s);
    }
    return ret;
  }

  // ---- statements ----

  void exec(const Stmt& s) {
    tick();
    switch (s.kind) {
      case Stmt::Kind::kBlock:
        for (auto& c : s.stmts) exec(*c);
        break;
      case Stmt::Kind::kDecl:
        if (s.sym->type.is_array) break;
        quantum_free(s.value.get());
        hoist(s.value.get());
        scalars_[s.sym] = s.value ? eval(*s.value) : 0;
        results_.clear();
        break;
      case Stmt::Kind::kAssign:
        assign(s);
        break;
      case Stmt::Kind::kIf: {
        hoist(s.cond.get());
        bool c = eval(*s.cond) != 0;
        results_.clear();
        if (s.body[c ? 0 : 1]) exec(*s.body[c ? 0 : 1]);
        break;
      }
      case Stmt::Kind::kDoWhile:
        for (;;) {
          exec(*s.body[0]);
          hoist(s.cond.get());
          bool c = eval(*s.cond) != 0;
          results_.clear();
          if (!c) break;
          tick();
        }
        break;
      case Stmt::Kind::kPrint:
        hoist(s.value.get());
        out_.prints.push_back(eval(*s.value));
        results_.clear();
        break;
      case Stmt::Kind::kReturn:
        break;
      case Stmt::Kind::kCall:
        for (auto& k : s.value->kids) hoist(k.get());
        call(*s.value);
        results_.clear();
        break;
      case Stmt::Kind::kRzk:
        throw std::runtime_error("rzk has no classical meaning");
    }
  }

  void quantum_free(const Expr* e) {
    if (e && e->kind == Expr::Kind::kBinary && (e->op == "@" || e->op == "#"))
      throw std::runtime_error("'" + e->op + "' has no classical meaning");
  }

  void assign(const Stmt& s) {
    if (s.op == "@=" || s.op == "#=") throw std::runtime_error("'" + s.op + "' has no classical meaning");
    quantum_free(s.value.get());
    const Expr& tg = *s.target;
    hoist(&tg);
    hoist(s.value.get());
    Word v = eval(*s.value);
    Word index = tg.kind == Expr::Kind::kIndex ? eval(*tg.kids[0]) : 0;
    Word& slot = tg.kind == Expr::Kind::kIndex ? element(tg, index) : scalars_.at(tg.sym);
    if (s.op == "=") {
      slot = v;
    } else if (s.op == "+=") {
      slot += v;
    } else if (s.op == "-=") {
      slot -= v;
    } else {
      slot = detail::apply_binary(s.op.substr(0, 1), slot, v, tg.type);
    }
    results_.clear();
  }

  // ---- expressions ----

  Word eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::kInt:
      case Expr::Kind::kFloat:
        return e.value;
      case Expr::Kind::kVar:
        return scalars_.at(e.sym);
      case Expr::Kind::kIndex:
        return element(e, eval(*e.kids[0]));
      case Expr::Kind::kCall:
        return results_.at(&e);
      case Expr::Kind::kCast: {
        Word a = eval(*e.kids[0]);
        bool from_float = e.kids[0]->type.is_float();
        if (e.type.is_float() && !from_float) return detail::fixed_from_int(a);
        if (!e.type.is_float() && from_float) return detail::int_from_fixed(a);
        return a;
      }
      case Expr::Kind::kUnary: {
        Word a = eval(*e.kids[0]);
        if (e.op == "-") return 0u - a;
        if (e.op == "~") return ~a;
        return a == 0;
      }
      case Expr::Kind::kBinary:
        if (e.op == "@" || e.op == "#") throw std::runtime_error("'" + e.op + "' has no classical meaning");
        return detail::apply_binary(e.op, eval(*e.kids[0]), eval(*e.kids[1]), e.kids[0]->type);
    }
    return 0;
  }

  const TypedAst& ast_;
  std::map<const Symbol*, Word> scalars_;
  std::map<const Symbol*, std::vector<Word>> arrays_;
  std::map<const Symbol*, std::vector<Word>*> array_refs_;
  std::map<const Expr*, Word> results_;
  InterpretResult out_;
  std::uint64_t steps_ = 0;
};

}  // namespace

InterpretResult interpret_reference(const TypedAst& ast) { return Interpreter(ast).run(); }

}  // namespace onda
