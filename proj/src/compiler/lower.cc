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

#include <algorithm>
#include <sstream>

#include "analysis.h"
#include "onda/compiler.h"

namespace onda {
namespace {

using detail::Analysis;

constexpr Word kMemWords = 65536;
constexpr Word kStackWords = 4096;

// Registers handed out by the allocator. Temporaries are taken from the
// front, variables from the back.
constexpr std::array<std::uint8_t, 21> kPool = {19, 20, 21, 22, 23, 24, 25, 26, 27, 4,  31,
                                                18, 17, 16, 15, 14, 13, 12, 11, 10, 9};
// Variables stop getting registers when fewer than this many are free.
constexpr int kVarReserve = 8;

struct Line {
  std::string label;
  std::optional<Instruction> in;
  std::string imm;  // symbolic immediate, overrides in->imm when set
};
using Code = std::vector<Line>;

struct LowerError {
  SourceLoc loc;
  std::string message;
};

Instruction ins(Opcode op, std::uint8_t rd = 0, std::uint8_t ra = 0, std::uint8_t rb = 0, SWord imm = 0) {
  Instruction in;
  in.opcode = op;
  in.rd = rd;
  in.ra = ra;
  in.rb = rb;
  in.imm = imm;
  return in;
}

Instruction ctl(Opcode op, std::uint8_t rc, bool pol, std::uint8_t rd, std::uint8_t ra, SWord imm = 0) {
  Instruction in = ins(op, rd, ra, 0, imm);
  in.rc = rc;
  in.pol = pol;
  return in;
}

bool is_literal(const Expr& e) { return e.kind == Expr::Kind::kInt || e.kind == Expr::Kind::kFloat; }
bool is_quantum(const Expr& e) { return e.kind == Expr::Kind::kBinary && (e.op == "@" || e.op == "#"); }

std::unique_ptr<Expr> clone(const Expr& e) {
  auto c = std::make_unique<Expr>();
  c->kind = e.kind;
  c->loc = e.loc;
  c->type = e.type;
  c->value = e.value;
  c->op = e.op;
  c->name = e.name;
  c->sym = e.sym;
  c->callee = e.callee;
  for (auto& k : e.kids) c->kids.push_back(clone(*k));
  return c;
}

std::string render(const Line& l) {
  if (!l.in) return l.label + ":";
  std::string s = to_string(*l.in);
  if (!l.imm.empty()) s = s.substr(0, s.rfind(", ") + 2) + l.imm;
  return "    " + s;
}

int count_instructions(const Code& c) {
  return static_cast<int>(std::count_if(c.begin(), c.end(), [](const Line& l) { return l.in.has_value(); }));
}

// Where a scalar lives: a register, or a static data word.
struct Home {
  std::uint8_t reg = 0;
  std::string label;
};

class Lowerer {
 public:
  Lowerer(const TypedAst& ast, CompileResult& out) : ast_(ast), an_(ast), out_(out) {}

  void run() {
    const Function* main_fn = ast_.find_function("main");
    check_recursion();
    if (out_.diagnostics.has_errors()) return;
    for (auto& g : ast_.globals) global(*g);
    try {
      code_ = &text_;
      lower_function(*main_fn);
      for (auto& f : ast_.functions)
        if (f.get() != main_fn && reachable_.count(f.get())) lower_function(*f);
    } catch (const LowerError& e) {
      out_.diagnostics.error(e.loc, e.message);
      return;
    }
    out_.assembly = render_module();
  }

 private:
  // ---- call graph ----

  void check_recursion() {
    std::map<const Function*, int> state;  // 1 visiting, 2 done
    std::function<void(const Function*)> visit = [&](const Function* f) {
      state[f] = 1;
      for (const Function* g : an_.callees(f)) {
        if (state[g] == 1) {
          out_.diagnostics.error(g->loc, "recursion unsupported: '" + g->name + "' is part of a call cycle");
        } else if (state[g] == 0) {
          visit(g);
        }
      }
      state[f] = 2;
    };
    for (auto& f : ast_.functions)
      if (state[f.get()] == 0) visit(f.get());
    std::vector<const Function*> work = {ast_.find_function("main")};
    while (!work.empty()) {
      const Function* f = work.back();
      work.pop_back();
      if (!reachable_.insert(f).second) continue;
      for (const Function* g : an_.callees(f)) work.push_back(g);
    }
  }

  // ---- emission ----

  void emit(const Instruction& in, std::string imm = {}) {
    if (auto err = validate(in)) throw LowerError{loc_, "internal error: invalid " + to_string(in) + ": " + *err};
    code_->push_back({{}, in, std::move(imm)});
  }
  void label(std::string name) { code_->push_back({std::move(name), std::nullopt, {}}); }
  std::string fresh(std::string_view prefix) { return std::string(prefix) + std::to_string(labels_++); }

  void push_garbage(std::uint8_t r) {
    emit(ins(Opcode::kAddi, reg::kGrp, 0, 0, 1));
    emit(ins(Opcode::kSwapm, r, reg::kGrp, 0, -1));
  }

  // ---- registers ----

  std::uint8_t temp() {
    for (std::uint8_t r : kPool) {
      if (!busy_[r]) {
        busy_[r] = true;
        return r;
      }
    }
    throw LowerError{loc_, "out of registers: expression too complex or loops nested too deeply"};
  }
  void release(std::uint8_t r) { busy_[r] = false; }
  int free_count() const {
    return static_cast<int>(std::count_if(kPool.begin(), kPool.end(), [&](std::uint8_t r) { return !busy_[r]; }));
  }

  Home alloc_home(const Symbol* s) {
    Home h;
    if (free_count() > kVarReserve) {
      for (auto it = kPool.rbegin(); it != kPool.rend(); ++it) {
        if (!busy_[*it]) {
          busy_[*it] = true;
          h.reg = *it;
          break;
        }
      }
    } else {
      h.label = "_m" + std::to_string(s->id) + "_" + s->name;
      data_.push_back({h.label, {0}, 1});
    }
    homes_[s] = h;
    record_home(s, h);
    return h;
  }

  void record_home(const Symbol* s, const Home& h) {
    std::string key = (s->owner ? s->owner->name : "global") + "." + s->name;
    if (out_.homes.count(key)) key += "#" + std::to_string(s->id);
    out_.homes[key] = h.reg ? std::string(register_name(h.reg)) : "mem:" + h.label;
  }

  std::uint8_t reg_of(const Symbol* s) const {
    const Home& h = homes_.at(s);
    if (h.reg) return h.reg;
    auto it = bound_.find(s);
    if (it == bound_.end()) throw LowerError{loc_, "internal error: '" + s->name + "' is not bound"};
    return it->second;
  }

  // ---- memory-resident scalars ----

  // Brings every memory-resident scalar referenced by `es` into a register
  // for the duration of one statement.
  std::vector<const Symbol*> bind(std::initializer_list<const Expr*> es) {
    std::vector<const Symbol*> syms;
    std::function<void(const Expr&)> walk = [&](const Expr& e) {
      if (e.kind == Expr::Kind::kVar && e.sym && e.sym->type.is_scalar() && homes_.count(e.sym) &&
          homes_.at(e.sym).reg == 0 && !bound_.count(e.sym))
        syms.push_back(e.sym);
      for (auto& k : e.kids) walk(*k);
    };
    for (const Expr* e : es)
      if (e) walk(*e);
    std::sort(syms.begin(), syms.end(), [](const Symbol* a, const Symbol* b) { return a->id < b->id; });
    syms.erase(std::unique(syms.begin(), syms.end()), syms.end());
    for (const Symbol* s : syms) bind_symbol(s);
    return syms;
  }
  void bind_symbol(const Symbol* s) {
    std::uint8_t t = temp();
    emit(ins(Opcode::kSwapm, t, reg::kZero), homes_.at(s).label);
    bound_[s] = t;
  }
  void unbind(const std::vector<const Symbol*>& syms) {
    for (auto it = syms.rbegin(); it != syms.rend(); ++it) {
      std::uint8_t t = bound_.at(*it);
      emit(ins(Opcode::kSwapm, t, reg::kZero), homes_.at(*it).label);
      release(t);
      bound_.erase(*it);
    }
  }

  // ---- arrays ----

  struct ArrayRef {
    std::uint8_t reg = 0;  // parameter arrays: register holding the base
    std::string label;
  };
  ArrayRef array_of(const Symbol* s) const {
    auto it = arrays_.find(s);
    if (it == arrays_.end()) throw LowerError{loc_, "internal error: array '" + s->name + "' has no storage"};
    return it->second;
  }

  void static_array(const Stmt& d, const std::string& label) {
    std::vector<Word> words;
    for (auto& e : d.array_init) words.push_back(e->value);
    data_.push_back({label, words, static_cast<Word>(d.sym->type.length)});
    arrays_[d.sym] = {0, label};
    out_.homes[(d.sym->owner ? d.sym->owner->name : "global") + "." + d.sym->name] = "mem:" + label;
  }

  void global(const Stmt& d) {
    std::string label = "_g_" + d.sym->name;
    if (d.sym->type.is_array) {
      static_array(d, label);
      return;
    }
    data_.push_back({label, {d.value ? d.value->value : 0}, 1});
    Home h{0, label};
    homes_[d.sym] = h;
    record_home(d.sym, h);
  }

  // ---- expressions ----

  // Intermediate computation awaiting uncompute.
  struct Eval {
    Code log;
    std::vector<std::uint8_t> temps;
  };

  void put(Code* log, const Instruction& in, std::string imm = {}) {
    emit(in, imm);
    if (log) log->push_back({{}, in, std::move(imm)});
  }

  void uncompute(Eval& ev) {
    for (auto it = ev.log.rbegin(); it != ev.log.rend(); ++it) emit(invert_instruction(*it->in), it->imm);
    for (auto it = ev.temps.rbegin(); it != ev.temps.rend(); ++it) release(*it);
  }

  // Computes `e` into the zero register `t`, leaving every other register as
  // it was.
  void materialize(const Expr& e, std::uint8_t t) {
    Eval ev;
    compute(e, t, ev, nullptr);
    uncompute(ev);
  }

  // Returns `t` holding the value of `e` to zero by running the inverse of a
  // fresh materialization; the inputs of `e` must be unchanged.
  void clear(const Expr& e, std::uint8_t t) {
    Code scratch;
    Code* saved = code_;
    code_ = &scratch;
    materialize(e, t);
    code_ = saved;
    for (auto it = scratch.rbegin(); it != scratch.rend(); ++it) emit(invert_instruction(*it->in), it->imm);
  }

  std::uint8_t value_of(const Expr& e, Eval& ev) {
    if (e.kind == Expr::Kind::kVar) return reg_of(e.sym);
    if (e.kind == Expr::Kind::kCall) return results_.at(&e);
    if (is_literal(e) && e.value == 0) return reg::kZero;
    std::uint8_t t = temp();
    ev.temps.push_back(t);
    compute(e, t, ev, &ev.log);
    return t;
  }

  std::uint8_t scratch(Eval& ev) {
    std::uint8_t t = temp();
    ev.temps.push_back(t);
    return t;
  }

  void compute(const Expr& e, std::uint8_t t, Eval& ev, Code* log) {
    auto P = [&](const Instruction& in, std::string imm = {}) { put(log, in, std::move(imm)); };
    switch (e.kind) {
      case Expr::Kind::kInt:
      case Expr::Kind::kFloat:
        if (e.value) P(ins(Opcode::kAddi, t, 0, 0, static_cast<SWord>(e.value)));
        return;
      case Expr::Kind::kVar:
        P(ins(Opcode::kXorr, t, reg_of(e.sym)));
        return;
      case Expr::Kind::kCall:
        P(ins(Opcode::kXorr, t, results_.at(&e)));
        return;
      case Expr::Kind::kIndex: {
        auto [r, imm] = element_address(e, ev);
        P(ins(Opcode::kXorm, t, r), imm);
        return;
      }
      case Expr::Kind::kCast: {
        const Expr& k = *e.kids[0];
        std::uint8_t a = value_of(k, ev);
        if (e.type.is_float() && !k.type.is_float()) {
          P(ins(Opcode::kXsll, t, a, 0, 16));
        } else if (!e.type.is_float() && k.type.is_float()) {
          std::uint8_t d = scratch(ev);
          put(&ev.log, ins(Opcode::kAddi, d, 0, 0, 65536));
          P(ins(Opcode::kXdivk, t, a, d, 0));
        } else {
          P(ins(Opcode::kXorr, t, a));
        }
        return;
      }
      case Expr::Kind::kUnary: {
        std::uint8_t a = value_of(*e.kids[0], ev);
        if (e.op == "!") {
          P(ins(Opcode::kXeq, t, a, reg::kZero));
          return;
        }
        P(ins(Opcode::kXorr, t, a));
        P(ins(e.op == "-" ? Opcode::kNeg : Opcode::kNotr, t));
        return;
      }
      case Expr::Kind::kBinary:
        binary(e, t, ev, log);
        return;
    }
  }

  void binary(const Expr& e, std::uint8_t t, Eval& ev, Code* log) {
    auto P = [&](const Instruction& in) { put(log, in); };
    const Expr& l = *e.kids[0];
    const Expr& r = *e.kids[1];
    const std::string& op = e.op;
    bool fl = l.type.is_float();
    Opcode slt = l.type.base == BaseType::kUnsigned ? Opcode::kXltu : Opcode::kXslt;
    if (op == "+" || op == "-") {
      std::uint8_t a = value_of(l, ev);
      if (is_literal(r)) {
        P(ins(Opcode::kXorr, t, a));
        Word k = op == "+" ? r.value : 0u - r.value;
        if (k) P(ins(Opcode::kAddi, t, 0, 0, static_cast<SWord>(k)));
        return;
      }
      std::uint8_t b = value_of(r, ev);
      P(ins(Opcode::kXorr, t, a));
      P(ins(op == "+" ? Opcode::kAdd : Opcode::kSub, t, b));
      return;
    }
    if (op == "<<" || op == ">>") {
      std::uint8_t a = value_of(l, ev);
      if (is_literal(r)) {
        P(ins(op == "<<" ? Opcode::kXsll : Opcode::kXsrl, t, a, 0, static_cast<SWord>(r.value & 31)));
        return;
      }
      std::uint8_t b = value_of(r, ev);
      P(ins(op == "<<" ? Opcode::kXsllv : Opcode::kXsrlv, t, a, b));
      return;
    }
    std::uint8_t a = value_of(l, ev);
    std::uint8_t b = value_of(r, ev);
    if (op == "&&" || op == "||") {
      std::uint8_t ba = scratch(ev);
      put(&ev.log, ins(Opcode::kXltu, ba, reg::kZero, a));
      std::uint8_t bb = scratch(ev);
      put(&ev.log, ins(Opcode::kXltu, bb, reg::kZero, b));
      P(ins(op == "&&" ? Opcode::kXand : Opcode::kXior, t, ba, bb));
    } else if (op == "*") {
      P(fl ? ins(Opcode::kXmulk, t, a, b, 16) : ins(Opcode::kMadd, t, a, b));
    } else if (op == "/") {
      P(ins(Opcode::kXdivk, t, a, b, fl ? 16 : 0));
    } else if (op == "%") {
      P(ins(Opcode::kXrem, t, a, b));
    } else if (op == "&") {
      P(ins(Opcode::kXand, t, a, b));
    } else if (op == "|") {
      P(ins(Opcode::kXior, t, a, b));
    } else if (op == "^") {
      P(ins(Opcode::kXorr, t, a));
      P(ins(Opcode::kXorr, t, b));
    } else if (op == "==" || op == "!=") {
      P(ins(Opcode::kXeq, t, a, b));
      if (op == "!=") P(ins(Opcode::kXori, t, 0, 0, 1));
    } else if (op == "<" || op == ">=") {
      P(ins(slt, t, a, b));
      if (op == ">=") P(ins(Opcode::kXori, t, 0, 0, 1));
    } else if (op == ">" || op == "<=") {
      P(ins(slt, t, b, a));
      if (op == "<=") P(ins(Opcode::kXori, t, 0, 0, 1));
    } else {
      throw LowerError{e.loc, "internal error: operator '" + op + "' in expression"};
    }
  }

  // Register and immediate addressing an array element.
  std::pair<std::uint8_t, std::string> element_address(const Expr& e, Eval& ev) {
    ArrayRef arr = array_of(e.sym);
    const Expr& idx = *e.kids[0];
    if (!arr.reg) {
      if (is_literal(idx)) return {reg::kZero, arr.label + " + " + std::to_string(static_cast<SWord>(idx.value))};
      return {value_of(idx, ev), arr.label};
    }
    std::uint8_t i = value_of(idx, ev);
    std::uint8_t a = scratch(ev);
    put(&ev.log, ins(Opcode::kXorr, a, i));
    put(&ev.log, ins(Opcode::kAdd, a, arr.reg));
    return {a, "0"};
  }

  // Address of an element in a fresh register that outlives one statement.
  struct Address {
    std::uint8_t reg = reg::kZero;
    std::string imm;
    const Expr* index = nullptr;  // set when `reg` must be cleared
    std::uint8_t base = 0;
  };
  Address address(const Expr& e) {
    ArrayRef arr = array_of(e.sym);
    const Expr& idx = *e.kids[0];
    if (!arr.reg && is_literal(idx))
      return {reg::kZero, arr.label + " + " + std::to_string(static_cast<SWord>(idx.value)), nullptr, 0};
    Address a{temp(), arr.reg ? "0" : arr.label, &idx, arr.reg};
    materialize(idx, a.reg);
    if (arr.reg) emit(ins(Opcode::kAdd, a.reg, arr.reg));
    return a;
  }
  void drop_address(const Address& a, const Symbol* array) {
    if (!a.index) return;
    if (Analysis::reads(*a.index).count(array)) {
      push_garbage(a.reg);
    } else {
      if (a.base) emit(ins(Opcode::kSub, a.reg, a.base));
      clear(*a.index, a.reg);
    }
    release(a.reg);
  }

  // ---- calls ----

  // Evaluates every call inside `es` (innermost first) and records the result
  // registers; they are returned so the caller can retire them.
  std::vector<const Expr*> hoist(std::initializer_list<const Expr*> es) {
    std::vector<const Expr*> calls;
    std::function<void(const Expr&)> walk = [&](const Expr& e) {
      for (auto& k : e.kids) walk(*k);
      if (e.kind == Expr::Kind::kCall) {
        results_[&e] = *lower_call(e);
        calls.push_back(&e);
      }
    };
    for (const Expr* e : es)
      if (e) walk(*e);
    return calls;
  }
  void retire(const std::vector<const Expr*>& calls, const Expr* keep = nullptr) {
    for (auto it = calls.rbegin(); it != calls.rend(); ++it) {
      std::uint8_t h = results_.at(*it);
      results_.erase(*it);
      if (*it == keep) continue;
      push_garbage(h);
      release(h);
    }
  }

  std::optional<std::uint8_t> lower_call(const Expr& e) {
    const Function* f = e.callee;
    enum class How { kMove, kValue, kArray };
    struct Stage {
      std::uint8_t reg;
      How how;
      const Expr* arg;
    };
    std::vector<Stage> stages;
    std::set<const Symbol*> moved;
    for (std::size_t k = 0; k < e.kids.size(); ++k) {
      const Expr& arg = *e.kids[k];
      std::uint8_t s = temp();
      if (f->params[k]->type.is_array) {
        stages.push_back({s, How::kArray, &arg});
        load_array_base(s, arg.sym);
      } else if (arg.kind == Expr::Kind::kVar && !moved.count(arg.sym)) {
        stages.push_back({s, How::kMove, &arg});
        emit(ins(Opcode::kSwap, s, reg_of(arg.sym)));
        moved.insert(arg.sym);
      } else {
        stages.push_back({s, How::kValue, &arg});
        materialize(arg, s);
      }
    }
    // Globals held in registers go back to memory so the callee sees them.
    std::vector<std::pair<const Symbol*, std::uint8_t>> flushed;
    for (auto& [sym, r] : bound_)
      if (sym->kind == Symbol::Kind::kGlobal) flushed.push_back({sym, r});
    std::sort(flushed.begin(), flushed.end(), [](auto& a, auto& b) { return a.first->id < b.first->id; });
    for (auto& [sym, r] : flushed) emit(ins(Opcode::kSwapm, r, reg::kZero), homes_.at(sym).label);

    std::vector<std::uint8_t> spill;
    for (std::uint8_t r = 0; r < kNumRegs; ++r) {
      bool staged = std::any_of(stages.begin(), stages.end(), [&](const Stage& s) { return s.reg == r; });
      bool own_arg = fn_ && r >= reg::kA0 && r < reg::kA0 + fn_->params.size();
      if ((busy_[r] && !staged) || own_arg) spill.push_back(r);
    }
    auto n = static_cast<SWord>(spill.size());
    for (SWord i = 0; i < n; ++i) emit(ins(Opcode::kSwapm, spill[i], reg::kSp, 0, i));
    if (n) emit(ins(Opcode::kAddi, reg::kSp, 0, 0, n));
    for (std::size_t k = 0; k < stages.size(); ++k)
      emit(ins(Opcode::kSwap, static_cast<std::uint8_t>(reg::kA0 + k), stages[k].reg));

    std::string site = fresh("_c");
    std::string entry = "f_" + f->name;
    emit(ins(Opcode::kAddi, reg::kTur), entry + " - " + site);
    label(site);
    emit(ins(Opcode::kSwap, reg::kUr, reg::kTur));
    emit(ins(Opcode::kAddi, reg::kTur), entry + "_ret - " + site);
    out_.calls.push_back({f->name, site, entry, entry + "_ret"});

    for (std::size_t k = 0; k < stages.size(); ++k)
      emit(ins(Opcode::kSwap, static_cast<std::uint8_t>(reg::kA0 + k), stages[k].reg));
    if (n) emit(ins(Opcode::kAddi, reg::kSp, 0, 0, -n));
    for (SWord i = n - 1; i >= 0; --i) emit(ins(Opcode::kSwapm, spill[i], reg::kSp, 0, i));
    for (auto& [sym, r] : flushed) emit(ins(Opcode::kSwapm, r, reg::kZero), homes_.at(sym).label);

    std::optional<std::uint8_t> result;
    if (f->ret.base != BaseType::kVoid) {
      result = temp();
      emit(ins(Opcode::kSwap, *result, reg::kV0));
    }

    auto effects = an_.writes(e);
    effects.insert(moved.begin(), moved.end());
    for (std::size_t k = 0; k < stages.size(); ++k) {
      const Stage& s = stages[k];
      switch (s.how) {
        case How::kMove:
          emit(ins(Opcode::kSwap, s.reg, reg_of(s.arg->sym)));
          break;
        case How::kArray:
          load_array_base(s.reg, s.arg->sym);
          break;
        case How::kValue: {
          auto reads = Analysis::reads(*s.arg);
          bool stale = an_.writes_param(f, static_cast<int>(k)) ||
                       std::any_of(reads.begin(), reads.end(), [&](const Symbol* x) { return effects.count(x); });
          if (stale) {
            push_garbage(s.reg);
          } else {
            clear(*s.arg, s.reg);
          }
          break;
        }
      }
      release(s.reg);
    }
    return result;
  }

  void load_array_base(std::uint8_t r, const Symbol* array) {
    ArrayRef a = array_of(array);
    if (a.reg) {
      emit(ins(Opcode::kXorr, r, a.reg));
    } else {
      emit(ins(Opcode::kXori, r), a.label);
    }
  }

  // ---- statements ----

  void lower_function(const Function& f) {
    fn_ = &f;
    bool is_main = f.name == "main";
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      auto r = static_cast<std::uint8_t>(reg::kA0 + i);
      if (f.params[i]->type.is_array) {
        arrays_[f.params[i]] = {r, {}};
      } else {
        homes_[f.params[i]] = {r, {}};
      }
      out_.homes[f.name + "." + f.params[i]->name] = std::string(register_name(r));
    }
    std::string entry = is_main ? "main" : "f_" + f.name;
    label(entry);
    if (!is_main) {
      emit(ins(Opcode::kSwap, reg::kUr, reg::kTur));
      emit(ins(Opcode::kSwapm, reg::kTur, reg::kSp));
      emit(ins(Opcode::kAddi, reg::kSp, 0, 0, 1));
    }
    scopes_.emplace_back();
    for (auto& s : f.body->stmts) lower_stmt(*s);
    end_scope(is_main);
    if (is_main) {
      emit(ins(Opcode::kHalt));
    } else {
      emit(ins(Opcode::kAddi, reg::kSp, 0, 0, -1));
      emit(ins(Opcode::kSwapm, reg::kTur, reg::kSp));
      emit(ins(Opcode::kNeg, reg::kTur));
      emit(ins(Opcode::kAddi, reg::kTur), entry + " - " + entry + "_ret");
      label(entry + "_ret");
      emit(ins(Opcode::kSwap, reg::kUr, reg::kTur));
    }
    fn_ = nullptr;
  }

  void end_scope(bool keep) {
    auto syms = std::move(scopes_.back());
    scopes_.pop_back();
    for (auto it = syms.rbegin(); it != syms.rend(); ++it) {
      const Home& h = homes_.at(*it);
      if (!keep) {
        if (h.reg) {
          push_garbage(h.reg);
        } else {
          bind_symbol(*it);
          std::uint8_t t = bound_.at(*it);
          push_garbage(t);
          bound_.erase(*it);
          release(t);
        }
      }
      if (h.reg) release(h.reg);
    }
  }

  void lower_stmt(const Stmt& st) {
    loc_ = st.loc;
    switch (st.kind) {
      case Stmt::Kind::kBlock:
        scopes_.emplace_back();
        for (auto& s : st.stmts) lower_stmt(*s);
        end_scope(false);
        break;
      case Stmt::Kind::kDecl:
        lower_decl(st);
        break;
      case Stmt::Kind::kAssign:
        lower_assign(st);
        break;
      case Stmt::Kind::kIf:
        lower_if(st);
        break;
      case Stmt::Kind::kDoWhile:
        lower_do(st);
        break;
      case Stmt::Kind::kPrint:
        lower_print(st);
        break;
      case Stmt::Kind::kReturn:
        lower_return(st);
        break;
      case Stmt::Kind::kCall: {
        auto b = bind({st.value.get()});
        for (auto& k : st.value->kids) hoist_into(*k);
        auto h = lower_call(*st.value);
        retire_nested();
        if (h) {
          push_garbage(*h);
          release(*h);
        }
        unbind(b);
        break;
      }
      case Stmt::Kind::kRzk: {
        auto b = bind({st.target.get()});
        Instruction in = ins(Opcode::kRzk, reg_of(st.target->sym), 0, 0, static_cast<SWord>(*an_.const_value(*st.args[1])));
        in.ra = static_cast<std::uint8_t>(*an_.const_value(*st.args[0]));
        emit(in);
        unbind(b);
        break;
      }
    }
  }

  // Hoists calls nested in a call statement's arguments.
  void hoist_into(const Expr& e) {
    auto calls = hoist({&e});
    pending_.insert(pending_.end(), calls.begin(), calls.end());
  }
  void retire_nested() {
    retire(pending_);
    pending_.clear();
  }

  void lower_decl(const Stmt& st) {
    const Symbol* s = st.sym;
    if (s->type.is_array) {
      static_array(st, "_a" + std::to_string(s->id) + "_" + s->name);
      return;
    }
    Home h = alloc_home(s);
    scopes_.back().push_back(s);
    if (!st.value) return;
    const Expr& v = *st.value;
    std::vector<const Symbol*> b;
    if (!h.reg) {
      bind_symbol(s);
      b.push_back(s);
    }
    auto more = bind({&v});
    std::uint8_t home = reg_of(s);
    if (is_quantum(v)) {
      if (v.kids[0]->value) emit(ins(Opcode::kAddi, home, 0, 0, static_cast<SWord>(v.kids[0]->value)));
      quantum_gate(v.op, home, *v.kids[1]);
    } else {
      auto calls = hoist({&v});
      if (v.kind == Expr::Kind::kCall) {
        emit(ins(Opcode::kSwap, home, results_.at(&v)));
        release(results_.at(&v));
        retire(calls, &v);
      } else {
        materialize(v, home);
        retire(calls);
      }
    }
    unbind(more);
    unbind(b);
  }

  void quantum_gate(const std::string& op, std::uint8_t r, const Expr& count) {
    auto k = *an_.const_value(count);
    if (k) emit(ins(op == "@" || op == "@=" ? Opcode::kHq : Opcode::kZq, r, 0, 0, static_cast<SWord>(k)));
  }

  void lower_assign(const Stmt& st) {
    const Expr& tg = *st.target;
    const Expr& v = *st.value;
    if (st.op == "@=" || st.op == "#=") {
      auto b = bind({&tg});
      quantum_gate(st.op, reg_of(tg.sym), v);
      unbind(b);
      return;
    }
    if (st.op == "*=" || st.op == "/=" || st.op == "%=") {
      Expr combined;
      combined.kind = Expr::Kind::kBinary;
      combined.loc = st.loc;
      combined.type = tg.type;
      combined.op = st.op.substr(0, 1);
      combined.kids.push_back(clone(tg));
      combined.kids.push_back(clone(v));
      assign_value(tg, combined);
      return;
    }
    if (st.op == "=") {
      assign_value(tg, v);
    } else {
      add_sub(tg, v, st.op == "+=");
    }
  }

  bool same_var(const Expr& a, const Expr& b) {
    return a.kind == Expr::Kind::kVar && b.kind == Expr::Kind::kVar && a.sym == b.sym;
  }

  void assign_value(const Expr& tg, const Expr& v) {
    if (is_quantum(v) && same_var(tg, *v.kids[0])) {
      auto b = bind({&tg});
      quantum_gate(v.op, reg_of(tg.sym), *v.kids[1]);
      unbind(b);
      return;
    }
    if (tg.kind == Expr::Kind::kVar && v.kind == Expr::Kind::kUnary && v.op == "~" && same_var(tg, *v.kids[0])) {
      auto b = bind({&tg});
      emit(ins(Opcode::kNotr, reg_of(tg.sym)));
      unbind(b);
      return;
    }
    auto b = bind({&tg, &v});
    auto calls = hoist({&tg, &v});
    std::uint8_t t;
    const Expr* keep = nullptr;
    if (is_quantum(v)) {
      t = temp();
      if (v.kids[0]->value) emit(ins(Opcode::kAddi, t, 0, 0, static_cast<SWord>(v.kids[0]->value)));
      quantum_gate(v.op, t, *v.kids[1]);
    } else if (v.kind == Expr::Kind::kCall) {
      t = results_.at(&v);
      keep = &v;
    } else {
      t = temp();
      materialize(v, t);
    }
    if (tg.kind == Expr::Kind::kVar) {
      emit(ins(Opcode::kSwap, reg_of(tg.sym), t));
      push_garbage(t);
    } else {
      Address a = address(tg);
      emit(ins(Opcode::kSwapm, t, a.reg), a.imm);
      push_garbage(t);
      drop_address(a, tg.sym);
    }
    release(t);
    retire(calls, keep);
    unbind(b);
  }

  void add_sub(const Expr& tg, const Expr& v, bool plus) {
    auto b = bind({&tg, &v});
    auto calls = hoist({&tg, &v});
    Opcode op = plus ? Opcode::kAdd : Opcode::kSub;
    auto literal = [&](std::uint8_t r) {
      Word k = plus ? v.value : 0u - v.value;
      if (k) emit(ins(Opcode::kAddi, r, 0, 0, static_cast<SWord>(k)));
    };
    // Operand register for the right-hand side, plus how to retire it.
    std::optional<std::uint8_t> owned;
    std::uint8_t operand = reg::kZero;
    bool self_read = Analysis::reads(v).count(tg.sym) > 0;
    if (!is_literal(v)) {
      if ((v.kind == Expr::Kind::kVar && !same_var(tg, v)) || v.kind == Expr::Kind::kCall) {
        operand = v.kind == Expr::Kind::kVar ? reg_of(v.sym) : results_.at(&v);
      } else {
        owned = temp();
        operand = *owned;
        materialize(v, operand);
      }
    }
    if (tg.kind == Expr::Kind::kVar) {
      std::uint8_t x = reg_of(tg.sym);
      if (is_literal(v)) {
        literal(x);
      } else {
        emit(ins(op, x, operand));
      }
    } else {
      Address a = address(tg);
      std::uint8_t el = temp();
      emit(ins(Opcode::kSwapm, el, a.reg), a.imm);
      if (is_literal(v)) {
        literal(el);
      } else {
        emit(ins(op, el, operand));
      }
      emit(ins(Opcode::kSwapm, el, a.reg), a.imm);
      release(el);
      drop_address(a, tg.sym);
    }
    if (owned) {
      if (self_read) {
        push_garbage(*owned);
      } else {
        clear(v, *owned);
      }
      release(*owned);
    }
    retire(calls);
    unbind(b);
  }

  // c ^= (cond != 0)
  void eval_bit(const Expr& cond, std::uint8_t c) {
    auto b = bind({&cond});
    auto calls = hoist({&cond});
    if (cond.kind == Expr::Kind::kVar || cond.kind == Expr::Kind::kCall) {
      emit(ins(Opcode::kXltu, c, reg::kZero,
               cond.kind == Expr::Kind::kVar ? reg_of(cond.sym) : results_.at(&cond)));
    } else if (is_literal(cond)) {
      if (cond.value) emit(ins(Opcode::kXori, c, 0, 0, 1));
    } else {
      std::uint8_t r = temp();
      materialize(cond, r);
      emit(ins(Opcode::kXltu, c, reg::kZero, r));
      clear(cond, r);
      release(r);
    }
    retire(calls);
    unbind(b);
  }

  Code lower_arm(const Stmt* arm) {
    Code code;
    if (!arm) return code;
    Code* saved = code_;
    code_ = &code;
    scopes_.emplace_back();
    lower_stmt(*arm);
    end_scope(false);
    code_ = saved;
    return code;
  }

  void append(const Code& c) { code_->insert(code_->end(), c.begin(), c.end()); }

  void lower_if(const Stmt& st) {
    const Expr& cond = *st.cond;
    SourceLoc at = st.loc;
    std::uint8_t c = temp();
    eval_bit(cond, c);
    Code arms[2] = {lower_arm(st.body[0].get()), lower_arm(st.body[1].get())};
    loc_ = at;
    int x = std::max(count_instructions(arms[0]), count_instructions(arms[1]));
    for (auto& a : arms)
      for (int i = count_instructions(a); i < x; ++i) a.push_back({{}, ins(Opcode::kNop), {}});
    std::string l = fresh("_i");
    label(l);
    emit(ctl(Opcode::kCaddi, c, false, reg::kUr, 0, x));
    append(arms[0]);
    emit(ctl(Opcode::kCaddi, c, false, reg::kUr, 0, -x));
    emit(ctl(Opcode::kCaddi, c, true, reg::kUr, 0, x));
    append(arms[1]);
    emit(ctl(Opcode::kCaddi, c, true, reg::kUr, 0, -x));
    out_.ifs.push_back({l, c, x});

    std::set<const Symbol*> written;
    for (auto& a : st.body) {
      if (!a) continue;
      auto w = an_.writes(*a);
      written.insert(w.begin(), w.end());
    }
    auto reads = Analysis::reads(cond);
    bool recompute = !Analysis::has_call(cond) &&
                     std::none_of(reads.begin(), reads.end(), [&](const Symbol* s) { return written.count(s); });
    if (recompute) {
      eval_bit(cond, c);
    } else {
      push_garbage(c);
    }
    release(c);
  }

  void lower_do(const Stmt& st) {
    std::uint8_t counter = temp(), act = temp(), tur1 = temp(), tur2 = temp(), c = temp();
    std::string n = std::to_string(labels_++);
    std::string top = "_L" + n, end = "_E" + n;
    emit(ins(Opcode::kAddi, tur1, 0, 0, 1));
    emit(ins(Opcode::kAddi, tur2), top + " - " + end);
    label(top);
    Instruction tcs = ins(Opcode::kTcs, tur1, act, tur2);
    tcs.rc = counter;
    emit(tcs);
    Instruction tcai = ins(Opcode::kTcai, tur1, act, tur2);
    tcai.rc = counter;
    emit(tcai, end + " - " + top + " + 1");
    emit(ctl(Opcode::kCzaddi, counter, false, tur1, 0, -1));
    // The previous iteration left c = 1 exactly when counter != 0.
    emit(ins(Opcode::kXltu, c, reg::kZero, counter));
    lower_stmt(*st.body[0]);
    loc_ = st.loc;
    emit(ins(Opcode::kAddi, counter, 0, 0, 1));
    eval_bit(*st.cond, c);
    label(end);
    emit(ctl(Opcode::kCaddi, c, true, reg::kUr, 0), top + " - " + end + " - 1");
    emit(ctl(Opcode::kCswap, counter, false, tur1, tur2));
    emit(ins(Opcode::kAddi, tur2, 0, 0, -1));
    emit(ins(Opcode::kXori, act, 0, 0, 1));
    push_garbage(counter);
    out_.loops.push_back({top, end, counter, act, tur1, tur2, c});
    for (std::uint8_t r : {c, tur2, tur1, act, counter}) release(r);
  }

  void lower_print(const Stmt& st) {
    const Expr& v = *st.value;
    auto b = bind({&v});
    auto calls = hoist({&v});
    if (v.kind == Expr::Kind::kVar || v.kind == Expr::Kind::kCall) {
      emit(ins(Opcode::kMeas, v.kind == Expr::Kind::kVar ? reg_of(v.sym) : results_.at(&v)));
    } else {
      std::uint8_t r = temp();
      materialize(v, r);
      emit(ins(Opcode::kMeas, r));
      clear(v, r);
      release(r);
    }
    retire(calls);
    unbind(b);
  }

  void lower_return(const Stmt& st) {
    if (!st.value) return;
    const Expr& v = *st.value;
    auto b = bind({&v});
    auto calls = hoist({&v});
    if (v.kind == Expr::Kind::kCall) {
      emit(ins(Opcode::kSwap, reg::kV0, results_.at(&v)));
      release(results_.at(&v));
      retire(calls, &v);
    } else {
      materialize(v, reg::kV0);
      retire(calls);
    }
    unbind(b);
  }

  // ---- output ----

  struct Data {
    std::string label;
    std::vector<Word> init;
    Word length;
  };

  std::string render_module() const {
    Word size = 0;
    for (auto& d : data_) size += d.length;
    std::ostringstream os;
    os << "# ONDA compiler output\n";
    os << ".mem " << kMemWords << "\n";
    os << ".stack " << size << "\n";
    os << ".garbage " << size + kStackWords << "\n";
    os << ".entry main\n";
    os << ".text\n";
    for (const Line& l : text_) os << render(l) << "\n";
    if (!data_.empty()) {
      os << ".data\n";
      for (auto& d : data_) {
        std::size_t used = 0;
        os << d.label << ":";
        if (!d.init.empty()) {
          os << " .word ";
          for (std::size_t i = 0; i < d.init.size(); ++i)
            os << (i ? ", " : "") << static_cast<SWord>(d.init[i]);
          used = d.init.size();
          os << "\n";
          if (used < d.length) os << "    .zero " << d.length - used << "\n";
        } else {
          os << " .zero " << d.length << "\n";
        }
      }
    }
    return os.str();
  }

  const TypedAst& ast_;
  Analysis an_;
  CompileResult& out_;
  Code text_;
  Code* code_ = nullptr;
  std::array<bool, kNumRegs> busy_{};
  std::map<const Symbol*, Home> homes_;
  std::map<const Symbol*, ArrayRef> arrays_;
  std::map<const Symbol*, std::uint8_t> bound_;
  std::map<const Expr*, std::uint8_t> results_;
  std::vector<const Expr*> pending_;
  std::vector<Data> data_;
  std::vector<std::vector<const Symbol*>> scopes_;
  std::set<const Function*> reachable_;
  const Function* fn_ = nullptr;
  int labels_ = 0;
  SourceLoc loc_;
};

}  // namespace

CompileResult lower_program(const TypedAst& ast) {
  CompileResult out;
  if (!ast.find_function("main")) {
    out.diagnostics.error({}, "program has no main function");
    return out;
  }
  Lowerer(ast, out).run();
  if (out.diagnostics.has_errors()) {
    out.assembly.reset();
    out.loops.clear();
    out.ifs.clear();
    out.calls.clear();
  }
  return out;
}

BuildResult build(std::string_view source, std::string_view file_name) {
  BuildResult r;
  ParseResult parsed = parse(source, file_name);
  r.diagnostics.append(parsed.diagnostics);
  if (!parsed.ast) return r;
  r.compiled = lower_program(*parsed.ast);
  r.diagnostics.append(r.compiled.diagnostics);
  if (!r.compiled.assembly) return r;
  r.assembled = assemble(*r.compiled.assembly, std::string(file_name) + ".qs");
  r.diagnostics.append(r.assembled.diagnostics);
  r.program = r.assembled.program;
  return r;
}

}  // namespace onda
