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

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "analysis.h"
#include "onda/compiler.h"

namespace onda {
namespace {

using detail::Analysis;

struct Token {
  enum class Kind { kIdent, kInt, kFloat, kPunct, kEof };
  Kind kind = Kind::kEof;
  std::string text;
  SourceLoc loc;
  std::uint64_t int_value = 0;
  double float_value = 0;
};

// Thrown to abandon parsing after a syntax error has been recorded.
struct SyntaxError {};

class Lexer {
 public:
  Lexer(std::string_view src, std::string file, Diagnostics& diags)
      : src_(src), file_(std::move(file)), diags_(diags) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.loc = {file_, line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back(std::move(t));
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          advance();
        t.kind = Token::Kind::kIdent;
        t.text = src_.substr(start, pos_ - start);
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        number(t);
      } else {
        punct(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (src_.substr(pos_, 2) == "//") {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (src_.substr(pos_, 2) == "/*") {
        SourceLoc at{file_, line_, col_};
        advance();
        advance();
        while (pos_ < src_.size() && src_.substr(pos_, 2) != "*/") advance();
        if (pos_ >= src_.size()) {
          diags_.error(at, "unterminated comment");
          return;
        }
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  void number(Token& t) {
    std::size_t start = pos_;
    bool hex = src_.substr(pos_, 2) == "0x" || src_.substr(pos_, 2) == "0X";
    bool is_float = false;
    if (hex) {
      advance();
      advance();
      while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    } else {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      if (pos_ < src_.size() && src_[pos_] == '.') {
        is_float = true;
        advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        is_float = true;
        advance();
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      }
    }
    t.text = src_.substr(start, pos_ - start);
    if (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      diags_.error(t.loc, "malformed number '" + t.text + src_[pos_] + "'");
      throw SyntaxError{};
    }
    if (is_float) {
      t.kind = Token::Kind::kFloat;
      t.float_value = std::strtod(t.text.c_str(), nullptr);
      return;
    }
    t.kind = Token::Kind::kInt;
    std::string_view digits = hex ? std::string_view(t.text).substr(2) : std::string_view(t.text);
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), t.int_value, hex ? 16 : 10);
    if (ec != std::errc{} || digits.empty() || t.int_value > 0xFFFFFFFFull) {
      diags_.error(t.loc, "integer literal '" + t.text + "' does not fit in 32 bits");
      throw SyntaxError{};
    }
  }

  void punct(Token& t) {
    static const char* kTwo[] = {"==", "!=", "<=", ">=", "<<", ">>", "&&", "||",
                                 "+=", "-=", "*=", "/=", "%=", "@=", "#="};
    for (const char* op : kTwo) {
      if (src_.substr(pos_, 2) == op) {
        t.kind = Token::Kind::kPunct;
        t.text = op;
        advance();
        advance();
        return;
      }
    }
    static const std::string_view kOne = "+-*/%<>=!~&|^@#(){}[],;";
    if (kOne.find(src_[pos_]) == std::string_view::npos) {
      diags_.error(t.loc, std::string("unexpected character '") + src_[pos_] + "'");
      throw SyntaxError{};
    }
    t.kind = Token::Kind::kPunct;
    t.text = std::string(1, src_[pos_]);
    advance();
  }

  std::string_view src_;
  std::string file_;
  Diagnostics& diags_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

bool is_type_keyword(std::string_view s) {
  return s == "int" || s == "unsigned" || s == "float" || s == "void";
}

bool is_keyword(std::string_view s) {
  return is_type_keyword(s) || s == "if" || s == "else" || s == "do" || s == "while" || s == "print" ||
         s == "return";
}

// Recursive descent over the token stream. Builds the AST with names
// unresolved; declarations already own their Symbol.
class Parser {
 public:
  Parser(std::vector<Token> toks, TypedAst& ast, Diagnostics& diags)
      : toks_(std::move(toks)), ast_(ast), diags_(diags) {}

  void program() {
    while (!at_eof()) {
      SourceLoc loc = peek().loc;
      Type t = type();
      Token name = ident("declaration name");
      if (is("(")) {
        function(t, name);
      } else {
        if (t.base == BaseType::kVoid) fail(loc, "variables cannot have type void");
        ast_.globals.push_back(decl_rest(t, name, Symbol::Kind::kGlobal, loc));
      }
    }
  }

 private:
  const Token& peek(int k = 0) const {
    std::size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  bool at_eof() const { return peek().kind == Token::Kind::kEof; }
  bool is(std::string_view p, int k = 0) const {
    const Token& t = peek(k);
    return (t.kind == Token::Kind::kPunct || t.kind == Token::Kind::kIdent) && t.text == p;
  }
  Token take() {
    Token t = peek();
    if (!at_eof()) ++pos_;
    return t;
  }
  bool accept(std::string_view p) {
    if (!is(p)) return false;
    ++pos_;
    return true;
  }
  [[noreturn]] void fail(const SourceLoc& loc, std::string msg) {
    diags_.error(loc, std::move(msg));
    throw SyntaxError{};
  }
  std::string describe(const Token& t) const {
    return t.kind == Token::Kind::kEof ? "end of file" : "'" + t.text + "'";
  }
  void expect(std::string_view p) {
    if (!accept(p)) fail(peek().loc, "expected '" + std::string(p) + "' before " + describe(peek()));
  }
  Token ident(std::string_view what) {
    const Token& t = peek();
    if (t.kind != Token::Kind::kIdent || is_keyword(t.text))
      fail(t.loc, "expected " + std::string(what) + " before " + describe(t));
    return take();
  }

  Type type() {
    const Token& t = peek();
    if (t.kind != Token::Kind::kIdent || !is_type_keyword(t.text))
      fail(t.loc, "expected a type before " + describe(t));
    take();
    if (t.text == "int") return {BaseType::kInt};
    if (t.text == "float") return {BaseType::kFloat};
    if (t.text == "void") return {BaseType::kVoid};
    accept("int");
    return {BaseType::kUnsigned};
  }

  Symbol* new_symbol(const Token& name, Type t, Symbol::Kind kind) {
    auto s = std::make_unique<Symbol>();
    s->name = name.text;
    s->type = t;
    s->kind = kind;
    s->loc = name.loc;
    s->id = static_cast<int>(ast_.symbols.size());
    ast_.symbols.push_back(std::move(s));
    return ast_.symbols.back().get();
  }

  void function(Type ret, const Token& name) {
    auto f = std::make_unique<Function>();
    f->name = name.text;
    f->ret = ret;
    f->loc = name.loc;
    expect("(");
    if (is("void") && is(")", 1)) take();
    if (!is(")")) {
      do {
        Type t = type();
        if (t.base == BaseType::kVoid) fail(peek().loc, "parameters cannot have type void");
        Token pname = ident("parameter name");
        if (accept("[")) {
          expect("]");
          t.is_array = true;
        }
        Symbol* s = new_symbol(pname, t, Symbol::Kind::kParam);
        s->owner = f.get();
        s->param_index = static_cast<int>(f->params.size());
        f->params.push_back(s);
      } while (accept(","));
    }
    expect(")");
    fn_ = f.get();
    f->body = block();
    fn_ = nullptr;
    ast_.functions.push_back(std::move(f));
  }

  std::unique_ptr<Stmt> decl_rest(Type t, const Token& name, Symbol::Kind kind, SourceLoc loc) {
    auto st = std::make_unique<Stmt>();
    st->kind = Stmt::Kind::kDecl;
    st->loc = loc;
    bool bracket = false;
    if (accept("[")) {
      bracket = true;
      t.is_array = true;
      if (!is("]")) {
        const Token& n = peek();
        if (n.kind != Token::Kind::kInt) fail(n.loc, "array length must be an integer literal");
        if (n.int_value == 0 || n.int_value > (1u << 16)) fail(n.loc, "array length must be in 1..65536");
        t.length = static_cast<int>(n.int_value);
        take();
      }
      expect("]");
    }
    if (accept("=")) {
      if (accept("{")) {
        // `int a = {...}` declares an array as well.
        t.is_array = true;
        st->has_array_init = true;
        if (!is("}")) {
          do {
            st->array_init.push_back(expr());
          } while (accept(","));
        }
        expect("}");
        if (t.length == 0) t.length = static_cast<int>(st->array_init.size());
        if (t.length == 0) fail(loc, "array '" + name.text + "' has no elements");
      } else {
        if (bracket) fail(peek().loc, "array initializer must be a brace list");
        st->value = expr();
      }
    } else if (bracket && t.length == 0) {
      fail(loc, "array '" + name.text + "' needs a length or an initializer");
    }
    expect(";");
    st->sym = new_symbol(name, t, kind);
    st->sym->owner = fn_;
    return st;
  }

  std::unique_ptr<Stmt> block() {
    auto st = std::make_unique<Stmt>();
    st->kind = Stmt::Kind::kBlock;
    st->loc = peek().loc;
    expect("{");
    while (!is("}")) {
      if (at_eof()) fail(peek().loc, "expected '}' before end of file");
      st->stmts.push_back(statement());
    }
    take();
    return st;
  }

  std::unique_ptr<Stmt> statement() {
    const Token& t = peek();
    SourceLoc loc = t.loc;
    if (t.kind == Token::Kind::kIdent && is_type_keyword(t.text)) {
      Type ty = type();
      if (ty.base == BaseType::kVoid) fail(loc, "variables cannot have type void");
      Token name = ident("variable name");
      return decl_rest(ty, name, Symbol::Kind::kLocal, loc);
    }
    if (is("{")) return block();
    auto st = std::make_unique<Stmt>();
    st->loc = loc;
    if (accept("if")) {
      st->kind = Stmt::Kind::kIf;
      expect("(");
      st->cond = expr();
      expect(")");
      st->body[0] = statement();
      if (accept("else")) st->body[1] = statement();
      return st;
    }
    if (accept("do")) {
      st->kind = Stmt::Kind::kDoWhile;
      st->body[0] = block();
      if (!accept("while")) fail(peek().loc, "expected 'while' after do-block");
      expect("(");
      st->cond = expr();
      expect(")");
      expect(";");
      return st;
    }
    if (accept("print")) {
      st->kind = Stmt::Kind::kPrint;
      st->value = expr();
      expect(";");
      return st;
    }
    if (accept("return")) {
      st->kind = Stmt::Kind::kReturn;
      if (!is(";")) st->value = expr();
      expect(";");
      return st;
    }
    if (is("rzk") && is("(", 1)) {
      take();
      take();
      st->kind = Stmt::Kind::kRzk;
      st->target = expr();
      expect(",");
      st->args.push_back(expr());
      expect(",");
      st->args.push_back(expr());
      expect(")");
      expect(";");
      return st;
    }
    auto lhs = postfix();
    static const std::set<std::string, std::less<>> kAssign = {"=", "+=", "-=", "*=", "/=", "%=", "@=", "#="};
    if (peek().kind == Token::Kind::kPunct && kAssign.count(peek().text)) {
      st->kind = Stmt::Kind::kAssign;
      st->op = take().text;
      st->target = std::move(lhs);
      st->value = expr();
      expect(";");
      return st;
    }
    if (lhs->kind != Expr::Kind::kCall) fail(peek().loc, "expected assignment or call before " + describe(peek()));
    st->kind = Stmt::Kind::kCall;
    st->value = std::move(lhs);
    expect(";");
    return st;
  }

  // Precedence climbing; levels from loosest to tightest.
  std::unique_ptr<Expr> expr() { return binary(0); }

  std::unique_ptr<Expr> binary(int level) {
    static const std::vector<std::vector<std::string_view>> kLevels = {
        {"||"}, {"&&"}, {"|"}, {"^", "@", "#"}, {"&"}, {"==", "!="}, {"<", "<=", ">", ">="},
        {"<<", ">>"}, {"+", "-"}, {"*", "/", "%"}};
    if (level == static_cast<int>(kLevels.size())) return unary();
    auto lhs = binary(level + 1);
    for (;;) {
      const Token& t = peek();
      if (t.kind != Token::Kind::kPunct) return lhs;
      auto& ops = kLevels[level];
      if (std::find(ops.begin(), ops.end(), t.text) == ops.end()) return lhs;
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::kBinary;
      e->loc = t.loc;
      e->op = take().text;
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(binary(level + 1));
      lhs = std::move(e);
    }
  }

  std::unique_ptr<Expr> unary() {
    const Token& t = peek();
    if (t.kind == Token::Kind::kPunct && (t.text == "-" || t.text == "~" || t.text == "!" || t.text == "+")) {
      SourceLoc loc = t.loc;
      std::string op = take().text;
      auto operand = unary();
      if (op == "+") return operand;
      // Fold negative literals so -2147483648 stays representable.
      if (op == "-" && operand->kind == Expr::Kind::kInt) {
        operand->value = 0u - operand->value;
        operand->loc = loc;
        return operand;
      }
      if (op == "-" && operand->kind == Expr::Kind::kFloat) {
        operand->value = 0u - operand->value;
        operand->loc = loc;
        return operand;
      }
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::kUnary;
      e->loc = loc;
      e->op = op;
      e->kids.push_back(std::move(operand));
      return e;
    }
    return postfix();
  }

  std::unique_ptr<Expr> postfix() {
    const Token& t = peek();
    auto e = std::make_unique<Expr>();
    e->loc = t.loc;
    if (t.kind == Token::Kind::kInt) {
      e->kind = Expr::Kind::kInt;
      e->value = static_cast<Word>(take().int_value);
      return e;
    }
    if (t.kind == Token::Kind::kFloat) {
      e->kind = Expr::Kind::kFloat;
      double v = take().float_value;
      if (v >= 32768.0) fail(e->loc, "float literal out of range");
      e->value = to_fixed(v);
      return e;
    }
    if (accept("(")) {
      auto inner = expr();
      expect(")");
      return inner;
    }
    Token name = ident("expression");
    e->name = name.text;
    if (accept("(")) {
      e->kind = Expr::Kind::kCall;
      if (!is(")")) {
        do {
          e->kids.push_back(expr());
        } while (accept(","));
      }
      expect(")");
      return e;
    }
    if (accept("[")) {
      e->kind = Expr::Kind::kIndex;
      e->kids.push_back(expr());
      expect("]");
      return e;
    }
    e->kind = Expr::Kind::kVar;
    return e;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  TypedAst& ast_;
  Diagnostics& diags_;
  Function* fn_ = nullptr;
};

bool is_integral(const Type& t) { return t.is_scalar() && t.base != BaseType::kFloat; }

// Name resolution, typing and implicit conversions.
class Checker {
 public:
  Checker(TypedAst& ast, Diagnostics& diags) : ast_(ast), diags_(diags) {}

  void run() {
    scopes_.emplace_back();
    for (auto& f : ast_.functions) {
      if (funcs_.count(f->name)) {
        diags_.error(f->loc, "redefinition of function '" + f->name + "'");
        continue;
      }
      funcs_[f->name] = f.get();
      if (f->params.size() > 4) diags_.error(f->loc, "function '" + f->name + "' has more than 4 parameters");
    }
    for (auto& g : ast_.globals) declare(*g);
    auto main_it = funcs_.find("main");
    if (main_it == funcs_.end()) {
      diags_.error({ast_file_, 1, 1}, "program has no main function");
    } else if (!main_it->second->params.empty()) {
      diags_.error(main_it->second->loc, "main takes no parameters");
    }
    for (auto& f : ast_.functions) {
      fn_ = f.get();
      scopes_.emplace_back();
      for (Symbol* p : f->params) bind(p);
      auto& stmts = f->body->stmts;
      for (std::size_t i = 0; i < stmts.size(); ++i) statement(*stmts[i], i + 1 == stmts.size());
      scopes_.pop_back();
    }
    fn_ = nullptr;
  }

  std::string ast_file_;

 private:
  void bind(Symbol* s) {
    auto& scope = scopes_.back();
    if (scope.count(s->name)) {
      diags_.error(s->loc, "redeclaration of '" + s->name + "'");
      return;
    }
    scope[s->name] = s;
  }

  Symbol* lookup(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return f->second;
    }
    return nullptr;
  }

  void declare(Stmt& st) {
    Type t = st.sym->type;
    if (st.has_array_init) {
      if (static_cast<int>(st.array_init.size()) > t.length)
        diags_.error(st.loc, "too many initializers for '" + st.sym->name + "'");
      for (auto& e : st.array_init) {
        expr(e, false);
        coerce(e, t.element());
        if (e->kind != Expr::Kind::kInt && e->kind != Expr::Kind::kFloat)
          diags_.error(e->loc, "array initializers must be literals");
      }
    }
    if (st.value) {
      if (!expr(st.value, true).is_scalar()) diags_.error(st.value->loc, "initializer must be a scalar value");
      const Expr& v = *st.value;
      if (v.kind == Expr::Kind::kBinary && (v.op == "@" || v.op == "#") && v.kids[0]->kind != Expr::Kind::kInt)
        diags_.error(v.loc, "'" + v.op + "' operand in an initializer must be a literal");
      coerce(st.value, t);
      if (st.sym->kind == Symbol::Kind::kGlobal && st.value->kind != Expr::Kind::kInt &&
          st.value->kind != Expr::Kind::kFloat)
        diags_.error(st.value->loc, "global initializer must be a literal");
    }
    bind(st.sym);
  }

  void statement(Stmt& st, bool last) {
    switch (st.kind) {
      case Stmt::Kind::kDecl:
        declare(st);
        break;
      case Stmt::Kind::kBlock:
        scopes_.emplace_back();
        for (auto& s : st.stmts) statement(*s, false);
        scopes_.pop_back();
        break;
      case Stmt::Kind::kIf:
        condition(st.cond);
        for (auto& b : st.body) {
          if (!b) continue;
          scopes_.emplace_back();
          statement(*b, false);
          scopes_.pop_back();
        }
        break;
      case Stmt::Kind::kDoWhile:
        statement(*st.body[0], false);
        condition(st.cond);
        break;
      case Stmt::Kind::kPrint:
        if (!expr(st.value, false).is_scalar()) diags_.error(st.value->loc, "print needs a scalar value");
        break;
      case Stmt::Kind::kReturn:
        if (!last) {
          diags_.error(st.loc, "return must be the last statement of a function body");
          break;
        }
        if (st.value) {
          if (fn_->ret.base == BaseType::kVoid) {
            diags_.error(st.loc, "void function '" + fn_->name + "' returns a value");
            break;
          }
          expr(st.value, false);
          coerce(st.value, fn_->ret);
        }
        break;
      case Stmt::Kind::kCall:
        call(*st.value, true);
        break;
      case Stmt::Kind::kRzk: {
        Type t = expr(st.target, false);
        if (st.target->kind != Expr::Kind::kVar || !is_integral(t))
          diags_.error(st.target->loc, "rzk target must be an integer variable");
        for (auto& a : st.args)
          if (!is_integral(expr(a, false))) diags_.error(a->loc, "rzk operands must be integers");
        break;
      }
      case Stmt::Kind::kAssign:
        assign(st);
        break;
    }
  }

  void condition(std::unique_ptr<Expr>& e) {
    Type t = expr(e, false);
    if (!is_integral(t)) diags_.error(e->loc, "condition must have int type, not " + to_string(t));
  }

  void assign(Stmt& st) {
    Type t = expr(st.target, false);
    if (st.target->kind != Expr::Kind::kVar && st.target->kind != Expr::Kind::kIndex) {
      diags_.error(st.target->loc, "assignment target must be a variable or array element");
      return;
    }
    if (!t.is_scalar()) {
      diags_.error(st.target->loc, "cannot assign to array '" + st.target->name + "'");
      return;
    }
    if (st.target->kind == Expr::Kind::kIndex && Analysis::has_call(*st.target))
      diags_.error(st.target->loc, "calls are not allowed in the index of an assignment target");
    if (st.op == "@=" || st.op == "#=") {
      if (st.target->kind != Expr::Kind::kVar)
        diags_.error(st.target->loc, "'" + st.op + "' needs a scalar variable target");
      if (!is_integral(expr(st.value, false))) diags_.error(st.value->loc, "qubit count must be an integer");
      return;
    }
    bool quantum_rhs = st.op == "=";
    Type vt = expr(st.value, quantum_rhs);
    if (st.value->kind == Expr::Kind::kBinary && (st.value->op == "@" || st.value->op == "#")) {
      const Expr& base = *st.value->kids[0];
      bool literal = base.kind == Expr::Kind::kInt;
      bool self = st.target->kind == Expr::Kind::kVar && base.kind == Expr::Kind::kVar &&
                  base.sym == st.target->sym;
      if (!literal && !self)
        diags_.error(st.value->loc, "'" + st.value->op + "' operand must be a literal or the assigned variable");
    }
    if (st.op == "%=" && t.is_float()) diags_.error(st.loc, "'%=' needs integer operands");
    if (!vt.is_scalar()) {
      diags_.error(st.value->loc, "expected a scalar value");
      return;
    }
    coerce(st.value, t);
  }

  // Types `e` in place; `quantum_ok` allows a top-level @ or #.
  Type expr(std::unique_ptr<Expr>& e, bool quantum_ok) {
    Type t = type_of(e, quantum_ok);
    e->type = t;
    return t;
  }

  Type type_of(std::unique_ptr<Expr>& e, bool quantum_ok) {
    const Type kInt{BaseType::kInt};
    switch (e->kind) {
      case Expr::Kind::kInt:
        return kInt;
      case Expr::Kind::kFloat:
        return {BaseType::kFloat};
      case Expr::Kind::kVar: {
        e->sym = lookup(e->name);
        if (!e->sym) {
          diags_.error(e->loc, "unknown identifier '" + e->name + "'");
          return kInt;
        }
        return e->sym->type;
      }
      case Expr::Kind::kIndex: {
        e->sym = lookup(e->name);
        Type it = expr(e->kids[0], false);
        if (!is_integral(it)) diags_.error(e->kids[0]->loc, "array index must be int");
        if (!e->sym) {
          diags_.error(e->loc, "unknown identifier '" + e->name + "'");
          return kInt;
        }
        if (!e->sym->type.is_array) {
          diags_.error(e->loc, "'" + e->name + "' is not an array");
          return kInt;
        }
        return e->sym->type.element();
      }
      case Expr::Kind::kCall:
        return call(*e, false);
      case Expr::Kind::kCast:
        return e->type;
      case Expr::Kind::kUnary: {
        Type t = scalar_operand(e->kids[0]);
        if (e->op == "!") return kInt;
        if (e->op == "~" && t.is_float()) diags_.error(e->loc, "'~' needs an integer operand");
        return t;
      }
      case Expr::Kind::kBinary:
        return binary(e, quantum_ok);
    }
    return kInt;
  }

  Type scalar_operand(std::unique_ptr<Expr>& e) {
    Type t = expr(e, false);
    if (!t.is_scalar()) {
      diags_.error(e->loc, "expected a scalar value");
      return {BaseType::kInt};
    }
    return t;
  }

  Type binary(std::unique_ptr<Expr>& e, bool quantum_ok) {
    const std::string& op = e->op;
    const Type kInt{BaseType::kInt};
    if (op == "@" || op == "#") {
      if (!quantum_ok)
        diags_.error(e->loc, "'" + op + "' is only allowed as the whole right-hand side of an initializer or assignment");
      Type t = scalar_operand(e->kids[0]);
      if (!is_integral(scalar_operand(e->kids[1]))) diags_.error(e->kids[1]->loc, "qubit count must be an integer");
      if (t.is_float()) diags_.error(e->loc, "'" + op + "' needs an integer operand");
      return t;
    }
    Type a = scalar_operand(e->kids[0]);
    Type b = scalar_operand(e->kids[1]);
    if (op == "&&" || op == "||") {
      if (a.is_float() || b.is_float()) diags_.error(e->loc, "'" + op + "' needs integer operands");
      return kInt;
    }
    if (op == "<<" || op == ">>") {
      if (a.is_float() || b.is_float()) diags_.error(e->loc, "'" + op + "' needs integer operands");
      return a;
    }
    if ((op == "&" || op == "|" || op == "^" || op == "%") && (a.is_float() || b.is_float())) {
      diags_.error(e->loc, "'" + op + "' needs integer operands");
      return kInt;
    }
    Type common = a.is_float() || b.is_float()          ? Type{BaseType::kFloat}
                  : a.base == BaseType::kUnsigned || b.base == BaseType::kUnsigned ? Type{BaseType::kUnsigned}
                                                                                   : kInt;
    coerce(e->kids[0], common);
    coerce(e->kids[1], common);
    if (op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=") return kInt;
    return common;
  }

  Type call(Expr& e, bool as_statement) {
    if (e.name == "rzk") {
      diags_.error(e.loc, "rzk is a statement, not an expression");
      return {BaseType::kInt};
    }
    auto it = funcs_.find(e.name);
    if (it == funcs_.end()) {
      diags_.error(e.loc, "unknown function '" + e.name + "'");
      for (auto& a : e.kids) expr(a, false);
      return {BaseType::kInt};
    }
    Function* f = it->second;
    e.callee = f;
    if (e.kids.size() != f->params.size()) {
      diags_.error(e.loc, "'" + f->name + "' expects " + std::to_string(f->params.size()) + " arguments, got " +
                              std::to_string(e.kids.size()));
      return f->ret;
    }
    for (std::size_t i = 0; i < e.kids.size(); ++i) {
      Type pt = f->params[i]->type;
      Type at = expr(e.kids[i], false);
      if (pt.is_array) {
        if (e.kids[i]->kind != Expr::Kind::kVar || !at.is_array || at.base != pt.base)
          diags_.error(e.kids[i]->loc, "argument " + std::to_string(i + 1) + " of '" + f->name + "' must be an " +
                                           to_string(pt.element()) + " array");
      } else if (!at.is_scalar()) {
        diags_.error(e.kids[i]->loc, "argument " + std::to_string(i + 1) + " of '" + f->name + "' must be a scalar");
      } else {
        coerce(e.kids[i], pt);
      }
    }
    if (!as_statement && f->ret.base == BaseType::kVoid)
      diags_.error(e.loc, "void function '" + f->name + "' used as a value");
    return f->ret;
  }

  // Inserts a conversion to `to`; literals are converted in place.
  void coerce(std::unique_ptr<Expr>& e, const Type& to) {
    const Type& from = e->type;
    if (!from.is_scalar() || !to.is_scalar() || from == to) return;
    if (from.is_float() == to.is_float()) {
      e->type = to;  // int <-> unsigned share the bit pattern
      return;
    }
    if (e->kind == Expr::Kind::kInt && to.is_float()) {
      auto v = static_cast<SWord>(e->value);
      if (v >= 32768 || v < -32768) diags_.error(e->loc, "literal out of float range");
      e->kind = Expr::Kind::kFloat;
      e->value = detail::fixed_from_int(e->value);
      e->type = to;
      return;
    }
    if (e->kind == Expr::Kind::kFloat && !to.is_float()) {
      e->kind = Expr::Kind::kInt;
      e->value = detail::int_from_fixed(e->value);
      e->type = to;
      return;
    }
    auto cast = std::make_unique<Expr>();
    cast->kind = Expr::Kind::kCast;
    cast->loc = e->loc;
    cast->type = to;
    cast->kids.push_back(std::move(e));
    e = std::move(cast);
  }

  TypedAst& ast_;
  Diagnostics& diags_;
  std::vector<std::map<std::string, Symbol*>> scopes_;
  std::map<std::string, Function*> funcs_;
  Function* fn_ = nullptr;
};

void walk_exprs(const Expr& e, const std::function<void(const Expr&)>& fn) {
  fn(e);
  for (auto& k : e.kids) walk_exprs(*k, fn);
}

void walk_stmts(const Stmt& s, const std::function<void(const Stmt&)>& fn) {
  fn(s);
  for (auto& b : s.body)
    if (b) walk_stmts(*b, fn);
  for (auto& c : s.stmts) walk_stmts(*c, fn);
}

bool calls_function(const Stmt& s, std::string_view name) {
  bool found = false;
  auto visit = [&](const Expr& e) {
    if (e.kind == Expr::Kind::kCall && e.name == name) found = true;
  };
  walk_stmts(s, [&](const Stmt& st) {
    for (const Expr* e : {st.target.get(), st.value.get(), st.cond.get()})
      if (e) walk_exprs(*e, visit);
    for (auto& a : st.args) walk_exprs(*a, visit);
  });
  return found;
}

// Checks the constant operands of quantum operations once whole-program
// write information is available.
void check_quantum_constants(const TypedAst& ast, Diagnostics& diags) {
  Analysis an(ast);
  auto count = [&](const Expr& e, const char* what, std::int64_t lo, std::int64_t hi) {
    auto v = an.const_value(e);
    if (!v) {
      diags.error(e.loc, std::string(what) + " must be a compile-time constant");
    } else if (*v < lo || *v > hi) {
      diags.error(e.loc, std::string(what) + " must be in " + std::to_string(lo) + ".." + std::to_string(hi));
    }
  };
  auto quantum_value = [&](const Expr* e) {
    if (e && e->kind == Expr::Kind::kBinary && (e->op == "@" || e->op == "#"))
      count(*e->kids[1], "qubit count", 0, 32);
  };
  auto visit = [&](const Stmt& st) {
    if (st.kind == Stmt::Kind::kAssign && (st.op == "@=" || st.op == "#=")) count(*st.value, "qubit count", 0, 32);
    if (st.kind == Stmt::Kind::kAssign || st.kind == Stmt::Kind::kDecl) quantum_value(st.value.get());
    if (st.kind == Stmt::Kind::kRzk) {
      count(*st.args[0], "rzk bit index", 0, 31);
      auto k = an.const_value(*st.args[1]);
      if (!k || *k == 0 || *k < -32 || *k > 32)
        diags.error(st.args[1]->loc, "rzk order must be a nonzero constant in -32..32");
    }
  };
  for (auto& g : ast.globals) visit(*g);
  for (auto& f : ast.functions) walk_stmts(*f->body, visit);
}

ParseResult parse_with_stdlib(std::string_view source, std::string_view file_name, bool stdlib) {
  ParseResult r;
  auto ast = std::make_unique<TypedAst>();
  try {
    Parser(Lexer(source, std::string(file_name), r.diagnostics).run(), *ast, r.diagnostics).program();
  } catch (const SyntaxError&) {
    return r;
  }
  if (r.diagnostics.has_errors()) return r;
  if (stdlib && !ast->find_function("sqrt")) {
    bool needed = false;
    for (auto& f : ast->functions) needed = needed || calls_function(*f->body, "sqrt");
    if (needed) {
      auto lib = std::make_unique<TypedAst>();
      Diagnostics lib_diags;
      Parser(Lexer(detail::stdlib_source(), "<stdlib>", lib_diags).run(), *lib, lib_diags).program();
      for (auto& s : lib->symbols) {
        s->id = static_cast<int>(ast->symbols.size());
        ast->symbols.push_back(std::move(s));
      }
      for (auto& f : lib->functions) {
        f->from_stdlib = true;
        ast->functions.push_back(std::move(f));
      }
    }
  }
  Checker checker(*ast, r.diagnostics);
  checker.ast_file_ = std::string(file_name);
  checker.run();
  if (r.diagnostics.has_errors()) return r;
  check_quantum_constants(*ast, r.diagnostics);
  if (r.diagnostics.has_errors()) return r;
  r.ast = std::move(ast);
  return r;
}

}  // namespace

std::string to_string(const Type& t) {
  std::string s = t.base == BaseType::kInt        ? "int"
                  : t.base == BaseType::kUnsigned ? "unsigned int"
                  : t.base == BaseType::kFloat    ? "float"
                                                  : "void";
  if (t.is_array) s += t.length ? "[" + std::to_string(t.length) + "]" : "[]";
  return s;
}

const Function* TypedAst::find_function(std::string_view name) const {
  for (auto& f : functions)
    if (f->name == name) return f.get();
  return nullptr;
}

ParseResult parse(std::string_view source, std::string_view file_name) {
  return parse_with_stdlib(source, file_name, true);
}

Word to_fixed(double v) {
  return static_cast<Word>(static_cast<std::int64_t>(std::llround(v * 65536.0)));
}

double from_fixed(Word w) { return static_cast<SWord>(w) / 65536.0; }

}  // namespace onda
