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

#include "onda/assembler.h"

#include <cctype>
#include <charconv>
#include <limits>
#include <sstream>

namespace onda {
namespace {

constexpr std::int64_t kImmMin = std::numeric_limits<SWord>::min();
constexpr std::int64_t kImmMax = std::numeric_limits<Word>::max();

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// A piece of a source line with its 1-based column.
struct Piece {
  std::string_view text;
  int column = 1;
};

using Symbols = std::map<std::string, std::int64_t, std::less<>>;

// Recursive-descent evaluator for immediate expressions: integers, labels,
// unary +/-, binary +/-, parentheses.
class ExprEval {
 public:
  ExprEval(std::string_view text, const Symbols& syms) : s_(text), syms_(syms) {}

  // Returns the value or sets `error`.
  std::optional<std::int64_t> run(std::string& error) {
    auto v = expr(error);
    if (!v) return std::nullopt;
    skip_ws();
    if (pos_ != s_.size()) {
      error = "unexpected '" + std::string(s_.substr(pos_)) + "' in expression";
      return std::nullopt;
    }
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::optional<std::int64_t> expr(std::string& err) {
    auto lhs = unary(err);
    if (!lhs) return std::nullopt;
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size() || (s_[pos_] != '+' && s_[pos_] != '-')) return lhs;
      char op = s_[pos_++];
      auto rhs = unary(err);
      if (!rhs) return std::nullopt;
      lhs = op == '+' ? *lhs + *rhs : *lhs - *rhs;
      if (*lhs > (std::int64_t{1} << 40) || *lhs < -(std::int64_t{1} << 40)) {
        err = "immediate overflow";
        return std::nullopt;
      }
    }
  }

  std::optional<std::int64_t> unary(std::string& err) {
    skip_ws();
    if (pos_ >= s_.size()) {
      err = "missing operand in expression";
      return std::nullopt;
    }
    char c = s_[pos_];
    if (c == '-' || c == '+') {
      ++pos_;
      auto v = unary(err);
      if (!v) return std::nullopt;
      return c == '-' ? -*v : *v;
    }
    if (c == '(') {
      ++pos_;
      auto v = expr(err);
      if (!v) return std::nullopt;
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != ')') {
        err = "missing ')' in expression";
        return std::nullopt;
      }
      ++pos_;
      return v;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      int base = 10;
      if (c == '0' && pos_ + 1 < s_.size() && (s_[pos_ + 1] == 'x' || s_[pos_ + 1] == 'X')) {
        base = 16;
        pos_ += 2;
        start = pos_;
      }
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v, base);
      if (ec == std::errc::result_out_of_range || (ec == std::errc{} && v > (std::uint64_t{1} << 40))) {
        err = "immediate overflow";
        return std::nullopt;
      }
      if (ec != std::errc{} || p != s_.data() + pos_ || start == pos_) {
        err = "malformed number '" + std::string(s_.substr(start, pos_ - start)) + "'";
        return std::nullopt;
      }
      return static_cast<std::int64_t>(v);
    }
    if (is_ident_start(c)) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
      std::string_view name = s_.substr(start, pos_ - start);
      auto it = syms_.find(name);
      if (it == syms_.end()) {
        err = "unresolved label '" + std::string(name) + "'";
        return std::nullopt;
      }
      return it->second;
    }
    err = std::string("unexpected character '") + c + "' in expression";
    return std::nullopt;
  }

  std::string_view s_;
  const Symbols& syms_;
  std::size_t pos_ = 0;
};

// Splits an operand list on top-level commas.
std::vector<Piece> split_operands(std::string_view text, int column) {
  std::vector<Piece> out;
  if (trim(text).empty()) return out;
  int depth = 0;
  std::size_t start = 0;
  auto push = [&](std::size_t end) {
    std::string_view raw = text.substr(start, end - start);
    std::size_t lead = 0;
    while (lead < raw.size() && std::isspace(static_cast<unsigned char>(raw[lead]))) ++lead;
    out.push_back({trim(raw), column + static_cast<int>(start + lead)});
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '(') ++depth;
    if (text[i] == ')') --depth;
    if (text[i] == ',' && depth == 0) {
      push(i);
      start = i + 1;
    }
  }
  push(text.size());
  return out;
}

enum class Section { kText, kData };

struct Line {
  int number = 0;
  Section section = Section::kText;
  // Directive or mnemonic, and the operand pieces.
  Piece head;
  std::vector<Piece> operands;
  std::int64_t address = 0;  // instruction index or data address
};

class Assembler {
 public:
  Assembler(std::string_view src, std::string_view file) : src_(src), file_(file) {}

  AssemblyResult run() {
    pass1();
    if (!diags_.has_errors()) pass2();
    AssemblyResult res;
    res.diagnostics = diags_;
    res.symbols = symbols_;
    if (!diags_.has_errors()) res.program = std::move(prog_);
    return res;
  }

 private:
  SourceLoc loc(int line, int col) const { return {std::string(file_), line, col}; }

  std::optional<std::int64_t> eval(const Piece& p, int line) {
    std::string err;
    auto v = ExprEval(p.text, symbols_).run(err);
    if (!v) diags_.error(loc(line, p.column), err);
    return v;
  }

  void pass1() {
    Section section = Section::kText;
    std::int64_t text_addr = 0, data_addr = 0;
    int number = 0;
    std::size_t pos = 0;
    while (pos <= src_.size()) {
      std::size_t nl = src_.find('\n', pos);
      if (nl == std::string_view::npos) nl = src_.size();
      std::string_view raw = src_.substr(pos, nl - pos);
      pos = nl + 1;
      ++number;
      if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

      std::size_t i = 0;
      auto skip_ws = [&] {
        while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      };
      skip_ws();
      // Labels: one or more "name:" prefixes.
      for (;;) {
        std::size_t j = i;
        if (j < raw.size() && is_ident_start(raw[j]) && raw[j] != '.') {
          while (j < raw.size() && is_ident_char(raw[j])) ++j;
          std::size_t k = j;
          while (k < raw.size() && std::isspace(static_cast<unsigned char>(raw[k]))) ++k;
          if (k < raw.size() && raw[k] == ':') {
            std::string name(raw.substr(i, j - i));
            if (symbols_.contains(name)) {
              diags_.error(loc(number, static_cast<int>(i) + 1), "duplicate label '" + name + "'");
            } else {
              symbols_[name] = section == Section::kText ? text_addr : data_addr;
            }
            i = k + 1;
            skip_ws();
            continue;
          }
        }
        break;
      }
      if (i >= raw.size()) continue;

      std::size_t hs = i;
      while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      Line line;
      line.number = number;
      line.head = {raw.substr(hs, i - hs), static_cast<int>(hs) + 1};
      line.operands = split_operands(raw.substr(i), static_cast<int>(i) + 1);

      std::string_view head = line.head.text;
      if (head == ".text") {
        section = Section::kText;
        continue;
      }
      if (head == ".data") {
        section = Section::kData;
        continue;
      }
      line.section = section;
      if (head == ".word") {
        if (section != Section::kData) {
          diags_.error(loc(number, line.head.column), ".word outside .data section");
          continue;
        }
        line.address = data_addr;
        data_addr += static_cast<std::int64_t>(line.operands.size());
      } else if (head == ".zero") {
        if (section != Section::kData) {
          diags_.error(loc(number, line.head.column), ".zero outside .data section");
          continue;
        }
        if (line.operands.size() != 1) {
          diags_.error(loc(number, line.head.column), ".zero takes one count");
          continue;
        }
        auto n = eval(line.operands[0], number);
        if (!n) continue;
        if (*n < 0 || *n > (std::int64_t{1} << 28)) {
          diags_.error(loc(number, line.operands[0].column), ".zero count out of range");
          continue;
        }
        line.address = data_addr;
        data_addr += *n;
      } else if (head.starts_with('.')) {
        // .entry/.mem/.garbage/.stack are resolved in pass 2.
      } else {
        if (section != Section::kText) {
          diags_.error(loc(number, line.head.column), "instruction in .data section");
          continue;
        }
        line.address = text_addr++;
      }
      lines_.push_back(std::move(line));
    }
  }

  void pass2() {
    std::optional<std::int64_t> entry, mem, garbage, stack;
    for (const Line& line : lines_) {
      std::string_view head = line.head.text;
      if (head == ".word") {
        for (const Piece& p : line.operands) {
          auto v = eval(p, line.number);
          if (!v) continue;
          if (*v < kImmMin || *v > kImmMax) {
            diags_.error(loc(line.number, p.column), "immediate overflow: value does not fit 32 bits");
            continue;
          }
          prog_.data.push_back(static_cast<Word>(*v));
        }
      } else if (head == ".zero") {
        auto n = eval(line.operands[0], line.number);
        prog_.data.resize(prog_.data.size() + static_cast<std::size_t>(*n), 0);
      } else if (head == ".entry" || head == ".mem" || head == ".garbage" || head == ".stack") {
        if (line.operands.size() != 1) {
          diags_.error(loc(line.number, line.head.column), std::string(head) + " takes one operand");
          continue;
        }
        auto v = eval(line.operands[0], line.number);
        if (!v) continue;
        if (*v < 0 || *v > kImmMax) {
          diags_.error(loc(line.number, line.operands[0].column), std::string(head) + " value out of range");
          continue;
        }
        (head == ".entry" ? entry : head == ".mem" ? mem : head == ".garbage" ? garbage : stack) = *v;
      } else if (head.starts_with('.')) {
        diags_.error(loc(line.number, line.head.column), "unknown directive '" + std::string(head) + "'");
      } else {
        instruction(line);
      }
    }
    if (diags_.has_errors()) return;

    auto n_data = static_cast<Word>(prog_.data.size());
    prog_.entry = static_cast<Word>(entry.value_or(0));
    prog_.mem_words = static_cast<Word>(mem.value_or(std::max<std::int64_t>(kDefaultMemWords, 2 * n_data + 2)));
    prog_.stack_base = static_cast<Word>(stack.value_or(n_data));
    prog_.garbage_base = static_cast<Word>(
        garbage.value_or(prog_.stack_base + (prog_.mem_words - std::min(prog_.mem_words, prog_.stack_base)) / 2));
    if (auto err = check_program(prog_)) diags_.error(loc(0, 0), *err);
  }

  void instruction(const Line& line) {
    std::string_view mnemonic = line.head.text;
    bool pseudo_li = false;
    if (mnemonic == "li") {
      pseudo_li = true;
      mnemonic = "addi";
      diags_.warning(loc(line.number, line.head.column),
                     "li expands to addi and assumes the destination register is zero");
    }
    auto op = opcode_from_mnemonic(mnemonic);
    if (!op) {
      diags_.error(loc(line.number, line.head.column), "unknown mnemonic '" + std::string(mnemonic) + "'");
      return;
    }
    const OpcodeInfo& oi = info(*op);
    if (static_cast<int>(line.operands.size()) != oi.num_operands) {
      diags_.error(loc(line.number, line.head.column),
                   std::string(pseudo_li ? "li" : oi.mnemonic) + " expects " +
                       std::to_string(oi.num_operands) + " operand(s), got " +
                       std::to_string(line.operands.size()));
      return;
    }
    Instruction in;
    in.opcode = *op;
    bool ok = true;
    for (int k = 0; k < oi.num_operands; ++k) {
      const Piece& p = line.operands[k];
      Operand kind = oi.operands[k];
      if (kind == Operand::kRd || kind == Operand::kRa || kind == Operand::kRb || kind == Operand::kRc) {
        auto r = register_alias(p.text);
        if (!r) {
          diags_.error(loc(line.number, p.column),
                       p.text.starts_with('$') ? "unknown register '" + std::string(p.text) + "'"
                                               : "expected a register, got '" + std::string(p.text) + "'");
          ok = false;
          continue;
        }
        (kind == Operand::kRd ? in.rd : kind == Operand::kRa ? in.ra : kind == Operand::kRb ? in.rb : in.rc) = *r;
        continue;
      }
      auto v = eval(p, line.number);
      if (!v) {
        ok = false;
        continue;
      }
      if (kind == Operand::kPol) {
        if (*v != 0 && *v != 1) {
          diags_.error(loc(line.number, p.column), "polarity must be 0 or 1");
          ok = false;
        }
        in.pol = *v == 1;
      } else if (kind == Operand::kBit) {
        if (*v < 0 || *v > 31) {
          diags_.error(loc(line.number, p.column), "bit index must be in 0..31");
          ok = false;
        }
        in.ra = static_cast<std::uint8_t>(*v & 31);
      } else {
        if (*v < kImmMin || *v > kImmMax) {
          diags_.error(loc(line.number, p.column), "immediate overflow: value does not fit 32 bits");
          ok = false;
        }
        in.imm = static_cast<SWord>(static_cast<Word>(*v));
      }
    }
    if (!ok) return;
    if (auto err = validate(in)) {
      diags_.error(loc(line.number, line.head.column), *err);
      return;
    }
    prog_.instructions.push_back(in);
  }

  std::string_view src_;
  std::string_view file_;
  Diagnostics diags_;
  Symbols symbols_;
  std::vector<Line> lines_;
  Program prog_;
};

void put_u32(std::vector<std::uint8_t>& out, Word v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

constexpr std::string_view kMagic = "ONDQ1\n";

}  // namespace

std::optional<std::string> check_program(const Program& p) {
  auto n = p.instructions.size();
  if (n == 0 ? p.entry != 0 : p.entry >= n) return "entry point outside the instruction section";
  if (p.mem_words == 0) return "memory size must be positive";
  if (p.stack_base >= p.mem_words) return "stack base outside memory";
  if (p.garbage_base >= p.mem_words) return "garbage base outside memory";
  if (p.data.size() > p.stack_base) return "data segment overlaps the stack region";
  if (p.data.size() > p.garbage_base) return "data segment overlaps the garbage region";
  return std::nullopt;
}

AssemblyResult assemble(std::string_view source, std::string_view file_name) {
  return Assembler(source, file_name).run();
}

std::string disassemble(const Program& p, bool with_addresses) {
  std::ostringstream os;
  os << ".mem " << p.mem_words << "\n";
  os << ".stack " << p.stack_base << "\n";
  os << ".garbage " << p.garbage_base << "\n";
  os << ".entry " << p.entry << "\n";
  os << ".text\n";
  for (std::size_t i = 0; i < p.instructions.size(); ++i) {
    std::string line = "    " + to_string(p.instructions[i]);
    if (with_addresses) {
      if (line.size() < 40) line.resize(40, ' ');
      line += "# " + std::to_string(i);
    }
    os << line << "\n";
  }
  if (!p.data.empty()) {
    os << ".data\n";
    for (std::size_t i = 0; i < p.data.size(); i += 8) {
      os << "    .word ";
      for (std::size_t j = i; j < std::min(i + 8, p.data.size()); ++j)
        os << (j == i ? "" : ", ") << static_cast<SWord>(p.data[j]);
      os << "\n";
    }
  }
  return os.str();
}

std::vector<std::uint8_t> emit_binary(const Program& p) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.reserve(kImageHeaderBytes + 8 * p.instructions.size() + 4 * p.data.size());
  put_u32(out, kImageVersion);
  put_u32(out, p.entry);
  put_u32(out, static_cast<Word>(p.instructions.size()));
  put_u32(out, static_cast<Word>(p.data.size()));
  put_u32(out, p.mem_words);
  put_u32(out, p.garbage_base);
  put_u32(out, p.stack_base);
  for (const Instruction& in : p.instructions) put_u64(out, encode(in));
  for (Word w : p.data) put_u32(out, w);
  return out;
}

LoadResult load_binary(std::span<const std::uint8_t> bytes) {
  LoadResult res;
  SourceLoc where{"<image>", 0, 0};
  auto fail = [&](std::string msg) {
    res.diagnostics.error(where, std::move(msg));
    return res;
  };
  if (bytes.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
    return fail("not an ONDQ image");
  std::size_t pos = kMagic.size();
  auto u32 = [&](Word& v) {
    if (bytes.size() - pos < 4) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<Word>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return true;
  };
  Word version, entry, n_instr, n_data;
  Program p;
  if (!u32(version)) return fail("unexpected end of file");
  if (version != kImageVersion) return fail("unsupported ONDQ version " + std::to_string(version));
  if (!u32(entry) || !u32(n_instr) || !u32(n_data) || !u32(p.mem_words) || !u32(p.garbage_base) ||
      !u32(p.stack_base))
    return fail("unexpected end of file");
  p.entry = entry;
  if ((bytes.size() - pos) / 8 < n_instr) return fail("unexpected end of file");
  p.instructions.reserve(n_instr);
  for (Word i = 0; i < n_instr; ++i) {
    std::uint64_t w = 0;
    for (int b = 0; b < 8; ++b) w |= static_cast<std::uint64_t>(bytes[pos + b]) << (8 * b);
    pos += 8;
    try {
      p.instructions.push_back(decode(w));
    } catch (const IsaError& e) {
      return fail("undecodable instruction word at index " + std::to_string(i) + ": " + e.what());
    }
  }
  if ((bytes.size() - pos) / 4 < n_data) return fail("unexpected end of file");
  p.data.resize(n_data);
  for (Word i = 0; i < n_data; ++i) u32(p.data[i]);
  if (pos != bytes.size()) return fail("trailing bytes after data section");
  if (auto err = check_program(p)) return fail(*err);
  res.program = std::move(p);
  return res;
}

}  // namespace onda
