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

// Helpers for tests that compile ONDA source and inspect the machine.

#ifndef ONDA_TESTS_ONDA_UTIL_H_
#define ONDA_TESTS_ONDA_UTIL_H_

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "onda/compiler.h"
#include "onda/qvm.h"

namespace onda::testing {

inline std::string read_corpus(const std::string& name) {
  std::ifstream in(std::string(ONDA_CORPUS_DIR) + "/" + name);
  if (!in) throw std::runtime_error("missing corpus file " + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Compiles or throws with the diagnostics.
inline BuildResult compile_ok(const std::string& src) {
  BuildResult b = build(src, "test");
  if (!b.program) throw std::runtime_error("build failed:\n" + b.diagnostics.to_string());
  return b;
}

inline Word label(const BuildResult& b, const std::string& name) {
  auto it = b.assembled.symbols.find(name);
  if (it == b.assembled.symbols.end()) throw std::runtime_error("no label " + name);
  return static_cast<Word>(it->second);
}

// Register holding a variable ("func.var"), or throws if it lives in memory.
inline std::uint8_t home_reg(const BuildResult& b, const std::string& var) {
  const std::string& h = b.compiled.homes.at(var);
  auto r = register_alias(h);
  if (!r) throw std::runtime_error(var + " is not register-homed: " + h);
  return *r;
}

// Printed values of a run whose every event is a point mass.
inline std::vector<Word> point_prints(const Program& p, const RunLimits& lim = {}) {
  RunResult r = run(p, lim);
  std::vector<Word> out;
  for (const auto& ev : r.events) {
    if (ev.dist.size() != 1) throw std::runtime_error("print is not a point mass");
    out.push_back(ev.dist.begin()->first);
  }
  return out;
}

// Per-cycle configurations of a single-branch (classical) run, starting
// with the reset state; stops on halt or after `max` cycles.
inline std::vector<MachineConfig> classical_trace(const Program& p, std::size_t max = 100000) {
  Simulator sim(p);
  QState s = sim.init_state();
  std::vector<MachineConfig> out;
  for (std::size_t i = 0; i < max; ++i) {
    if (s.branches.size() != 1) throw std::runtime_error("trace left the classical regime");
    out.push_back(s.branches[0].config);
    if (!s.branches[0].config.active()) break;
    s = sim.step(s);
  }
  return out;
}

// Random classical ONDA programs for differential testing. Loops are
// bounded by dedicated counters that the body never writes.
class ProgramGen {
 public:
  explicit ProgramGen(std::uint64_t seed) : rng_(seed) {}

  std::string program() {
    std::ostringstream o;
    vars_.clear();
    loop_depth_ = 0;
    next_ = 0;
    bool helper = pick(2) == 0;
    if (helper) {
      has_helper_ = false;
      o << "int helper(int x, int y) {\n";
      vars_ = {"x", "y"};
      int n = 1 + pick(3);
      for (int i = 0; i < n; ++i) o << stmt(1);
      o << "  return " << expr(2) << ";\n}\n";
      vars_.clear();
    }
    has_helper_ = helper;
    o << "int main() {\n";
    int nv = 2 + pick(3);
    for (int i = 0; i < nv; ++i) {
      std::string v = "v" + std::to_string(i);
      o << "  int " << v << " = " << literal() << ";\n";
      vars_.push_back(v);
    }
    int n = 3 + pick(5);
    for (int i = 0; i < n; ++i) o << stmt(1);
    for (const auto& v : vars_) o << "  print " << v << ";\n";
    o << "}\n";
    return o.str();
  }

 private:
  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }

  std::string literal() { return std::to_string(pick(4) == 0 ? pick(100000) : pick(20)); }

  std::string var() { return vars_[pick(static_cast<int>(vars_.size()))]; }

  std::string expr(int depth) {
    int k = depth <= 0 ? pick(2) : pick(7);
    if (k == 0) return literal();
    if (k == 1) return var();
    if (k == 2) return "(" + std::string(pick(2) ? "-" : "~") + var() + ")";
    if (k == 3 && has_helper_ && pick(3) == 0) return "helper(" + var() + ", " + expr(0) + ")";
    static const char* kOps[] = {"+", "-", "*", "/", "%", "&", "|", "^", "<<", ">>",
                                 "==", "!=", "<", "<=", ">", ">="};
    std::string op = kOps[pick(16)];
    std::string rhs = op == "<<" || op == ">>" ? std::to_string(pick(8)) : expr(depth - 1);
    return "(" + expr(depth - 1) + " " + op + " " + rhs + ")";
  }

  std::string indent(int level) { return std::string(2 * level, ' '); }

  std::string stmt(int level) {
    std::string in = indent(level);
    int k = pick(10);
    if (k <= 3) {
      static const char* kOps[] = {"=", "+=", "-=", "*=", "/=", "%="};
      return in + var() + " " + kOps[pick(6)] + " " + expr(2) + ";\n";
    }
    if (k <= 5 && level < 4) {
      std::string s = in + "if (" + expr(2) + ") {\n" + stmt(level + 1) + in + "}";
      if (pick(2)) s += " else {\n" + stmt(level + 1) + in + "}";
      return s + "\n";
    }
    if (k <= 7 && loop_depth_ < 2 && level < 4) {
      std::string c = "k" + std::to_string(next_++);
      ++loop_depth_;
      std::string s = in + "int " + c + " = 0;\n" + in + "do {\n";
      int n = 1 + pick(2);
      for (int i = 0; i < n; ++i) s += stmt(level + 1);
      s += indent(level + 1) + c + " += 1;\n" + in + "} while (" + c + " < " + std::to_string(1 + pick(4)) + ");\n";
      --loop_depth_;
      return s;
    }
    if (k == 8) return in + "print " + expr(2) + ";\n";
    return in + var() + " += " + expr(1) + ";\n";
  }

  std::mt19937_64 rng_;
  std::vector<std::string> vars_;
  int loop_depth_ = 0;
  int next_ = 0;
  bool has_helper_ = false;
};

}  // namespace onda::testing

#endif  // ONDA_TESTS_ONDA_UTIL_H_
