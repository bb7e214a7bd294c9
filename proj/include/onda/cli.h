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

// The `onda` command line: build, asm, disasm, run and check. Each command
// is a function so tests can drive it without spawning a process.

#ifndef ONDA_CLI_H_
#define ONDA_CLI_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "onda/assembler.h"

namespace onda::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDiagnostics = 1;
inline constexpr int kExitRuntime = 2;

struct BuildOptions {
  std::string input;
  std::string output;
  std::optional<std::string> emit_asm;
};

struct AsmOptions {
  std::string input;
  std::string output;
};

struct DisasmOptions {
  std::string input;
  std::optional<std::string> output;  // standard output when empty
};

struct RunOptions {
  std::string input;
  enum class Mode { kExact, kSample } mode = Mode::kExact;
  std::uint64_t shots = 1024;
  std::uint64_t seed = 0;
  std::uint64_t max_cycles = 10'000'000;
  double prune_eps = 1e-12;
  std::optional<std::string> trace;
  std::size_t top_k = 8;
  std::optional<std::string> stats;
};

struct CheckOptions {
  std::string input;
  std::uint64_t reversibility = 200;
  // Shorten the forward window so it ends before the first measurement.
  bool stop_before_meas = false;
  std::uint64_t max_cycles = 10'000'000;
  // Test hook: scale one amplitude by (1 + drift) at this sweep cycle.
  std::optional<std::uint64_t> drift_cycle;
  double drift = 0.0;
};

int cmd_build(const BuildOptions& o, std::ostream& out, std::ostream& err);
int cmd_asm(const AsmOptions& o, std::ostream& out, std::ostream& err);
int cmd_disasm(const DisasmOptions& o, std::ostream& out, std::ostream& err);
int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err);
int cmd_check(const CheckOptions& o, std::ostream& out, std::ostream& err);

// Parses argv (argv[0] is the program name) and dispatches.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace onda::cli

#endif  // ONDA_CLI_H_
