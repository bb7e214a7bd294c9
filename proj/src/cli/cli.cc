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

#include "onda/cli.h"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "onda/compiler.h"
#include "onda/qvm.h"

namespace onda::cli {
namespace {

// Failures that map directly to an exit code.
struct Exit {
  int code;
  std::string message;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{kExitDiagnostics, path + ": cannot open"};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Exit{kExitDiagnostics, path + ": cannot write"};
  out << text;
}

void write_image(const std::string& path, const Program& p) {
  auto bytes = emit_binary(p);
  write_text(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Program load_image(const std::string& path) {
  std::string raw = read_text(path);
  std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
  LoadResult r = load_binary(bytes);
  if (!r.program) {
    std::string msg = r.diagnostics.to_string();
    if (!msg.empty() && msg.back() == '\n') msg.pop_back();
    throw Exit{kExitDiagnostics, path + ": " + msg};
  }
  return *r.program;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Exit& e) {
    if (!e.message.empty()) err << e.message << "\n";
    return e.code;
  } catch (const RuntimeError& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

std::string format_prob(double p) {
  std::ostringstream os;
  os << std::setprecision(12) << p;
  return os.str();
}

const char* class_name(InstructionClass c) {
  switch (c) {
    case InstructionClass::kPermutation: return "permutation";
    case InstructionClass::kHadamard: return "hadamard";
    case InstructionClass::kPhase: return "phase";
    case InstructionClass::kMeasurement: return "measurement";
    case InstructionClass::kHalt: return "halt";
    case InstructionClass::kNop: return "nop";
  }
  return "?";
}

nlohmann::json stats_json(const RunStats& s) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [cls, n] : s.class_histogram) classes[class_name(cls)] = n;
  return {{"cycles", s.cycles},
          {"peak_branches", s.peak_branches},
          {"merges", s.merges},
          {"pruned_mass", s.pruned_mass},
          {"class_histogram", classes}};
}

nlohmann::json events_json(const std::vector<MeasurementEvent>& events) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& ev : events) {
    nlohmann::json dist = nlohmann::json::object();
    for (const auto& [v, p] : ev.dist) dist[std::to_string(v)] = p;
    out.push_back({{"pc", ev.pc}, {"register", std::string(register_name(ev.reg))}, {"distribution", dist}});
  }
  return out;
}

void print_events(std::ostream& out, const std::vector<MeasurementEvent>& events, bool counts) {
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& ev = events[k];
    out << "event " << k << " pc " << ev.pc << " " << register_name(ev.reg) << "\n";
    for (const auto& [v, p] : ev.dist) {
      out << "  " << v << " " << (counts ? std::to_string(static_cast<std::uint64_t>(p)) : format_prob(p))
          << "\n";
    }
  }
}

// Configurations must match exactly; branches whose amplitude is below
// `tol` on both sides are floating-point residue of cancelled interference.
bool same_configs(const QState& a, const QState& b, double tol) {
  auto significant = [tol](const QState& s) {
    std::vector<const Branch*> out;
    for (const Branch& br : s.branches)
      if (std::abs(br.amp) > tol) out.push_back(&br);
    return out;
  };
  auto sa = significant(a);
  auto sb = significant(b);
  if (sa.size() != sb.size()) return false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (!(sa[i]->config == sb[i]->config)) return false;
    if (std::abs(sa[i]->amp - sb[i]->amp) > tol) return false;
  }
  return true;
}

bool at_measurement(const Program& p, const QState& s) {
  for (const Branch& b : s.branches)
    if (b.config.active() && p.instructions[b.config.pc].opcode == Opcode::kMeas) return true;
  return false;
}

bool all_active(const QState& s) {
  for (const Branch& b : s.branches)
    if (!b.config.active()) return false;
  return true;
}

}  // namespace

int cmd_build(const BuildOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    BuildResult b = build(read_text(o.input), o.input);
    err << b.diagnostics.to_string();
    if (!b.program) return kExitDiagnostics;
    if (o.emit_asm) write_text(*o.emit_asm, *b.compiled.assembly);
    write_image(o.output, *b.program);
    out << o.output << ": " << b.program->instructions.size() << " instructions, " << b.program->data.size()
        << " data words\n";
    return kExitOk;
  });
}

int cmd_asm(const AsmOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    AssemblyResult a = assemble(read_text(o.input), o.input);
    err << a.diagnostics.to_string();
    if (!a.program) return kExitDiagnostics;
    write_image(o.output, *a.program);
    out << o.output << ": " << a.program->instructions.size() << " instructions\n";
    return kExitOk;
  });
}

int cmd_disasm(const DisasmOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string text = disassemble(load_image(o.input), true);
    if (o.output) {
      write_text(*o.output, text);
    } else {
      out << text;
    }
    return kExitOk;
  });
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.prune_eps < 0.0 || o.prune_eps > 1e-6) throw Exit{kExitDiagnostics, "--prune-eps must lie in [0, 1e-6]"};
    if (o.mode == RunOptions::Mode::kSample && o.shots < 1) throw Exit{kExitDiagnostics, "--shots must be at least 1"};
    Program p = load_image(o.input);
    RunLimits lim;
    lim.max_cycles = o.max_cycles;
    lim.prune_eps = o.prune_eps;
    lim.trace_top_k = o.top_k;
    std::ofstream trace;
    if (o.trace) {
      trace.open(*o.trace);
      if (!trace) throw Exit{kExitDiagnostics, *o.trace + ": cannot write"};
      lim.trace = &trace;
    }
    nlohmann::json report;
    int code = kExitOk;
    if (o.mode == RunOptions::Mode::kExact) {
      RunResult r = run(p, lim);
      print_events(out, r.events, false);
      out << "cycles " << r.stats.cycles << " peak_branches " << r.stats.peak_branches << " unhalted_mass "
          << format_prob(r.unhalted_mass) << " crashed_mass " << format_prob(r.crashed_mass) << "\n";
      report = {{"mode", "exact"},
                {"events", events_json(r.events)},
                {"unhalted_mass", r.unhalted_mass},
                {"crashed_mass", r.crashed_mass},
                {"stats", stats_json(r.stats)}};
      if (r.unhalted_mass > 0.0) {
        err << "runtime error: cycle limit reached with unhalted mass " << format_prob(r.unhalted_mass) << "\n";
        code = kExitRuntime;
      } else if (r.crashed_mass > 0.0) {
        err << "runtime error: crashed mass " << format_prob(r.crashed_mass) << "\n";
        code = kExitRuntime;
      }
    } else {
      SampleResult r = sample_run(p, o.shots, o.seed, lim);
      print_events(out, r.events, true);
      out << "shots " << r.shots << " unhalted_shots " << r.unhalted_shots << "\n";
      report = {{"mode", "sample"},
                {"shots", r.shots},
                {"seed", o.seed},
                {"events", events_json(r.events)},
                {"unhalted_shots", r.unhalted_shots},
                {"stats", stats_json(r.stats)}};
      if (r.unhalted_shots > 0) {
        err << "runtime error: cycle limit reached in " << r.unhalted_shots << " shots\n";
        code = kExitRuntime;
      }
    }
    if (o.stats) write_text(*o.stats, report.dump(2) + "\n");
    return code;
  });
}

int cmd_check(const CheckOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.reversibility < 1) throw Exit{kExitDiagnostics, "--reversibility must be at least 1"};
    Program p = load_image(o.input);
    Simulator sim(p, {0.0, true});
    bool ok = true;

    // Reversibility window: k forward cycles, k inverse cycles, compare.
    const QState start = sim.init_state();
    QState s = start;
    std::uint64_t k = 0;
    while (k < o.reversibility && all_active(s)) {
      if (o.stop_before_meas && at_measurement(p, s)) break;
      s = sim.step(s);
      ++k;
    }
    try {
      for (std::uint64_t i = 0; i < k; ++i) s = sim.step_inverse(s);
      if (same_configs(s, start, 1e-12)) {
        out << "reversibility: pass (" << k << " cycles)\n";
      } else {
        out << "reversibility: fail (state differs after " << k << " cycles)\n";
        ok = false;
      }
    } catch (const RuntimeError& e) {
      out << "reversibility: fail (" << e.what() << ")\n";
      ok = false;
    }

    // Invariant sweep: norm, garbage zeros and $zero on every cycle up to
    // the first measurement, halt or the cycle limit.
    s = sim.init_state();
    std::uint64_t cycles = 0;
    try {
      while (all_active(s) && !at_measurement(p, s) && cycles < o.max_cycles) {
        double norm = s.norm_squared();
        s = sim.step(s);
        ++cycles;
        if (o.drift_cycle && *o.drift_cycle == cycles && !s.branches.empty()) s.branches[0].amp *= 1.0 + o.drift;
        sim.check_invariants(s, norm);
      }
      out << "invariants: pass (" << cycles << " cycles)\n";
    } catch (const RuntimeError& e) {
      out << "invariants: fail (" << e.what() << ")\n";
      ok = false;
    }
    return ok ? kExitOk : kExitRuntime;
  });
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ONDA toolchain: compile, assemble and simulate programs for the reversible quantum machine"};
  app.require_subcommand(1);

  BuildOptions build_o;
  auto* build_cmd = app.add_subcommand("build", "compile ONDA source to a binary image");
  build_cmd->add_option("input", build_o.input, "source file (.onda)")->required();
  build_cmd->add_option("-o,--output", build_o.output, "image file (.qo)")->required();
  build_cmd->add_option("--emit-asm", build_o.emit_asm, "also write the assembly listing (.qs)");

  AsmOptions asm_o;
  auto* asm_cmd = app.add_subcommand("asm", "assemble a listing to a binary image");
  asm_cmd->add_option("input", asm_o.input, "assembly file (.qs)")->required();
  asm_cmd->add_option("-o,--output", asm_o.output, "image file (.qo)")->required();

  DisasmOptions disasm_o;
  auto* disasm_cmd = app.add_subcommand("disasm", "print an image as assembly with addresses");
  disasm_cmd->add_option("input", disasm_o.input, "image file (.qo)")->required();
  disasm_cmd->add_option("-o,--output", disasm_o.output, "listing file");

  RunOptions run_o;
  std::string mode = "exact";
  auto* run_cmd = app.add_subcommand("run", "simulate an image");
  run_cmd->add_option("input", run_o.input, "image file (.qo)")->required();
  run_cmd->add_option("--mode", mode, "exact or sample")->check(CLI::IsMember({"exact", "sample"}));
  run_cmd->add_option("--shots", run_o.shots, "shots in sample mode")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", run_o.seed, "sampling seed");
  run_cmd->add_option("--max-cycles", run_o.max_cycles, "cycle limit per run");
  run_cmd->add_option("--prune-eps", run_o.prune_eps, "drop branches with |amplitude| below this")
      ->check(CLI::Range(0.0, 1e-6));
  run_cmd->add_option("--trace", run_o.trace, "write a per-cycle trace of the largest branches");
  run_cmd->add_option("--top-k", run_o.top_k, "branches per trace line");
  run_cmd->add_option("--stats", run_o.stats, "write a JSON report");

  CheckOptions check_o;
  auto* check_cmd = app.add_subcommand("check", "reversibility and invariant checks");
  check_cmd->add_option("input", check_o.input, "image file (.qo)")->required();
  check_cmd->add_option("--reversibility", check_o.reversibility, "forward/inverse window in cycles")
      ->check(CLI::PositiveNumber);
  check_cmd->add_flag("--stop-before-meas", check_o.stop_before_meas, "end the window before a measurement");
  check_cmd->add_option("--max-cycles", check_o.max_cycles, "cycle limit for the invariant sweep");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitDiagnostics;
  }
  if (*build_cmd) return cmd_build(build_o, out, err);
  if (*asm_cmd) return cmd_asm(asm_o, out, err);
  if (*disasm_cmd) return cmd_disasm(disasm_o, out, err);
  if (*run_cmd) {
    run_o.mode = mode == "sample" ? RunOptions::Mode::kSample : RunOptions::Mode::kExact;
    return cmd_run(run_o, out, err);
  }
  return cmd_check(check_o, out, err);
}

}  // namespace onda::cli
