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

#include "onda/qvm.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace onda {
namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Hadamard fan-out beyond this many children per branch is refused rather
// than exhausting memory.
constexpr int kMaxHadamardBits = 24;

Word low_mask(int bits) { return bits >= 32 ? ~Word{0} : (Word{1} << bits) - 1; }

Amplitude rotation(SWord k) {
  int mag = std::abs(k);
  double sign = k < 0 ? -1.0 : 1.0;
  if (mag == 1) return {-1.0, 0.0};
  if (mag == 2) return {0.0, sign};
  return std::polar(1.0, sign * 2.0 * std::numbers::pi / std::ldexp(1.0, mag));
}

// Phase factor applied by a Phase-class instruction to one configuration.
Amplitude phase_of(const Instruction& in, const MachineConfig& c) {
  Word v = c.regs[in.rd];
  if (in.opcode == Opcode::kZq) {
    return std::popcount(v & low_mask(in.imm)) % 2 ? Amplitude{-1.0, 0.0} : Amplitude{1.0, 0.0};
  }
  return (v >> in.ra) & 1 ? rotation(in.imm) : Amplitude{1.0, 0.0};
}

double hadamard_scale(int bits) {
  double s = std::ldexp(1.0, -(bits / 2));
  return bits % 2 ? s * std::numbers::sqrt2 / 2.0 : s;
}

template <typename Emit>
void fan_out(const Instruction& in, const Branch& b, Emit&& emit) {
  if (in.imm > kMaxHadamardBits) {
    throw RuntimeError("hadamard on " + std::to_string(in.imm) + " bits exceeds the simulator limit");
  }
  const Word mask = low_mask(in.imm);
  const Word old = b.config.regs[in.rd] & mask;
  const double scale = hadamard_scale(in.imm);
  for (Word v = 0;; ++v) {
    Branch c = b;
    c.config.regs[in.rd] = (c.config.regs[in.rd] & ~mask) | v;
    c.amp *= std::popcount(old & v) % 2 ? -scale : scale;
    emit(std::move(c));
    if (v == mask) break;
  }
}

}  // namespace

std::uint64_t MachineConfig::hash() const {
  std::uint64_t h = mix(static_cast<std::uint64_t>(pc)) ^ (halted ? 0x51 : 0) ^ (crashed ? 0xA2 : 0);
  for (Word r : regs) h = mix(h ^ r);
  return h ^ mem.hash();
}

bool operator==(const MachineConfig& a, const MachineConfig& b) {
  return a.pc == b.pc && a.regs == b.regs && a.halted == b.halted && a.crashed == b.crashed &&
         a.mem == b.mem;
}

std::strong_ordering operator<=>(const MachineConfig& a, const MachineConfig& b) {
  if (auto c = a.pc <=> b.pc; c != 0) return c;
  if (auto c = a.regs <=> b.regs; c != 0) return c;
  if (auto c = a.mem <=> b.mem; c != 0) return c;
  if (auto c = a.halted <=> b.halted; c != 0) return c;
  return a.crashed <=> b.crashed;
}

double QState::norm_squared() const {
  double n = 0.0;
  for (const Branch& b : branches) n += std::norm(b.amp);
  return n;
}

const Branch* QState::find(const MachineConfig& c) const {
  auto it = std::lower_bound(branches.begin(), branches.end(), c,
                             [](const Branch& b, const MachineConfig& k) { return b.config < k; });
  return it != branches.end() && it->config == c ? &*it : nullptr;
}

Simulator::Simulator(Program program, SimOptions options)
    : program_(std::move(program)), options_(options) {
  if (auto err = check_program(program_)) throw RuntimeError(*err);
}

QState Simulator::init_state() const {
  const Program& p = program_;
  if (p.data.size() > p.stack_base || p.data.size() > p.garbage_base) {
    throw RuntimeError("data segment overlaps the stack or garbage region");
  }
  Branch b;
  b.amp = 1.0;
  b.config.pc = p.entry;
  b.config.mem = Memory(p.mem_words, p.data);
  b.config.regs[reg::kUr] = 1;
  b.config.regs[reg::kGrp] = p.garbage_base;
  b.config.regs[reg::kSp] = p.stack_base;
  b.config.regs[reg::kFp] = p.stack_base;
  if (p.instructions.empty()) b.config.halted = true;
  QState s;
  s.branches.push_back(std::move(b));
  return s;
}

namespace {

// Sorts children canonically (stable, so equal configurations sum in
// generation order), merges equal configurations and prunes.
std::vector<Branch> merge_children(std::vector<Branch> children, double eps, std::uint64_t* merges,
                                   double* pruned) {
  std::stable_sort(children.begin(), children.end(),
                   [](const Branch& a, const Branch& b) { return a.config < b.config; });
  std::vector<Branch> out;
  out.reserve(children.size());
  for (Branch& c : children) {
    if (!out.empty() && out.back().config == c.config) {
      out.back().amp += c.amp;
      ++*merges;
    } else {
      out.push_back(std::move(c));
    }
  }
  std::size_t kept = 0;
  for (Branch& b : out) {
    if (std::abs(b.amp) < eps || b.amp == Amplitude{}) {
      *pruned += std::norm(b.amp);
      continue;
    }
    out[kept++] = std::move(b);
  }
  out.resize(kept);
  return out;
}

}  // namespace

QState Simulator::step(const QState& s, RunStats* stats) const {
  const auto n = static_cast<std::int64_t>(program_.instructions.size());
  std::vector<Branch> children;
  children.reserve(s.branches.size());
  bool branching = false;
  bool halting = false;

  auto advance = [&](Branch& c) {
    c.config.pc += static_cast<SWord>(c.config.regs[reg::kUr]);
    if (c.config.pc == n) {
      c.config.halted = true;
      halting = true;
    } else if (c.config.pc < 0 || c.config.pc > n) {
      c.config.crashed = true;
    }
  };

  for (const Branch& b : s.branches) {
    if (!b.config.active()) {
      children.push_back(b);
      continue;
    }
    const Instruction& in = program_.instructions[b.config.pc];
    const InstructionClass cls = classify(in);
    if (stats) ++stats->class_histogram[cls];
    switch (cls) {
      case InstructionClass::kHalt: {
        Branch c = b;
        c.config.halted = true;
        halting = true;
        children.push_back(std::move(c));
        break;
      }
      case InstructionClass::kHadamard:
        branching = true;
        fan_out(in, b, [&](Branch c) {
          advance(c);
          children.push_back(std::move(c));
        });
        break;
      case InstructionClass::kPhase: {
        Branch c = b;
        c.amp *= phase_of(in, c.config);
        advance(c);
        children.push_back(std::move(c));
        break;
      }
      case InstructionClass::kPermutation: {
        Branch c = b;
        exec_permutation(in, c.config);
        advance(c);
        children.push_back(std::move(c));
        break;
      }
      case InstructionClass::kNop:
      case InstructionClass::kMeasurement: {
        Branch c = b;
        advance(c);
        children.push_back(std::move(c));
        break;
      }
    }
  }

  std::uint64_t merges = 0;
  double pruned = 0.0;
  QState out;
  out.cycle = s.cycle + 1;
  out.branches = merge_children(std::move(children), options_.prune_eps, &merges, &pruned);
  // Without fan-out the cycle is a permutation of configurations; a merge
  // would mean two distinct configurations mapped to one.
  if (merges > 0 && !branching && !halting) {
    throw std::logic_error("configurations merged in a permutation-only cycle");
  }
  if (stats) {
    ++stats->cycles;
    stats->merges += merges;
    stats->pruned_mass += pruned;
    stats->peak_branches = std::max(stats->peak_branches, out.branches.size());
  }
  return out;
}

QState Simulator::step_inverse(const QState& s) const {
  const auto n = static_cast<std::int64_t>(program_.instructions.size());
  std::vector<Branch> children;
  children.reserve(s.branches.size());
  for (const Branch& b : s.branches) {
    Branch c = b;
    if (c.config.crashed) throw RuntimeError("cannot invert a crashed branch");
    if (c.config.halted) {
      c.config.halted = false;
      if (c.config.pc < n && program_.instructions[c.config.pc].opcode == Opcode::kHalt) {
        children.push_back(std::move(c));
        continue;
      }
    }
    const std::int64_t prev = c.config.pc - static_cast<SWord>(c.config.regs[reg::kUr]);
    if (prev < 0 || prev >= n) throw RuntimeError("inverse step leaves the instruction section");
    const Instruction& in = program_.instructions[prev];
    c.config.pc = prev;
    switch (classify(in)) {
      case InstructionClass::kMeasurement:
        throw RuntimeError("cannot invert across measurement");
      case InstructionClass::kHalt:
        throw RuntimeError("inverse step reaches a halt that cannot have advanced");
      case InstructionClass::kPermutation:
        exec_permutation(invert_instruction(in), c.config);
        children.push_back(std::move(c));
        break;
      case InstructionClass::kNop:
        children.push_back(std::move(c));
        break;
      case InstructionClass::kPhase:
        c.amp *= std::conj(phase_of(in, c.config));
        children.push_back(std::move(c));
        break;
      case InstructionClass::kHadamard:
        fan_out(in, c, [&](Branch d) { children.push_back(std::move(d)); });
        break;
    }
  }
  std::uint64_t merges = 0;
  double pruned = 0.0;
  QState out;
  out.cycle = s.cycle > 0 ? s.cycle - 1 : 0;
  out.branches = merge_children(std::move(children), options_.prune_eps, &merges, &pruned);
  return out;
}

void Simulator::check_invariants(const QState& s, double expected_norm) const {
  double norm = s.norm_squared();
  if (std::abs(norm - expected_norm) > 1e-9) {
    std::ostringstream os;
    os << std::setprecision(17) << "norm drift at cycle " << s.cycle << ": " << norm
       << " (expected " << expected_norm << ")";
    throw RuntimeError(os.str());
  }
  for (const Branch& b : s.branches) {
    if (b.config.regs[reg::kZero] != 0) throw RuntimeError("$zero holds a nonzero value");
    Word from = std::max(b.config.regs[reg::kGrp], program_.garbage_base);
    if (from < b.config.mem.size() && !b.config.mem.zero_from(from)) {
      throw RuntimeError("nonzero word above the garbage pointer at cycle " +
                         std::to_string(s.cycle));
    }
  }
}

std::size_t Simulator::prune(QState& s, RunStats* stats) const {
  std::size_t before = s.branches.size();
  std::erase_if(s.branches, [&](const Branch& b) {
    if (std::abs(b.amp) >= options_.prune_eps && b.amp != Amplitude{}) return false;
    if (stats) stats->pruned_mass += std::norm(b.amp);
    return true;
  });
  return before - s.branches.size();
}

std::vector<Outcome> measure_partition(const QState& s, std::uint8_t r) {
  std::map<Word, Outcome> groups;
  for (const Branch& b : s.branches) {
    Outcome& o = groups[b.config.regs[r]];
    o.value = b.config.regs[r];
    o.probability += std::norm(b.amp);
    o.state.branches.push_back(b);
  }
  std::vector<Outcome> out;
  for (auto& [value, o] : groups) {
    double scale = 1.0 / std::sqrt(o.probability);
    for (Branch& b : o.state.branches) b.amp *= scale;
    o.state.cycle = s.cycle;
    out.push_back(std::move(o));
  }
  return out;
}

namespace {

enum class Stop { kMeasurement, kFinished, kLimit };

void write_trace(std::ostream& os, const Program& p, const QState& s, std::size_t top_k) {
  std::vector<const Branch*> order;
  for (const Branch& b : s.branches) order.push_back(&b);
  std::size_t k = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [](const Branch* a, const Branch* b) { return std::norm(a->amp) > std::norm(b->amp); });
  for (std::size_t i = 0; i < k; ++i) {
    const MachineConfig& c = order[i]->config;
    os << "cycle " << s.cycle << " pc " << c.pc << " ";
    if (c.halted) {
      os << "[halted]";
    } else if (c.crashed) {
      os << "[crashed]";
    } else {
      os << "[" << to_string(p.instructions[c.pc]) << "]";
    }
    os << " $ur=" << static_cast<SWord>(c.regs[reg::kUr]) << " $tur=" << static_cast<SWord>(c.regs[reg::kTur]);
    for (int r = reg::kV0; r < kNumRegs; ++r) {
      if (r == reg::kGrp || r == reg::kSp || r == reg::kFp || c.regs[r] == 0) continue;
      os << " " << register_name(r) << "=" << static_cast<SWord>(c.regs[r]);
    }
    os << " amp=" << order[i]->amp.real() << (order[i]->amp.imag() < 0 ? "" : "+")
       << order[i]->amp.imag() << "i\n";
  }
}

// Steps `s` until every branch stops, an active branch sits on `meas`, or
// the cycle limit is hit.
Stop advance(const Simulator& sim, QState& s, const RunLimits& limits, RunStats& stats) {
  const Program& p = sim.program();
  for (;;) {
    const Branch* at_meas = nullptr;
    bool any_active = false;
    for (const Branch& b : s.branches) {
      if (!b.config.active()) continue;
      any_active = true;
      if (p.instructions[b.config.pc].opcode == Opcode::kMeas) at_meas = &b;
    }
    if (!any_active) return Stop::kFinished;
    if (at_meas) {
      for (const Branch& b : s.branches) {
        if (b.config.active() && b.config.pc != at_meas->config.pc) {
          throw RuntimeError("desynchronized measurement at cycle " + std::to_string(s.cycle) +
                             ": branches at pc " + std::to_string(at_meas->config.pc) + " and " +
                             std::to_string(b.config.pc));
        }
      }
      return Stop::kMeasurement;
    }
    if (s.cycle >= limits.max_cycles) return Stop::kLimit;
    double norm_before = limits.check_invariants ? s.norm_squared() : 0.0;
    double pruned_before = stats.pruned_mass;
    s = sim.step(s, &stats);
    if (limits.check_invariants) {
      sim.check_invariants(s, norm_before - (stats.pruned_mass - pruned_before));
    }
    if (limits.trace) write_trace(*limits.trace, p, s, limits.trace_top_k);
  }
}

// Mass of active and crashed branches in a stopped state.
std::pair<double, double> leftover_mass(const QState& s) {
  double active = 0.0, crashed = 0.0;
  for (const Branch& b : s.branches) {
    if (b.config.crashed) crashed += std::norm(b.amp);
    else if (!b.config.halted) active += std::norm(b.amp);
  }
  return {active, crashed};
}

std::uint8_t measured_register(const Program& p, const QState& s) {
  for (const Branch& b : s.branches) {
    if (b.config.active()) return p.instructions[b.config.pc].rd;
  }
  return 0;
}

std::int64_t measured_pc(const QState& s) {
  for (const Branch& b : s.branches) {
    if (b.config.active()) return b.config.pc;
  }
  return 0;
}

}  // namespace

RunResult run(const Program& p, const RunLimits& limits) {
  Simulator sim(p, {limits.prune_eps, limits.check_invariants});
  RunResult result;
  std::vector<double> event_mass;
  std::vector<EnsembleMember> pending;
  pending.push_back({{}, 1.0, sim.init_state()});
  result.stats.peak_branches = 1;

  while (!pending.empty()) {
    EnsembleMember m = std::move(pending.back());
    pending.pop_back();
    Stop stop = advance(sim, m.state, limits, result.stats);
    if (stop != Stop::kMeasurement) {
      auto [active, crashed] = leftover_mass(m.state);
      result.unhalted_mass += m.probability * active;
      result.crashed_mass += m.probability * crashed;
      result.ensemble.push_back(std::move(m));
      continue;
    }
    const std::size_t k = m.history.size();
    const std::uint8_t r = measured_register(p, m.state);
    if (result.events.size() <= k) {
      result.events.push_back({measured_pc(m.state), r, {}});
      event_mass.push_back(0.0);
    }
    event_mass[k] += m.probability;
    std::vector<Outcome> outcomes = measure_partition(m.state, r);
    // Pushed in reverse so members are explored in ascending outcome order.
    for (auto it = outcomes.rbegin(); it != outcomes.rend(); ++it) {
      result.events[k].dist[it->value] += m.probability * it->probability;
      EnsembleMember child{m.history, m.probability * it->probability,
                           sim.step(it->state, &result.stats)};
      child.history.push_back(it->value);
      pending.push_back(std::move(child));
    }
  }
  for (std::size_t k = 0; k < result.events.size(); ++k) {
    for (auto& [value, prob] : result.events[k].dist) prob /= event_mass[k];
  }
  std::sort(result.ensemble.begin(), result.ensemble.end(),
            [](const EnsembleMember& a, const EnsembleMember& b) { return a.history < b.history; });
  return result;
}

namespace {

struct SampleNode {
  QState state;
  Stop stop = Stop::kFinished;
  std::int64_t pc = 0;
  std::uint8_t reg = 0;
  bool expanded = false;
  bool unhalted = false;
  std::vector<std::pair<double, Word>> outcomes;
  std::vector<std::unique_ptr<SampleNode>> children;
};

std::unique_ptr<SampleNode> make_node(const Simulator& sim, QState s, const RunLimits& limits,
                                      RunStats& stats) {
  auto node = std::make_unique<SampleNode>();
  node->stop = advance(sim, s, limits, stats);
  if (node->stop == Stop::kMeasurement) {
    node->pc = measured_pc(s);
    node->reg = measured_register(sim.program(), s);
  } else {
    node->unhalted = leftover_mass(s).first > 0.0;
  }
  node->state = std::move(s);
  return node;
}

}  // namespace

SampleResult sample_run(const Program& p, std::uint64_t shots, std::uint64_t seed,
                        const RunLimits& limits) {
  if (shots == 0) throw RuntimeError("shots must be at least 1");
  Simulator sim(p, {limits.prune_eps, limits.check_invariants});
  SampleResult result;
  result.shots = shots;
  std::mt19937_64 rng(seed);
  auto root = make_node(sim, sim.init_state(), limits, result.stats);

  for (std::uint64_t shot = 0; shot < shots; ++shot) {
    SampleNode* node = root.get();
    for (std::size_t k = 0; node->stop == Stop::kMeasurement; ++k) {
      if (!node->expanded) {
        for (Outcome& o : measure_partition(node->state, node->reg)) {
          node->outcomes.emplace_back(o.probability, o.value);
          node->children.push_back(
              make_node(sim, sim.step(o.state, &result.stats), limits, result.stats));
        }
        node->state = QState{};
        node->expanded = true;
      }
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      std::size_t pick = node->outcomes.size() - 1;
      double acc = 0.0;
      for (std::size_t i = 0; i < node->outcomes.size(); ++i) {
        acc += node->outcomes[i].first;
        if (u < acc) {
          pick = i;
          break;
        }
      }
      if (result.events.size() <= k) result.events.push_back({node->pc, node->reg, {}});
      result.events[k].dist[node->outcomes[pick].second] += 1.0;
      node = node->children[pick].get();
    }
    if (node->unhalted) ++result.unhalted_shots;
  }
  return result;
}

}  // namespace onda
