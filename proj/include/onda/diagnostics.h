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

#ifndef ONDA_DIAGNOSTICS_H_
#define ONDA_DIAGNOSTICS_H_

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

namespace onda {

struct SourceLoc {
  std::string file;
  int line = 0;
  int column = 0;
};

enum class Severity { kWarning, kError };

struct Diagnostic {
  Severity severity = Severity::kError;
  SourceLoc loc;
  std::string message;
};

class Diagnostics {
 public:
  void error(SourceLoc loc, std::string msg) {
    items_.push_back({Severity::kError, std::move(loc), std::move(msg)});
  }
  void warning(SourceLoc loc, std::string msg) {
    items_.push_back({Severity::kWarning, std::move(loc), std::move(msg)});
  }
  void append(const Diagnostics& other) {
    items_.insert(items_.end(), other.items_.begin(), other.items_.end());
  }

  bool has_errors() const {
    return std::any_of(items_.begin(), items_.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::kError; });
  }
  const std::vector<Diagnostic>& items() const { return items_; }
  bool empty() const { return items_.empty(); }

  // "file:line:col: error: message", one per line.
  std::string to_string() const {
    std::string out;
    for (const auto& d : items_) {
      out += d.loc.file + ":" + std::to_string(d.loc.line) + ":" + std::to_string(d.loc.column) +
             (d.severity == Severity::kError ? ": error: " : ": warning: ") + d.message + "\n";
    }
    return out;
  }

 private:
  std::vector<Diagnostic> items_;
};

}  // namespace onda

#endif  // ONDA_DIAGNOSTICS_H_
