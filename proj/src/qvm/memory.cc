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

#include "onda/qvm.h"

namespace onda {
namespace {

// splitmix64 finalizer.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Contribution of one word to the additive memory hash; zero words
// contribute nothing so untouched memory hashes to 0.
std::uint64_t term(Word addr, Word value) {
  return value == 0 ? 0 : mix((static_cast<std::uint64_t>(addr) << 32) | value);
}

const std::shared_ptr<const std::vector<std::pair<Word, Word>>>& empty_diff() {
  static const auto diff = std::make_shared<const std::vector<std::pair<Word, Word>>>();
  return diff;
}

}  // namespace

Memory::Memory(Word size, std::span<const Word> init) : diff_(empty_diff()), size_(size) {
  auto image = std::make_shared<std::vector<Word>>(init.begin(), init.begin() + std::min<std::size_t>(init.size(), size));
  for (Word a = 0; a < image->size(); ++a) hash_ += term(a, (*image)[a]);
  base_ = std::move(image);
}

Word Memory::load(Word addr) const {
  auto it = std::lower_bound(diff_->begin(), diff_->end(), addr,
                             [](const Entry& e, Word a) { return e.first < a; });
  return it != diff_->end() && it->first == addr ? it->second : base(addr);
}

void Memory::store(Word addr, Word value) {
  Word old = load(addr);
  if (old == value) return;
  hash_ += term(addr, value) - term(addr, old);
  auto diff = diff_.use_count() == 1 ? std::const_pointer_cast<Diff>(diff_) : std::make_shared<Diff>(*diff_);
  auto it = std::lower_bound(diff->begin(), diff->end(), addr,
                             [](const Entry& e, Word a) { return e.first < a; });
  if (value == base(addr)) {
    diff->erase(it);
  } else if (it != diff->end() && it->first == addr) {
    it->second = value;
  } else {
    diff->insert(it, {addr, value});
  }
  diff_ = std::move(diff);
}

bool Memory::zero_from(Word from) const {
  for (Word a = from; a < base_->size(); ++a)
    if ((*base_)[a] != 0 && load(a) != 0) return false;
  for (const Entry& e : *diff_)
    if (e.first >= from && e.second != 0) return false;
  return true;
}

std::vector<Word> Memory::to_vector() const {
  std::vector<Word> out(size_);
  std::copy(base_->begin(), base_->end(), out.begin());
  for (const Entry& e : *diff_) out[e.first] = e.second;
  return out;
}

bool operator==(const Memory& a, const Memory& b) { return a.hash_ == b.hash_ && (a <=> b) == 0; }

std::strong_ordering operator<=>(const Memory& a, const Memory& b) {
  if (auto c = a.size_ <=> b.size_; c != 0) return c;
  if (a.base_ == b.base_ && a.diff_ == b.diff_) return std::strong_ordering::equal;
  if (a.base_ != b.base_ && *a.base_ != *b.base_) {
    for (Word i = 0; i < a.size_; ++i)
      if (auto c = a.load(i) <=> b.load(i); c != 0) return c;
    return std::strong_ordering::equal;
  }
  // Same image: only addresses in either diff can differ; visit them in order.
  const auto& da = *a.diff_;
  const auto& db = *b.diff_;
  std::size_t i = 0, j = 0;
  while (i < da.size() || j < db.size()) {
    Word addr = j == db.size() || (i < da.size() && da[i].first < db[j].first) ? da[i].first : db[j].first;
    Word va = i < da.size() && da[i].first == addr ? da[i++].second : a.base(addr);
    Word vb = j < db.size() && db[j].first == addr ? db[j++].second : b.base(addr);
    if (auto c = va <=> vb; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

}  // namespace onda
