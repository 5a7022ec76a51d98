// Copyright 2026 The mmplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmplan/error.hpp"

namespace mmplan {

// Bit 0 marks LLM (text) tokens, bits 1..60 the modality encoders in
// registration order, bits 61..63 are reserved control bits.
inline constexpr std::uint64_t kTextBit = 1;
inline constexpr int kMaxModalities = 60;
inline constexpr std::uint64_t kModalityBits = (std::uint64_t{1} << (kMaxModalities + 1)) - 1;
inline constexpr std::uint64_t kControlBits = ~kModalityBits;
inline constexpr const char* kTextModality = "text";

struct Segment {
  std::string modality;  // "text" or an encoder name
  std::size_t count = 0;
};

class BitfieldMask {
 public:
  BitfieldMask() = default;

  explicit BitfieldMask(std::vector<std::uint64_t> descriptors) : descriptors_(std::move(descriptors)) {
    for (std::size_t i = 0; i < descriptors_.size(); ++i) {
      const std::uint64_t d = descriptors_[i];
      const std::string where = "token " + std::to_string(i);
      if ((d & kControlBits) != 0) throw Error(Errc::invariant, where + ": reserved control bits must be zero");
      if ((d & kModalityBits) == 0) throw Error(Errc::invariant, where + ": no modality bit set");
      if ((d & kTextBit) == 0 && std::popcount(d) != 1) {
        throw Error(Errc::invariant, where + ": a non-text token must carry exactly one modality bit");
      }
    }
  }

  std::size_t size() const { return descriptors_.size(); }
  std::uint64_t operator[](std::size_t i) const { return descriptors_[i]; }
  const std::vector<std::uint64_t>& descriptors() const { return descriptors_; }
  bool is_text(std::size_t i) const { return (descriptors_[i] & kTextBit) != 0; }

 private:
  std::vector<std::uint64_t> descriptors_;
};

// Modalities receive bits in order of first appearance. Text tokens attend
// to every modality present in the sequence (subject to causality at
// materialization time).
inline BitfieldMask build_bitfield(std::span<const Segment> segments) {
  std::map<std::string, int> bits;
  int next_bit = 1;
  std::uint64_t text = kTextBit;
  for (const auto& seg : segments) {
    if (seg.count == 0) throw Error(Errc::precondition, "segment '" + seg.modality + "' has zero tokens");
    if (seg.modality == kTextModality || bits.count(seg.modality) != 0) continue;
    if (next_bit > kMaxModalities) {
      throw Error(Errc::precondition, "more than " + std::to_string(kMaxModalities) + " modalities in one sequence");
    }
    bits[seg.modality] = next_bit;
    text |= std::uint64_t{1} << next_bit;
    ++next_bit;
  }
  std::vector<std::uint64_t> out;
  for (const auto& seg : segments) {
    const std::uint64_t d = seg.modality == kTextModality ? text : std::uint64_t{1} << bits.at(seg.modality);
    out.insert(out.end(), seg.count, d);
  }
  return BitfieldMask(std::move(out));
}

// The single source of mask semantics. A text query attends causally to
// every key it shares a bit with; a modality query attends, without
// causality, to keys with an identical descriptor.
inline bool materialize(const BitfieldMask& mask, std::size_t q, std::size_t k) {
  const std::uint64_t dq = mask[q];
  const std::uint64_t dk = mask[k];
  if ((dq & kTextBit) != 0) return k <= q && (dq & dk) != 0;
  return dq == dk;
}

enum class BlockClass : std::uint8_t { skip, partial, full };

inline char to_char(BlockClass c) {
  switch (c) {
    case BlockClass::skip: return 'S';
    case BlockClass::partial: return 'P';
    case BlockClass::full: return 'F';
  }
  return '?';
}

struct BlockWorkload {
  std::size_t block_size = 0;
  std::size_t num_blocks = 0;
  std::vector<BlockClass> classes;        // row-major [query block][key block]
  std::vector<std::uint64_t> workloads;   // non-skip key blocks per query block

  BlockClass at(std::size_t qb, std::size_t kb) const { return classes[qb * num_blocks + kb]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto w : workloads) t += w;
    return t;
  }

  // One string per query block, e.g. "F3P1S4".
  std::vector<std::string> run_length_rows() const {
    std::vector<std::string> rows;
    for (std::size_t qb = 0; qb < num_blocks; ++qb) {
      std::string row;
      std::size_t kb = 0;
      while (kb < num_blocks) {
        const BlockClass c = at(qb, kb);
        std::size_t run = 0;
        while (kb < num_blocks && at(qb, kb) == c) {
          ++kb;
          ++run;
        }
        row += to_char(c);
        row += std::to_string(run);
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }
};

namespace detail {

struct DescriptorRun {
  std::size_t begin;
  std::size_t end;
  std::uint64_t descriptor;
};

inline std::vector<DescriptorRun> descriptor_runs(const BitfieldMask& mask) {
  std::vector<DescriptorRun> runs;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (runs.empty() || runs.back().descriptor != mask[i]) {
      runs.push_back({i, i + 1, mask[i]});
    } else {
      runs.back().end = i + 1;
    }
  }
  return runs;
}

}  // namespace detail

// Classifies every (query block, key block) pair by comparing descriptor
// runs instead of individual tokens; equal to per-element materialization.
inline BlockWorkload block_workloads(const BitfieldMask& mask, std::size_t block_size) {
  if (block_size == 0) throw Error(Errc::precondition, "block size must be >= 1");
  BlockWorkload out;
  out.block_size = block_size;
  out.num_blocks = (mask.size() + block_size - 1) / block_size;
  const std::size_t nb = out.num_blocks;
  out.classes.assign(nb * nb, BlockClass::skip);
  out.workloads.assign(nb, 0);

  const auto runs = detail::descriptor_runs(mask);
  // First run overlapping each block.
  std::vector<std::size_t> first_run(nb, 0);
  for (std::size_t b = 0, r = 0; b < nb; ++b) {
    while (runs[r].end <= b * block_size) ++r;
    first_run[b] = r;
  }

  for (std::size_t qb = 0; qb < nb; ++qb) {
    const std::size_t q0 = qb * block_size, q1 = std::min(mask.size(), q0 + block_size);
    for (std::size_t kb = 0; kb < nb; ++kb) {
      const std::size_t k0 = kb * block_size, k1 = std::min(mask.size(), k0 + block_size);
      bool any_allowed = false, any_denied = false;
      for (std::size_t qr = first_run[qb]; qr < runs.size() && runs[qr].begin < q1; ++qr) {
        const std::size_t qa = std::max(q0, runs[qr].begin), qz = std::min(q1, runs[qr].end);
        const std::uint64_t dq = runs[qr].descriptor;
        for (std::size_t kr = first_run[kb]; kr < runs.size() && runs[kr].begin < k1; ++kr) {
          const std::size_t ka = std::max(k0, runs[kr].begin), kz = std::min(k1, runs[kr].end);
          const std::uint64_t dk = runs[kr].descriptor;
          if ((dq & kTextBit) == 0) {
            (dq == dk ? any_allowed : any_denied) = true;
          } else if ((dq & dk) == 0 || ka > qz - 1) {
            any_denied = true;
          } else if (kz - 1 <= qa) {
            any_allowed = true;
          } else {
            any_allowed = any_denied = true;
          }
          if (any_allowed && any_denied) break;
        }
        if (any_allowed && any_denied) break;
      }
      const BlockClass c = any_allowed ? (any_denied ? BlockClass::partial : BlockClass::full) : BlockClass::skip;
      out.classes[qb * nb + kb] = c;
      if (c != BlockClass::skip) ++out.workloads[qb];
    }
  }
  return out;
}

}  // namespace mmplan
