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
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mmplan/error.hpp"

namespace mmplan {

using Workload = std::uint64_t;

struct BlockAssignment {
  std::vector<std::vector<std::size_t>> blocks;  // per GPU, in assignment order
  std::vector<Workload> loads;

  Workload makespan() const { return loads.empty() ? 0 : *std::max_element(loads.begin(), loads.end()); }

  Workload total() const { return std::accumulate(loads.begin(), loads.end(), Workload{0}); }

  // makespan / (total / G); 1.0 for an empty workload.
  double imbalance() const {
    const Workload sum = total();
    if (sum == 0) return 1.0;
    return static_cast<double>(makespan()) * static_cast<double>(loads.size()) / static_cast<double>(sum);
  }
};

inline BlockAssignment assignment_from_owner(std::span<const Workload> workloads, const std::vector<std::size_t>& owner,
                                             std::size_t gpus) {
  BlockAssignment a;
  a.blocks.resize(gpus);
  a.loads.assign(gpus, 0);
  for (std::size_t b = 0; b < owner.size(); ++b) {
    a.blocks[owner[b]].push_back(b);
    a.loads[owner[b]] += workloads[b];
  }
  return a;
}

// Longest-processing-time-first: heaviest block to the least-loaded GPU.
// Ties: lower block id first, then lower GPU id.
inline BlockAssignment lpt_distribute(std::span<const Workload> workloads, std::size_t gpus) {
  if (gpus == 0) throw Error(Errc::precondition, "GPU count must be >= 1");
  if (workloads.empty()) throw Error(Errc::precondition, "workload list is empty");

  std::vector<std::size_t> order(workloads.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return workloads[a] > workloads[b]; });

  using Slot = std::pair<Workload, std::size_t>;  // (load, gpu)
  std::priority_queue<Slot, std::vector<Slot>, std::greater<>> heap;
  for (std::size_t g = 0; g < gpus; ++g) heap.emplace(0, g);

  BlockAssignment a;
  a.blocks.resize(gpus);
  a.loads.assign(gpus, 0);
  for (std::size_t b : order) {
    auto [load, g] = heap.top();
    heap.pop();
    a.blocks[g].push_back(b);
    a.loads[g] = load + workloads[b];
    heap.emplace(a.loads[g], g);
  }
  return a;
}

// The causal-attention scheme: split the blocks into 2G contiguous chunks
// (padding with empty blocks) and give GPU i chunks i and 2G-1-i.
inline BlockAssignment zigzag_distribute(std::size_t num_blocks, std::size_t gpus, std::span<const Workload> workloads) {
  if (gpus == 0) throw Error(Errc::precondition, "GPU count must be >= 1");
  if (workloads.size() != num_blocks) throw Error(Errc::precondition, "workload count does not match block count");
  const std::size_t chunks = 2 * gpus;
  const std::size_t chunk = std::max<std::size_t>(1, (num_blocks + chunks - 1) / chunks);

  BlockAssignment a;
  a.blocks.resize(gpus);
  a.loads.assign(gpus, 0);
  for (std::size_t g = 0; g < gpus; ++g) {
    for (std::size_t c : {g, chunks - 1 - g}) {
      for (std::size_t b = c * chunk; b < std::min(num_blocks, (c + 1) * chunk); ++b) {
        a.blocks[g].push_back(b);
        a.loads[g] += workloads[b];
      }
    }
  }
  return a;
}

inline constexpr std::size_t kIlpMaxBlocks = 14;
inline constexpr std::size_t kIlpMaxGpus = 4;

// Exact minimum-makespan assignment by branch and bound. Returns the
// lexicographically smallest owner vector among optimal assignments.
inline BlockAssignment ilp_optimal(std::span<const Workload> workloads, std::size_t gpus) {
  if (gpus == 0) throw Error(Errc::precondition, "GPU count must be >= 1");
  if (workloads.size() > kIlpMaxBlocks || gpus > kIlpMaxGpus) {
    throw Error(Errc::budget, "exact assignment is limited to " + std::to_string(kIlpMaxBlocks) + " blocks and " +
                                  std::to_string(kIlpMaxGpus) + " GPUs (got " + std::to_string(workloads.size()) +
                                  " blocks, " + std::to_string(gpus) + " GPUs)");
  }
  const std::size_t n = workloads.size();
  const Workload sum = std::accumulate(workloads.begin(), workloads.end(), Workload{0});
  const Workload heaviest = n == 0 ? 0 : *std::max_element(workloads.begin(), workloads.end());
  const Workload lower = std::max<Workload>(heaviest, (sum + gpus - 1) / gpus);

  // Pass 1: optimal makespan, heaviest blocks first.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return workloads[a] > workloads[b]; });
  Workload best = n == 0 ? 0 : lpt_distribute(workloads, gpus).makespan();
  std::vector<Workload> load(gpus, 0);
  auto search = [&](auto&& self, std::size_t i, std::size_t used) -> void {
    if (best == lower) return;
    if (i == n) {
      best = std::min(best, *std::max_element(load.begin(), load.end()));
      return;
    }
    const Workload w = workloads[order[i]];
    for (std::size_t g = 0; g < std::min(gpus, used + 1); ++g) {
      if (load[g] + w >= best) continue;
      load[g] += w;
      self(self, i + 1, std::max(used, g + 1));
      load[g] -= w;
    }
  };
  search(search, 0, 0);

  // Pass 2: first feasible owner vector in index order under that bound.
  std::vector<std::size_t> owner(n, 0);
  std::fill(load.begin(), load.end(), 0);
  std::vector<Workload> suffix(n + 1, 0);
  for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + workloads[i];
  auto place = [&](auto&& self, std::size_t i, std::size_t used) -> bool {
    if (i == n) return true;
    Workload slack = 0;
    for (std::size_t g = 0; g < gpus; ++g) slack += best - load[g];
    if (slack < suffix[i]) return false;
    for (std::size_t g = 0; g < std::min(gpus, used + 1); ++g) {
      if (load[g] + workloads[i] > best) continue;
      load[g] += workloads[i];
      owner[i] = g;
      if (self(self, i + 1, std::max(used, g + 1))) return true;
      load[g] -= workloads[i];
    }
    return false;
  };
  if (!place(place, 0, 0)) throw Error(Errc::invariant, "branch and bound failed to rebuild its optimum");
  return assignment_from_owner(workloads, owner, gpus);
}

struct Subblock {
  std::size_t query_block = 0;  // index into the per-GPU workload list
  std::size_t index = 0;        // position within its query block
  Workload work = 0;
};

struct IntraCostModel {
  std::size_t compute_units = 1;
  Workload subblock_size = 1;  // key blocks per subblock
  double alpha = 0.25;         // per extra subblock of a split query block
  double beta = 0.5;           // per query block that needs aggregation

  void validate() const {
    if (compute_units == 0) throw Error(Errc::precondition, "compute unit count must be >= 1");
    if (subblock_size == 0) throw Error(Errc::precondition, "subblock size must be >= 1");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw Error(Errc::precondition, "aggregation coefficients must be >= 0");
  }
};

struct IntraGpuSchedule {
  std::size_t compute_units = 0;
  Workload subblock_size = 0;
  std::vector<std::vector<Subblock>> per_unit;
  std::vector<Workload> unit_loads;
  Workload compute_makespan = 0;
  double aggregation_cost = 0.0;

  double total() const { return static_cast<double>(compute_makespan) + aggregation_cost; }
};

// Splits each query block's W key blocks into ceil(W/s) subblocks of s (the
// last one takes the remainder) and list-schedules them, largest first, on
// the least-loaded compute unit.
inline IntraGpuSchedule intra_schedule(std::span<const Workload> workloads, const IntraCostModel& cfg) {
  cfg.validate();
  const Workload s = cfg.subblock_size;
  std::vector<Subblock> subs;
  double aggregation = 0.0;
  for (std::size_t b = 0; b < workloads.size(); ++b) {
    const Workload w = workloads[b];
    const Workload pieces = (w + s - 1) / s;
    for (Workload i = 0; i < pieces; ++i) {
      subs.push_back({b, static_cast<std::size_t>(i), std::min(s, w - i * s)});
    }
    if (pieces >= 2) aggregation += cfg.alpha * static_cast<double>(pieces - 1) + cfg.beta;
  }
  std::stable_sort(subs.begin(), subs.end(), [](const Subblock& a, const Subblock& b) { return a.work > b.work; });

  IntraGpuSchedule out;
  out.compute_units = cfg.compute_units;
  out.subblock_size = s;
  out.per_unit.resize(cfg.compute_units);
  out.unit_loads.assign(cfg.compute_units, 0);
  using Slot = std::pair<Workload, std::size_t>;
  std::priority_queue<Slot, std::vector<Slot>, std::greater<>> heap;
  for (std::size_t c = 0; c < cfg.compute_units; ++c) heap.emplace(0, c);
  for (const auto& sub : subs) {
    auto [load, c] = heap.top();
    heap.pop();
    out.per_unit[c].push_back(sub);
    out.unit_loads[c] = load + sub.work;
    heap.emplace(out.unit_loads[c], c);
  }
  out.compute_makespan = *std::max_element(out.unit_loads.begin(), out.unit_loads.end());
  out.aggregation_cost = aggregation;
  return out;
}

// Whole-block scheduling is the s >= max W special case.
inline IntraGpuSchedule whole_block_schedule(std::span<const Workload> workloads, IntraCostModel cfg) {
  Workload heaviest = 1;
  for (auto w : workloads) heaviest = std::max(heaviest, w);
  cfg.subblock_size = heaviest;
  return intra_schedule(workloads, cfg);
}

// Selects the workloads of the given block ids.
inline std::vector<Workload> gather(std::span<const Workload> workloads, const std::vector<std::size_t>& blocks) {
  std::vector<Workload> out;
  out.reserve(blocks.size());
  for (auto b : blocks) out.push_back(workloads[b]);
  return out;
}

struct PolicyResult {
  std::string name;
  BlockAssignment assignment;
  bool subblocked = false;
  std::vector<IntraGpuSchedule> gpus;

  // Slowest GPU after intra-GPU scheduling.
  Workload compute_makespan() const {
    Workload m = 0;
    for (const auto& g : gpus) m = std::max(m, g.compute_makespan);
    return m;
  }
  double aggregation_cost() const {
    double m = 0.0;
    for (const auto& g : gpus) m = std::max(m, g.aggregation_cost);
    return m;
  }
  double total() const {
    double m = 0.0;
    for (const auto& g : gpus) m = std::max(m, g.total());
    return m;
  }
};

struct BalanceReport {
  std::size_t gpus = 0;
  IntraCostModel intra;
  std::vector<Workload> workloads;
  std::vector<PolicyResult> policies;  // zigzag, lpt, zigzag+subblock, lpt+subblock
  bool has_optimum = false;
  BlockAssignment optimum;
};

// Compares inter-GPU (zigzag vs LPT) and intra-GPU (whole block vs
// subblocked) balancing on one mask's workloads.
inline BalanceReport balance_report(std::span<const Workload> workloads, std::size_t gpus, const IntraCostModel& intra,
                                    bool with_optimum = false) {
  intra.validate();
  BalanceReport r;
  r.gpus = gpus;
  r.intra = intra;
  r.workloads.assign(workloads.begin(), workloads.end());
  const auto zigzag = zigzag_distribute(workloads.size(), gpus, workloads);
  const auto lpt = lpt_distribute(workloads, gpus);
  auto run = [&](std::string name, const BlockAssignment& a, bool subblocked) {
    PolicyResult p{std::move(name), a, subblocked, {}};
    for (const auto& blocks : a.blocks) {
      const auto local = gather(workloads, blocks);
      p.gpus.push_back(subblocked ? intra_schedule(local, intra) : whole_block_schedule(local, intra));
    }
    r.policies.push_back(std::move(p));
  };
  run("causal-zigzag", zigzag, false);
  run("inter-gpu-lpt", lpt, false);
  run("intra-gpu-subblock", zigzag, true);
  run("inter+intra", lpt, true);
  if (with_optimum) {
    r.optimum = ilp_optimal(workloads, gpus);
    r.has_optimum = true;
  }
  return r;
}

}  // namespace mmplan
