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

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mmplan/error.hpp"

namespace mmplan {

struct StageTiming {
  double forward_ms = 0.0;
  double backward_ms = 0.0;

  double total() const { return forward_ms + backward_ms; }
};

// One pipelined module: a chain of stages, each on its own device group.
struct LayoutModule {
  std::string name;
  std::vector<StageTiming> stages;
};

// A DAG of pipelined modules. An edge (a, b) connects the last stage of
// module a to the first stage of module b. Stages are numbered globally
// in module order; each global stage is one device row of the schedule.
struct PipelineLayout {
  std::vector<LayoutModule> modules;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  double p2p_latency_ms = 0.0;

  std::size_t num_stages() const {
    std::size_t n = 0;
    for (const auto& m : modules) n += m.stages.size();
    return n;
  }

  std::size_t offset(std::size_t module) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < module; ++i) n += modules[i].stages.size();
    return n;
  }

  std::vector<std::size_t> predecessors(std::size_t module) const {
    std::vector<std::size_t> out;
    for (const auto& [a, b] : edges) {
      if (b == module) out.push_back(a);
    }
    return out;
  }

  std::vector<std::size_t> successors(std::size_t module) const {
    std::vector<std::size_t> out;
    for (const auto& [a, b] : edges) {
      if (a == module) out.push_back(b);
    }
    return out;
  }
};

// Kahn's algorithm; ties resolved by module index. Throws on cycles,
// dangling edges and empty modules.
inline std::vector<std::size_t> topological_order(const PipelineLayout& layout) {
  const std::size_t n = layout.modules.size();
  if (n == 0) throw Error(Errc::precondition, "layout has no modules");
  for (const auto& m : layout.modules) {
    if (m.stages.empty()) throw Error(Errc::precondition, "layout module '" + m.name + "' has no stages");
  }
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& [a, b] : layout.edges) {
    if (a >= n || b >= n || a == b) throw Error(Errc::precondition, "layout edge refers to an invalid module");
    ++indegree[b];
  }
  std::vector<std::size_t> order;
  std::vector<bool> done(n, false);
  while (order.size() < n) {
    std::size_t next = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i] && indegree[i] == 0) {
        next = i;
        break;
      }
    }
    if (next == n) throw Error(Errc::precondition, "layout module graph is cyclic");
    done[next] = true;
    order.push_back(next);
    for (const auto& [a, b] : layout.edges) {
      if (a == next) --indegree[b];
    }
  }
  return order;
}

// k_if per global stage. Every source-to-sink module path is treated as its
// own sequential pipeline of N stages in which stage p holds N - p
// microbatches; a stage shared by several paths must get the same value
// from each of them.
inline std::vector<int> inflight_microbatches(const PipelineLayout& layout) {
  (void)topological_order(layout);
  const std::size_t total = layout.num_stages();
  std::vector<int> k_if(total, 0);

  std::vector<std::size_t> path;
  auto visit = [&](auto&& self, std::size_t module) -> void {
    path.push_back(module);
    const auto next = layout.successors(module);
    if (next.empty()) {
      std::size_t depth = 0;
      for (std::size_t m : path) depth += layout.modules[m].stages.size();
      std::size_t position = 0;
      for (std::size_t m : path) {
        const std::size_t base = layout.offset(m);
        for (std::size_t s = 0; s < layout.modules[m].stages.size(); ++s, ++position) {
          const int value = static_cast<int>(depth - position);
          int& slot = k_if[base + s];
          if (slot != 0 && slot != value) {
            throw Error(Errc::invariant, "inconsistent in-flight microbatch count for stage " + std::to_string(s) +
                                             " of module '" + layout.modules[m].name + "' (" + std::to_string(slot) +
                                             " vs " + std::to_string(value) + ")");
          }
          slot = value;
        }
      }
    } else {
      for (std::size_t m : next) self(self, m);
    }
    path.pop_back();
  };
  for (std::size_t m = 0; m < layout.modules.size(); ++m) {
    if (layout.predecessors(m).empty()) visit(visit, m);
  }
  return k_if;
}

inline PipelineLayout chain_layout(std::vector<StageTiming> stages, std::string name = "chain") {
  PipelineLayout layout;
  layout.modules.push_back({std::move(name), std::move(stages)});
  return layout;
}

// Encoders in parallel, all feeding one LLM (the last module).
inline PipelineLayout fan_in_layout(std::vector<LayoutModule> encoders, LayoutModule llm) {
  PipelineLayout layout;
  layout.modules = std::move(encoders);
  const std::size_t sink = layout.modules.size();
  for (std::size_t i = 0; i < sink; ++i) layout.edges.emplace_back(i, sink);
  layout.modules.push_back(std::move(llm));
  return layout;
}

}  // namespace mmplan
