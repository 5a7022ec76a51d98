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
#include <limits>
#include <string>
#include <vector>

#include "mmplan/error.hpp"
#include "mmplan/pipeline_layout.hpp"

namespace mmplan {

enum class TaskKind { forward, backward };

inline const char* to_string(TaskKind kind) { return kind == TaskKind::forward ? "forward" : "backward"; }

struct PipelineTask {
  TaskKind kind = TaskKind::forward;
  std::size_t stage = 0;  // global stage index
  std::size_t microbatch = 0;
  double duration_ms = 0.0;
  double release_ms = 0.0;  // earliest permitted start
  std::vector<std::size_t> dependencies;
};

// Task ids: forwards first, then backwards, each stage-major.
struct TaskGraph {
  std::size_t num_stages = 0;
  std::size_t num_microbatches = 0;
  std::vector<PipelineTask> tasks;
  std::vector<std::size_t> stage_module;  // owning module of each global stage
  double p2p_latency_ms = 0.0;

  std::size_t id(TaskKind kind, std::size_t stage, std::size_t mb) const {
    return (kind == TaskKind::forward ? 0 : num_stages * num_microbatches) + stage * num_microbatches + mb;
  }

  // Latency paid on an edge between two tasks.
  double edge_latency(std::size_t from, std::size_t to) const {
    return tasks[from].stage == tasks[to].stage ? 0.0 : p2p_latency_ms;
  }
};

namespace detail {

// Per-stage successors in the stage-level DAG, plus the first/last stage of
// each module.
struct StageGraph {
  std::vector<std::vector<std::size_t>> next;
  std::vector<std::vector<std::size_t>> prev;
  std::vector<std::size_t> module;
};

inline StageGraph stage_graph(const PipelineLayout& layout) {
  StageGraph g;
  const std::size_t total = layout.num_stages();
  g.next.resize(total);
  g.prev.resize(total);
  g.module.resize(total);
  for (std::size_t m = 0; m < layout.modules.size(); ++m) {
    const std::size_t base = layout.offset(m);
    const std::size_t count = layout.modules[m].stages.size();
    for (std::size_t j = 0; j < count; ++j) {
      g.module[base + j] = m;
      if (j + 1 < count) {
        g.next[base + j].push_back(base + j + 1);
        g.prev[base + j + 1].push_back(base + j);
      }
    }
  }
  for (const auto& [a, b] : layout.edges) {
    const std::size_t last = layout.offset(a) + layout.modules[a].stages.size() - 1;
    const std::size_t first = layout.offset(b);
    g.next[last].push_back(first);
    g.prev[first].push_back(last);
  }
  return g;
}

inline std::vector<const StageTiming*> flat_stages(const PipelineLayout& layout) {
  std::vector<const StageTiming*> out;
  for (const auto& m : layout.modules) {
    for (const auto& s : m.stages) out.push_back(&s);
  }
  return out;
}

}  // namespace detail

// Release times align the microbatch-0 forward of shallower source modules
// so that their outputs reach each join exactly when the deepest branch does.
inline TaskGraph build_tasks(const PipelineLayout& layout, std::size_t num_microbatches) {
  if (num_microbatches == 0) throw Error(Errc::precondition, "num_microbatches must be >= 1");
  const auto order = topological_order(layout);
  const auto g = detail::stage_graph(layout);
  const auto timing = detail::flat_stages(layout);
  const std::size_t S = layout.num_stages();
  const double lat = layout.p2p_latency_ms;

  std::vector<std::size_t> stage_order;
  for (std::size_t m : order) {
    for (std::size_t j = 0; j < layout.modules[m].stages.size(); ++j) stage_order.push_back(layout.offset(m) + j);
  }
  std::vector<double> asap(S, 0.0);
  for (std::size_t s : stage_order) {
    for (std::size_t p : g.prev[s]) asap[s] = std::max(asap[s], asap[p] + timing[p]->forward_ms + lat);
  }
  std::vector<double> alap(S, 0.0);
  for (auto it = stage_order.rbegin(); it != stage_order.rend(); ++it) {
    const std::size_t s = *it;
    if (g.next[s].empty()) {
      alap[s] = asap[s];
      continue;
    }
    double v = std::numeric_limits<double>::infinity();
    for (std::size_t n : g.next[s]) v = std::min(v, alap[n] - lat - timing[s]->forward_ms);
    alap[s] = v;
  }

  TaskGraph tg;
  tg.num_stages = S;
  tg.num_microbatches = num_microbatches;
  tg.stage_module = g.module;
  tg.p2p_latency_ms = lat;
  tg.tasks.resize(2 * S * num_microbatches);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t mb = 0; mb < num_microbatches; ++mb) {
      PipelineTask& f = tg.tasks[tg.id(TaskKind::forward, s, mb)];
      f.kind = TaskKind::forward;
      f.stage = s;
      f.microbatch = mb;
      f.duration_ms = timing[s]->forward_ms;
      f.release_ms = g.prev[s].empty() ? alap[s] : 0.0;
      for (std::size_t p : g.prev[s]) f.dependencies.push_back(tg.id(TaskKind::forward, p, mb));

      PipelineTask& b = tg.tasks[tg.id(TaskKind::backward, s, mb)];
      b.kind = TaskKind::backward;
      b.stage = s;
      b.microbatch = mb;
      b.duration_ms = timing[s]->backward_ms;
      b.dependencies.push_back(tg.id(TaskKind::forward, s, mb));
      for (std::size_t n : g.next[s]) b.dependencies.push_back(tg.id(TaskKind::backward, n, mb));
    }
  }
  return tg;
}

struct TaskEvent {
  TaskKind kind = TaskKind::forward;
  std::size_t stage = 0;
  std::size_t microbatch = 0;
  double start_ms = 0.0;
  double end_ms = 0.0;
};

struct ScheduleTrace {
  std::vector<std::string> device_names;   // one device row per global stage
  std::vector<std::size_t> device_module;  // module index of each row
  std::vector<std::string> module_names;
  std::vector<std::vector<TaskEvent>> devices;
  double iteration_time_ms = 0.0;
  double bubble_ratio = 0.0;
  std::vector<int> peak_inflight;
};

// Max over time of (forwards completed - backwards completed) per device.
inline std::vector<int> measured_peak_inflight(const ScheduleTrace& trace) {
  std::vector<int> out;
  out.reserve(trace.devices.size());
  for (const auto& events : trace.devices) {
    int live = 0;
    int peak = 0;
    for (const auto& e : events) {
      live += e.kind == TaskKind::forward ? 1 : -1;
      peak = std::max(peak, live);
    }
    out.push_back(peak);
  }
  return out;
}

inline double bubble_ratio(const ScheduleTrace& trace) {
  if (trace.devices.empty() || trace.iteration_time_ms <= 0.0) return 0.0;
  double busy = 0.0;
  for (const auto& events : trace.devices) {
    for (const auto& e : events) busy += e.end_ms - e.start_ms;
  }
  return 1.0 - busy / (static_cast<double>(trace.devices.size()) * trace.iteration_time_ms);
}

// Event-driven 1F1B. Each device (global stage) runs one task at a time,
// forwards and backwards each in microbatch order. A forward may start only
// while fewer than k_if microbatches are in flight on that device; a ready
// backward always wins over a ready forward.
inline ScheduleTrace simulate_1f1b(const PipelineLayout& layout, std::size_t num_microbatches) {
  const TaskGraph tg = build_tasks(layout, num_microbatches);
  const std::size_t S = tg.num_stages;
  const std::size_t M = num_microbatches;

  // Longest downstream chain; equals k_if whenever the layout is consistent.
  std::vector<int> cap(S, 0);
  {
    const auto g = detail::stage_graph(layout);
    const auto order = topological_order(layout);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t base = layout.offset(*it);
      for (std::size_t j = layout.modules[*it].stages.size(); j-- > 0;) {
        int down = 0;
        for (std::size_t n : g.next[base + j]) down = std::max(down, cap[n]);
        cap[base + j] = down + 1;
      }
    }
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> end(tg.tasks.size(), inf);
  std::vector<bool> started(tg.tasks.size(), false);
  std::vector<std::size_t> next_f(S, 0), next_b(S, 0);
  std::vector<double> busy_until(S, 0.0);

  ScheduleTrace trace;
  trace.devices.resize(S);
  for (const auto& m : layout.modules) trace.module_names.push_back(m.name);
  for (std::size_t m = 0; m < layout.modules.size(); ++m) {
    for (std::size_t j = 0; j < layout.modules[m].stages.size(); ++j) {
      trace.device_names.push_back(layout.modules[m].name + ":" + std::to_string(j));
      trace.device_module.push_back(m);
    }
  }

  // Earliest start of a task whose dependencies have all started; inf otherwise.
  auto ready_time = [&](std::size_t id) {
    const PipelineTask& task = tg.tasks[id];
    double r = task.release_ms;
    for (std::size_t d : task.dependencies) {
      if (!started[d]) return inf;
      r = std::max(r, end[d] + tg.edge_latency(d, id));
    }
    return r;
  };
  auto head = [&](std::size_t s, TaskKind kind) -> std::size_t {
    if (kind == TaskKind::backward) {
      return next_b[s] < M ? tg.id(kind, s, next_b[s]) : tg.tasks.size();
    }
    if (next_f[s] >= M || static_cast<int>(next_f[s] - next_b[s]) >= cap[s]) return tg.tasks.size();
    return tg.id(kind, s, next_f[s]);
  };

  std::size_t remaining = tg.tasks.size();
  double now = 0.0;
  while (remaining > 0) {
    bool progressed = true;
    while (progressed) {
      progressed = false;
      for (std::size_t s = 0; s < S; ++s) {
        if (busy_until[s] > now) continue;
        std::size_t pick = tg.tasks.size();
        for (TaskKind kind : {TaskKind::backward, TaskKind::forward}) {
          const std::size_t id = head(s, kind);
          if (id < tg.tasks.size() && ready_time(id) <= now) {
            pick = id;
            break;
          }
        }
        if (pick == tg.tasks.size()) continue;
        const PipelineTask& task = tg.tasks[pick];
        started[pick] = true;
        end[pick] = now + task.duration_ms;
        busy_until[s] = end[pick];
        (task.kind == TaskKind::forward ? next_f : next_b)[s]++;
        trace.devices[s].push_back({task.kind, s, task.microbatch, now, end[pick]});
        --remaining;
        progressed = true;
      }
    }
    if (remaining == 0) break;

    double next = inf;
    for (std::size_t s = 0; s < S; ++s) {
      if (busy_until[s] > now) next = std::min(next, busy_until[s]);
      for (TaskKind kind : {TaskKind::backward, TaskKind::forward}) {
        const std::size_t id = head(s, kind);
        if (id < tg.tasks.size()) {
          const double r = ready_time(id);
          if (r > now) next = std::min(next, r);
        }
      }
    }
    if (next == inf) throw Error(Errc::invariant, "pipeline schedule deadlocked");
    now = next;
  }

  for (std::size_t s = 0; s < S; ++s) {
    for (const auto& e : trace.devices[s]) trace.iteration_time_ms = std::max(trace.iteration_time_ms, e.end_ms);
  }
  trace.bubble_ratio = bubble_ratio(trace);
  trace.peak_inflight = measured_peak_inflight(trace);
  return trace;
}

}  // namespace mmplan
