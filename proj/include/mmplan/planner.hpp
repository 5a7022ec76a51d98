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
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mmplan/error.hpp"
#include "mmplan/model_graph.hpp"
#include "mmplan/partition.hpp"
#include "mmplan/pipeline_layout.hpp"
#include "mmplan/schedule_sim.hpp"

namespace mmplan {

struct ClusterSpec {
  std::size_t num_nodes = 2;
  std::size_t gpus_per_node = 1;
  std::uint64_t gpu_memory_bytes = 0;
  std::vector<int> tp_degrees{1, 2, 4, 8};

  std::size_t total_gpus() const { return num_nodes * gpus_per_node; }

  // Degrees usable on this cluster: a TP group must sit inside one node.
  std::vector<int> usable_degrees() const {
    std::vector<int> out;
    for (int tp : tp_degrees) {
      if (static_cast<std::size_t>(tp) <= gpus_per_node && gpus_per_node % static_cast<std::size_t>(tp) == 0) {
        out.push_back(tp);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void validate() const {
    if (num_nodes < 2) {
      throw Error(Errc::invariant, "cluster: num_nodes must be >= 2 (the LLM takes n in 1..N-1 nodes), got " +
                                       std::to_string(num_nodes));
    }
    if (gpus_per_node == 0) throw Error(Errc::invariant, "cluster: gpus_per_node must be >= 1");
    if (gpu_memory_bytes == 0) throw Error(Errc::invariant, "cluster: gpu_memory_bytes must be > 0");
    for (int tp : tp_degrees) {
      if (tp < 1 || (tp & (tp - 1)) != 0) {
        throw Error(Errc::invariant, "cluster: tp degree " + std::to_string(tp) + " is not a power of two");
      }
    }
    if (usable_degrees().empty()) throw Error(Errc::invariant, "cluster: no tp degree fits inside a node");
  }
};

enum class ModalityMode { colocated, parallel };

inline const char* to_string(ModalityMode mode) { return mode == ModalityMode::colocated ? "colocated" : "parallel"; }

struct PlannerOptions {
  std::size_t num_microbatches = 8;
  std::size_t microbatch_size = 1;
  BackwardModel backward = BackwardModel::frozen_aware;
  MemoryConfig memory;
  double p2p_latency_ms = 0.0;
  // Configurations whose boundary-vector product is at most this are
  // searched over every boundary; larger ones use balanced boundaries only.
  std::uint64_t boundary_budget = 4096;

  void validate() const {
    if (num_microbatches == 0) throw Error(Errc::precondition, "num_microbatches must be >= 1");
    if (microbatch_size == 0) throw Error(Errc::precondition, "microbatch_size must be >= 1");
    if (!(p2p_latency_ms >= 0.0)) throw Error(Errc::precondition, "p2p_latency_ms must be >= 0");
    memory.validate();
  }
};

// Half-open layer range of one named module.
struct ModuleSlice {
  std::string module;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const ModuleSlice&, const ModuleSlice&) = default;
};

struct PlannedStage {
  std::vector<ModuleSlice> layer_range;
  std::vector<std::size_t> devices;
  StageCost cost;
  MemoryEstimate memory;
};

struct PlannedModule {
  std::string name;
  bool is_llm = false;
  std::vector<std::string> members;  // encoder names covered (empty for the LLM)
  int tp = 1;
  std::vector<PlannedStage> stages;

  double max_stage_time() const {
    double m = 0.0;
    for (const auto& s : stages) m = std::max(m, s.cost.total());
    return m;
  }
  std::size_t num_devices() const { return stages.size() * static_cast<std::size_t>(tp); }
};

struct ParallelPlan {
  ModalityMode mode = ModalityMode::colocated;
  std::vector<PlannedModule> modules;  // encoder modules first, LLM last
  std::size_t llm_nodes = 0;
  std::size_t num_microbatches = 1;
  std::size_t microbatch_size = 1;
  double p2p_latency_ms = 0.0;
  double iteration_time_ms = 0.0;
  double throughput = 0.0;  // samples per second
  double bubble_ratio = 0.0;

  std::size_t total_stages() const {
    std::size_t n = 0;
    for (const auto& m : modules) n += m.stages.size();
    return n;
  }

  std::vector<std::vector<std::size_t>> device_assignment() const {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& m : modules) {
      for (const auto& s : m.stages) out.push_back(s.devices);
    }
    return out;
  }
};

// Fan-in layout of a plan: every encoder module feeds the LLM.
inline PipelineLayout layout_of(const ParallelPlan& plan) {
  std::vector<LayoutModule> encoders;
  LayoutModule llm;
  for (const auto& m : plan.modules) {
    LayoutModule lm{m.name, {}};
    for (const auto& s : m.stages) lm.stages.push_back({s.cost.forward_ms, s.cost.backward_ms});
    if (m.is_llm) {
      llm = std::move(lm);
    } else {
      encoders.push_back(std::move(lm));
    }
  }
  PipelineLayout layout = fan_in_layout(std::move(encoders), std::move(llm));
  layout.p2p_latency_ms = plan.p2p_latency_ms;
  return layout;
}

inline double throughput_of(std::size_t num_microbatches, std::size_t microbatch_size, double iteration_time_ms) {
  if (!(iteration_time_ms > 0.0)) return 0.0;
  return static_cast<double>(num_microbatches * microbatch_size) / (iteration_time_ms / 1000.0);
}

// Fills k_if and memory estimates from the plan's layout.
inline void assign_memory(ParallelPlan& plan) {
  const auto k_if = inflight_microbatches(layout_of(plan));
  std::size_t g = 0;
  // layout order: encoders first, then the LLM, matching plan.modules
  for (auto& m : plan.modules) {
    for (auto& s : m.stages) s.memory = estimate_memory(s.cost, k_if[g++]);
  }
}

// Runs the simulator and fills the predicted timings.
inline ScheduleTrace simulate_plan(ParallelPlan& plan) {
  auto trace = simulate_1f1b(layout_of(plan), plan.num_microbatches);
  plan.iteration_time_ms = trace.iteration_time_ms;
  plan.bubble_ratio = trace.bubble_ratio;
  plan.throughput = throughput_of(plan.num_microbatches, plan.microbatch_size, plan.iteration_time_ms);
  return trace;
}

struct MemoryViolation {
  std::int64_t overflow = 0;  // bytes over capacity on the worst stage
  std::string where;
};

inline std::optional<MemoryViolation> check_memory(const ParallelPlan& plan, std::uint64_t capacity) {
  std::optional<MemoryViolation> worst;
  for (const auto& m : plan.modules) {
    for (std::size_t j = 0; j < m.stages.size(); ++j) {
      const auto need = m.stages[j].memory.total();
      if (need <= capacity) continue;
      const auto over = static_cast<std::int64_t>(need - capacity);
      if (!worst || over > worst->overflow) {
        worst = MemoryViolation{over, "stage " + std::to_string(j) + " of '" + m.name + "' needs " +
                                          std::to_string(need) + " bytes (model " +
                                          std::to_string(m.stages[j].memory.model_bytes) + " + data " +
                                          std::to_string(m.stages[j].memory.data_bytes) + ") > gpu_memory_bytes " +
                                          std::to_string(capacity)};
      }
    }
  }
  return worst;
}

namespace detail {

// Per-layer costs of one named module (encoder, projector or LLM).
inline std::vector<LayerCost> module_costs(const ModelSpec& model, const TrainabilityMap& p, const std::string& name,
                                           int tp, BackwardModel bm) {
  auto costs = [&](const ModuleSpec& m, const std::vector<bool>& pm) {
    if (!m.profiled_at(tp)) throw Error(Errc::invariant, "module '" + m.name + "' has no profile at tp=" + std::to_string(tp));
    std::vector<const LayerProfile*> layers;
    for (const auto& l : m.layers) layers.push_back(&l);
    return layer_costs(layers, m.frozen, pm, tp, bm);
  };
  for (std::size_t i = 0; i < model.encoders.size(); ++i) {
    if (model.encoders[i].encoder.name == name) return costs(model.encoders[i].encoder, p.encoders[i]);
    if (model.encoders[i].projector.name == name) return costs(model.encoders[i].projector, p.projectors[i]);
  }
  if (model.llm.name == name) return costs(model.llm, p.llm);
  throw Error(Errc::invariant, "plan references unknown module '" + name + "'");
}

// Splits a range over a branch's encoder+projector sequence into
// per-module slices.
inline std::vector<ModuleSlice> branch_slices(const EncoderBranch& b, LayerRange r) {
  std::vector<ModuleSlice> out;
  const std::size_t ne = b.encoder.size();
  if (r.begin < ne) out.push_back({b.encoder.name, r.begin, std::min(r.end, ne)});
  if (r.end > ne) out.push_back({b.projector.name, std::max(r.begin, ne) - ne, r.end - ne});
  return out;
}

inline bool branch_profiled(const EncoderBranch& b, int tp) {
  return b.encoder.profiled_at(tp) && b.projector.profiled_at(tp);
}

// Caches DP partitions per (module, tp, pp).
class PartitionCache {
 public:
  PartitionCache(const ModelSpec& model, const TrainabilityMap& p, const PlannerOptions& options)
      : model_(model), p_(p), options_(options) {}

  const StagePlan& branch(std::size_t i, int tp, std::size_t pp) {
    auto key = std::make_tuple(i, tp, pp);
    auto it = branch_.find(key);
    if (it != branch_.end()) return it->second;
    const auto costs = branch_costs(model_, p_, i, tp, options_.backward);
    return branch_.emplace(key, partition_stages(costs, pp, tp, options_.memory)).first->second;
  }

  const StagePlan& llm(int tp, std::size_t pp) {
    auto key = std::make_pair(tp, pp);
    auto it = llm_.find(key);
    if (it != llm_.end()) return it->second;
    const auto costs = llm_costs(model_, p_, tp, options_.backward);
    return llm_.emplace(key, partition_stages(costs, pp, tp, options_.memory)).first->second;
  }

 private:
  const ModelSpec& model_;
  const TrainabilityMap& p_;
  const PlannerOptions& options_;
  std::map<std::tuple<std::size_t, int, std::size_t>, StagePlan> branch_;
  std::map<std::pair<int, std::size_t>, StagePlan> llm_;
};

// Consecutive TP groups starting at `first`.
inline void place_contiguous(PlannedModule& m, std::size_t first) {
  for (std::size_t j = 0; j < m.stages.size(); ++j) {
    m.stages[j].devices.clear();
    for (int t = 0; t < m.tp; ++t) m.stages[j].devices.push_back(first + j * static_cast<std::size_t>(m.tp) + t);
  }
}

inline PlannedModule branch_module(const EncoderBranch& b, const StagePlan& sp) {
  PlannedModule m;
  m.name = b.name();
  m.members = {b.name()};
  m.tp = sp.tp;
  for (const auto& s : sp.stages) m.stages.push_back({branch_slices(b, s.layers), {}, s, {}});
  return m;
}

// Stage-by-stage fusion of several branch partitions with the same pp.
inline PlannedModule fused_module(const ModelSpec& model, const std::vector<const StagePlan*>& parts) {
  PlannedModule m;
  m.tp = parts.front()->tp;
  for (std::size_t i = 0; i < model.encoders.size(); ++i) {
    m.name += (i ? "+" : "") + model.encoders[i].name();
    m.members.push_back(model.encoders[i].name());
  }
  const std::size_t pp = parts.front()->num_stages();
  for (std::size_t j = 0; j < pp; ++j) {
    PlannedStage st;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& s = parts[i]->stages[j];
      for (auto& slice : branch_slices(model.encoders[i], s.layers)) st.layer_range.push_back(slice);
      if (i == 0) {
        st.cost = s;
      } else {
        st.cost += s;
      }
    }
    st.cost.layers = {};
    m.stages.push_back(std::move(st));
  }
  return m;
}

// Aligned first-fit of each module's TP groups into `gpus` devices, modules
// taken in the given order. Returns false if something does not fit.
inline bool place_first_fit(std::vector<PlannedModule>& modules, const std::vector<std::size_t>& order,
                            std::size_t gpus) {
  std::vector<bool> used(gpus, false);
  for (std::size_t idx : order) {
    auto& m = modules[idx];
    const auto tp = static_cast<std::size_t>(m.tp);
    for (auto& s : m.stages) {
      bool placed = false;
      for (std::size_t start = 0; start + tp <= gpus; start += tp) {
        bool free = true;
        for (std::size_t d = start; d < start + tp; ++d) free = free && !used[d];
        if (!free) continue;
        s.devices.clear();
        for (std::size_t d = start; d < start + tp; ++d) {
          used[d] = true;
          s.devices.push_back(d);
        }
        placed = true;
        break;
      }
      if (!placed) return false;
    }
  }
  return true;
}

inline std::vector<std::pair<int, std::size_t>> shapes_within(const std::vector<int>& degrees, std::size_t gpus,
                                                              std::size_t max_pp) {
  std::vector<std::pair<int, std::size_t>> out;
  for (int tp : degrees) {
    for (std::size_t pp = 1; pp <= max_pp && pp * static_cast<std::size_t>(tp) <= gpus; ++pp) out.emplace_back(tp, pp);
  }
  return out;
}

}  // namespace detail

struct LlmCandidate {
  std::size_t nodes = 0;
  int tp = 1;
  std::size_t pp = 1;
  StagePlan stages;
};

// Every (n, tp, pp) with tp * pp = n * gpus_per_node, tp inside a node and
// pp no larger than the LLM layer count.
inline std::vector<LlmCandidate> enumerate_llm_configs(const ModelSpec& model, const ClusterSpec& cluster,
                                                       const PlannerOptions& options = {}) {
  model.validate();
  cluster.validate();
  const auto p = compute_trainability(model);
  std::vector<LlmCandidate> out;
  for (std::size_t n = 1; n < cluster.num_nodes; ++n) {
    const std::size_t devices = n * cluster.gpus_per_node;
    for (int tp : cluster.usable_degrees()) {
      if (devices % static_cast<std::size_t>(tp) != 0 || !model.llm.profiled_at(tp)) continue;
      const std::size_t pp = devices / static_cast<std::size_t>(tp);
      if (pp > model.llm.size()) continue;
      const auto costs = llm_costs(model, p, tp, options.backward);
      out.push_back({n, tp, pp, partition_stages(costs, pp, tp, options.memory)});
    }
  }
  if (out.empty()) {
    throw Error(Errc::infeasible, "no (tp, pp) fits the LLM: every candidate needs more stages than its " +
                                      std::to_string(model.llm.size()) + " layers or an unprofiled tp degree");
  }
  return out;
}

// All encoder-side configurations of one mode on `gpus` devices (ids from
// 0). Each entry is the list of encoder modules with devices assigned.
inline std::vector<std::vector<PlannedModule>> encoder_configs(const ModelSpec& model, const ClusterSpec& cluster,
                                                               std::size_t gpus, ModalityMode mode,
                                                               const PlannerOptions& options = {}) {
  const auto p = compute_trainability(model);
  detail::PartitionCache cache(model, p, options);
  const auto degrees = cluster.usable_degrees();
  std::vector<std::vector<PlannedModule>> out;

  if (mode == ModalityMode::colocated) {
    std::size_t max_pp = std::numeric_limits<std::size_t>::max();
    for (const auto& b : model.encoders) max_pp = std::min(max_pp, b.size());
    for (auto [tp, pp] : detail::shapes_within(degrees, gpus, max_pp)) {
      bool ok = true;
      for (const auto& b : model.encoders) ok = ok && detail::branch_profiled(b, tp);
      if (!ok) continue;
      std::vector<const StagePlan*> parts;
      for (std::size_t i = 0; i < model.encoders.size(); ++i) parts.push_back(&cache.branch(i, tp, pp));
      auto m = model.encoders.size() == 1 ? detail::branch_module(model.encoders[0], *parts[0])
                                          : detail::fused_module(model, parts);
      detail::place_contiguous(m, 0);
      out.push_back({std::move(m)});
    }
    return out;
  }

  const std::size_t E = model.encoders.size();
  std::vector<std::vector<std::pair<int, std::size_t>>> shapes(E);
  for (std::size_t i = 0; i < E; ++i) {
    for (auto s : detail::shapes_within(degrees, gpus, model.encoders[i].size())) {
      if (detail::branch_profiled(model.encoders[i], s.first)) shapes[i].push_back(s);
    }
  }
  std::vector<std::pair<int, std::size_t>> pick(E);
  auto rec = [&](auto&& self, std::size_t i, std::size_t used) -> void {
    if (i == E) {
      std::vector<PlannedModule> mods;
      std::vector<std::pair<double, std::size_t>> compute;
      for (std::size_t e = 0; e < E; ++e) {
        mods.push_back(detail::branch_module(model.encoders[e], cache.branch(e, pick[e].first, pick[e].second)));
        double total = 0.0;
        for (const auto& s : mods.back().stages) total += s.cost.total();
        compute.emplace_back(-total, e);
      }
      // heavier encoders are packed first
      std::sort(compute.begin(), compute.end());
      std::vector<std::size_t> order;
      for (auto& c : compute) order.push_back(c.second);
      if (detail::place_first_fit(mods, order, gpus)) out.push_back(std::move(mods));
      return;
    }
    for (auto s : shapes[i]) {
      const std::size_t need = static_cast<std::size_t>(s.first) * s.second;
      if (used + need > gpus) continue;
      pick[i] = s;
      self(self, i + 1, used + need);
    }
  };
  rec(rec, 0, 0);
  return out;
}

struct EncoderFit {
  ModalityMode mode = ModalityMode::colocated;
  std::vector<PlannedModule> modules;
  double max_stage_time = 0.0;
};

// The encoder configuration whose per-stage time is closest to the target:
// smallest worst-module |stage time - target|, then smallest sum over
// modules, then fewest devices, then enumeration order.
inline EncoderFit fit_encoders(const ModelSpec& model, const ClusterSpec& cluster, double target_stage_time,
                               std::size_t nodes_available, ModalityMode mode, const PlannerOptions& options = {}) {
  if (nodes_available < 1) throw Error(Errc::precondition, "fit_encoders needs at least one node");
  const auto configs = encoder_configs(model, cluster, nodes_available * cluster.gpus_per_node, mode, options);
  if (configs.empty()) {
    throw Error(Errc::infeasible, std::string("no ") + to_string(mode) + " encoder placement fits on " +
                                      std::to_string(nodes_available) + " node(s)");
  }
  std::optional<std::tuple<double, double, std::size_t>> best_key;
  const std::vector<PlannedModule>* best = nullptr;
  for (const auto& cfg : configs) {
    double worst = 0.0, sum = 0.0;
    std::size_t devices = 0;
    for (const auto& m : cfg) {
      const double d = std::fabs(m.max_stage_time() - target_stage_time);
      worst = std::max(worst, d);
      sum += d;
      devices += m.num_devices();
    }
    const auto key = std::make_tuple(worst, sum, devices);
    if (!best_key || key < *best_key) {
      best_key = key;
      best = &cfg;
    }
  }
  EncoderFit fit{mode, *best, 0.0};
  for (const auto& m : fit.modules) fit.max_stage_time = std::max(fit.max_stage_time, m.max_stage_time());
  return fit;
}

namespace detail {

inline PlannedModule llm_module(const ModelSpec& model, const LlmCandidate& c, std::size_t first_device) {
  PlannedModule m;
  m.name = model.llm.name;
  m.is_llm = true;
  m.tp = c.tp;
  for (const auto& s : c.stages.stages) {
    m.stages.push_back({{{model.llm.name, s.layers.begin, s.layers.end}}, {}, s, {}});
  }
  place_contiguous(m, first_device);
  return m;
}

// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    if (r > UINT64_MAX / num) return UINT64_MAX;
    r = r * num / i;
  }
  return r;
}

inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  return (a != 0 && b > UINT64_MAX / a) ? UINT64_MAX : a * b;
}

// Boundary vectors splitting n layers into k nonempty stages, in
// lexicographic order.
inline std::vector<std::vector<std::size_t>> all_boundaries(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cut;
  auto rec = [&](auto&& self, std::size_t from) -> void {
    if (cut.size() + 1 == k) {
      out.push_back(cut);
      return;
    }
    for (std::size_t c = from; c + (k - 1 - cut.size()) <= n; ++c) {
      cut.push_back(c);
      self(self, c + 1);
      cut.pop_back();
    }
  };
  rec(rec, 1);
  return out;
}

// Partitions of one layer sequence: the balanced one first, then every
// other boundary vector.
inline std::vector<StagePlan> partition_variants(std::span<const LayerCost> costs, const StagePlan& balanced,
                                                 const MemoryConfig& memory) {
  std::vector<StagePlan> out{balanced};
  const auto first = balanced.boundaries();
  for (const auto& b : all_boundaries(costs.size(), balanced.num_stages())) {
    if (b != first) out.push_back(stages_from_boundaries(costs, b, balanced.tp, memory));
  }
  return out;
}

inline std::size_t branch_index(const ModelSpec& model, const std::string& name) {
  for (std::size_t i = 0; i < model.encoders.size(); ++i) {
    if (model.encoders[i].name() == name) return i;
  }
  throw Error(Errc::invariant, "unknown encoder '" + name + "'");
}

inline std::uint64_t variant_count(const ModelSpec& model, const PlannedModule& m) {
  const std::size_t pp = m.stages.size();
  if (m.is_llm) return binomial(model.llm.size() - 1, pp - 1);
  std::uint64_t n = 1;
  for (const auto& name : m.members) {
    n = saturating_mul(n, binomial(model.encoders[branch_index(model, name)].size() - 1, pp - 1));
  }
  return n;
}

// Every stage partition of a module with its tp, pp and devices kept; the
// input module comes first.
inline std::vector<PlannedModule> module_variants(const ModelSpec& model, const TrainabilityMap& p,
                                                  const PlannedModule& m, const PlannerOptions& options) {
  const std::size_t pp = m.stages.size();
  auto with_devices = [&](PlannedModule v) {
    for (std::size_t j = 0; j < pp; ++j) v.stages[j].devices = m.stages[j].devices;
    return v;
  };
  std::vector<PlannedModule> out;
  if (m.is_llm) {
    const auto costs = llm_costs(model, p, m.tp, options.backward);
    const auto balanced = partition_stages(costs, pp, m.tp, options.memory);
    for (const auto& sp : partition_variants(costs, balanced, options.memory)) {
      PlannedModule v = m;
      for (std::size_t j = 0; j < pp; ++j) {
        const auto& s = sp.stages[j];
        v.stages[j].layer_range = {{model.llm.name, s.layers.begin, s.layers.end}};
        v.stages[j].cost = s;
      }
      out.push_back(std::move(v));
    }
    return out;
  }
  std::vector<std::size_t> idx;
  std::vector<std::vector<StagePlan>> per;
  for (const auto& name : m.members) {
    idx.push_back(branch_index(model, name));
    const auto costs = branch_costs(model, p, idx.back(), m.tp, options.backward);
    per.push_back(partition_variants(costs, partition_stages(costs, pp, m.tp, options.memory), options.memory));
  }
  std::vector<std::size_t> pick(per.size(), 0);
  while (true) {
    if (per.size() == 1) {
      out.push_back(with_devices(branch_module(model.encoders[idx[0]], per[0][pick[0]])));
      out.back().name = m.name;
    } else {
      std::vector<const StagePlan*> parts;
      for (std::size_t i = 0; i < per.size(); ++i) parts.push_back(&per[i][pick[i]]);
      out.push_back(with_devices(fused_module(model, parts)));
    }
    std::size_t i = 0;
    while (i < pick.size() && ++pick[i] == per[i].size()) pick[i++] = 0;
    if (i == pick.size()) break;
  }
  return out;
}

// Argmax key: shorter iteration, fewer stages, lexicographic devices, mode.
inline bool better(const ParallelPlan& a, const ParallelPlan& b) {
  if (a.iteration_time_ms != b.iteration_time_ms) return a.iteration_time_ms < b.iteration_time_ms;
  if (a.total_stages() != b.total_stages()) return a.total_stages() < b.total_stages();
  const auto da = a.device_assignment(), db = b.device_assignment();
  if (da != db) return da < db;
  return a.mode < b.mode;
}

}  // namespace detail

// For every LLM candidate and both modality modes, every encoder
// configuration on the remaining nodes is glued to the LLM, checked against
// memory and simulated. Stage boundaries are searched exhaustively while the
// per-configuration product stays within boundary_budget.
inline ParallelPlan plan(const ModelSpec& model, const ClusterSpec& cluster, const PlannerOptions& options = {}) {
  model.validate();
  cluster.validate();
  options.validate();
  const auto llm = enumerate_llm_configs(model, cluster, options);
  const auto p = compute_trainability(model);

  std::optional<ParallelPlan> best;
  std::optional<MemoryViolation> tightest;
  std::size_t structural = 0;
  for (const auto& c : llm) {
    const std::size_t encoder_gpus = (cluster.num_nodes - c.nodes) * cluster.gpus_per_node;
    for (ModalityMode mode : {ModalityMode::colocated, ModalityMode::parallel}) {
      for (auto& enc : encoder_configs(model, cluster, encoder_gpus, mode, options)) {
        ++structural;
        ParallelPlan candidate;
        candidate.mode = mode;
        candidate.llm_nodes = c.nodes;
        candidate.num_microbatches = options.num_microbatches;
        candidate.microbatch_size = options.microbatch_size;
        candidate.p2p_latency_ms = options.p2p_latency_ms;
        candidate.modules = std::move(enc);
        candidate.modules.push_back(detail::llm_module(model, c, encoder_gpus));

        std::uint64_t variants = 1;
        for (const auto& m : candidate.modules) variants = detail::saturating_mul(variants, detail::variant_count(model, m));
        std::vector<std::vector<PlannedModule>> alternatives;
        for (const auto& m : candidate.modules) {
          if (variants <= options.boundary_budget) {
            alternatives.push_back(detail::module_variants(model, p, m, options));
          } else {
            alternatives.push_back({m});
          }
        }
        std::vector<std::size_t> pick(alternatives.size(), 0);
        while (true) {
          for (std::size_t i = 0; i < pick.size(); ++i) candidate.modules[i] = alternatives[i][pick[i]];
          assign_memory(candidate);
          if (auto v = check_memory(candidate, cluster.gpu_memory_bytes)) {
            if (!tightest || v->overflow < tightest->overflow) tightest = v;
          } else {
            simulate_plan(candidate);
            if (!best || detail::better(candidate, *best)) best = candidate;
          }
          std::size_t i = 0;
          while (i < pick.size() && ++pick[i] == alternatives[i].size()) pick[i++] = 0;
          if (i == pick.size()) break;
        }
      }
    }
  }
  if (!best) {
    if (structural == 0) {
      throw Error(Errc::infeasible, "no feasible plan: the encoders do not fit on the nodes left by any LLM candidate");
    }
    throw Error(Errc::infeasible, "no feasible plan: all " + std::to_string(structural) +
                                      " candidates exceed GPU memory; tightest: " + tightest->where);
  }
  return *best;
}

// Recomputes stage costs of an existing plan from its layer ranges under
// `backward`, then refreshes memory and simulated timings.
inline ParallelPlan retime_plan(const ParallelPlan& original, const ModelSpec& model, BackwardModel backward,
                                const MemoryConfig& memory = {}) {
  const auto p = compute_trainability(model);
  ParallelPlan out = original;
  for (auto& m : out.modules) {
    std::map<std::string, std::vector<LayerCost>> costs;
    for (auto& s : m.stages) {
      StageCost total;
      bool first = true;
      for (const auto& slice : s.layer_range) {
        auto it = costs.find(slice.module);
        if (it == costs.end()) {
          it = costs.emplace(slice.module, detail::module_costs(model, p, slice.module, m.tp, backward)).first;
        }
        if (slice.end > it->second.size() || slice.begin >= slice.end) {
          throw Error(Errc::invariant, "layer range of '" + slice.module + "' is out of bounds");
        }
        const auto c = stage_cost(it->second, {slice.begin, slice.end}, memory);
        if (first) {
          total = c;
          first = false;
        } else {
          total += c;
        }
      }
      if (s.layer_range.size() != 1) total.layers = {};
      s.cost = total;
    }
  }
  assign_memory(out);
  simulate_plan(out);
  return out;
}

}  // namespace mmplan
