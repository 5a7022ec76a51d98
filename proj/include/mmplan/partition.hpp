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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mmplan/error.hpp"
#include "mmplan/model_graph.hpp"

namespace mmplan {

enum class BackwardModel {
  frozen_aware,    // B = B_w [if trainable] + B_d [if p]
  frozen_unaware,  // B = B_w + B_d everywhere
};

// A layer's cost at one tensor-parallel degree, after the backward model
// has been applied.
struct LayerCost {
  double forward_ms = 0.0;
  double backward_ms = 0.0;
  std::uint64_t param_bytes = 0;
  std::uint64_t activation_bytes = 0;
  bool trainable = false;

  double total() const { return forward_ms + backward_ms; }
};

struct MemoryConfig {
  double optimizer_multiplier = 2.0;  // optimizer state bytes per trainable parameter byte
  std::uint64_t bytes_per_param = 2;  // parameter width; gradients are stored at the same width

  void validate() const {
    if (!(optimizer_multiplier >= 0.0)) throw Error(Errc::precondition, "optimizer_multiplier must be >= 0");
    if (bytes_per_param == 0) throw Error(Errc::precondition, "bytes_per_param must be >= 1");
  }
};

// Per-layer costs of a sequence of layers with their frozen flags and p.
inline std::vector<LayerCost> layer_costs(std::span<const LayerProfile* const> layers, const std::vector<bool>& frozen,
                                          const std::vector<bool>& p, int tp, BackwardModel model) {
  std::vector<LayerCost> out;
  out.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerProfile& layer = *layers[i];
    LayerCost c;
    c.forward_ms = layer.forward(tp);
    c.backward_ms = model == BackwardModel::frozen_aware ? effective_backward_time(layer, frozen[i], p[i], tp)
                                                         : naive_backward_time(layer, tp);
    c.param_bytes = layer.params(tp);
    c.activation_bytes = layer.activations(tp);
    c.trainable = !frozen[i];
    out.push_back(c);
  }
  return out;
}

inline std::vector<LayerCost> llm_costs(const ModelSpec& model, const TrainabilityMap& p, int tp, BackwardModel bm) {
  std::vector<const LayerProfile*> layers;
  for (const auto& l : model.llm.layers) layers.push_back(&l);
  return layer_costs(layers, model.llm.frozen, p.llm, tp, bm);
}

// Encoder layers followed by its projector's layers.
inline std::vector<LayerCost> branch_costs(const ModelSpec& model, const TrainabilityMap& p, std::size_t branch, int tp,
                                           BackwardModel bm) {
  const auto& b = model.encoders[branch];
  std::vector<const LayerProfile*> layers;
  std::vector<bool> frozen;
  for (std::size_t i = 0; i < b.size(); ++i) {
    layers.push_back(&b.layer(i));
    frozen.push_back(b.frozen(i));
  }
  return layer_costs(layers, frozen, p.branch(branch), tp, bm);
}

struct LayerRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const { return end - begin; }
  friend bool operator==(const LayerRange&, const LayerRange&) = default;
  friend auto operator<=>(const LayerRange&, const LayerRange&) = default;
};

struct StageCost {
  LayerRange layers;
  double forward_ms = 0.0;
  double backward_ms = 0.0;
  std::uint64_t param_bytes = 0;
  std::uint64_t grad_bytes = 0;
  std::uint64_t optimizer_bytes = 0;
  std::uint64_t activation_bytes = 0;  // per in-flight microbatch

  double total() const { return forward_ms + backward_ms; }

  StageCost& operator+=(const StageCost& o) {
    forward_ms += o.forward_ms;
    backward_ms += o.backward_ms;
    param_bytes += o.param_bytes;
    grad_bytes += o.grad_bytes;
    optimizer_bytes += o.optimizer_bytes;
    activation_bytes += o.activation_bytes;
    return *this;
  }
};

struct StagePlan {
  std::vector<std::string> modules;
  int tp = 1;
  std::vector<StageCost> stages;

  std::size_t num_stages() const { return stages.size(); }
  std::size_t devices_per_stage() const { return static_cast<std::size_t>(tp); }

  double max_stage_time() const {
    double m = 0.0;
    for (const auto& s : stages) m = std::max(m, s.total());
    return m;
  }

  std::vector<std::size_t> boundaries() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i + 1 < stages.size(); ++i) out.push_back(stages[i].layers.end);
    return out;
  }
};

// Sums the costs of layers [begin, end) left to right.
inline StageCost stage_cost(std::span<const LayerCost> layers, LayerRange range, const MemoryConfig& memory = {}) {
  StageCost s;
  s.layers = range;
  std::uint64_t trainable = 0;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    s.forward_ms += layers[i].forward_ms;
    s.backward_ms += layers[i].backward_ms;
    s.param_bytes += layers[i].param_bytes;
    s.activation_bytes += layers[i].activation_bytes;
    if (layers[i].trainable) trainable += layers[i].param_bytes;
  }
  s.grad_bytes = trainable;
  s.optimizer_bytes = static_cast<std::uint64_t>(memory.optimizer_multiplier * static_cast<double>(trainable));
  return s;
}

// Contiguous partition of `layers` into `num_stages` stages minimizing the
// largest per-stage 1F+1B time. Among optimal partitions the
// lexicographically earliest boundary vector is returned.
inline StagePlan partition_stages(std::span<const LayerCost> layers, std::size_t num_stages, int tp,
                                  const MemoryConfig& memory = {}) {
  const std::size_t n = layers.size();
  if (num_stages == 0) throw Error(Errc::precondition, "num_stages must be >= 1");
  if (num_stages > n) {
    throw Error(Errc::precondition, "cannot split " + std::to_string(n) + " layers into " +
                                        std::to_string(num_stages) + " stages");
  }

  // cost[b][e]: 1F+1B time of layers [b, e), summed left to right.
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, 0.0));
  for (std::size_t b = 0; b < n; ++b) {
    double acc = 0.0;
    for (std::size_t e = b + 1; e <= n; ++e) {
      acc += layers[e - 1].total();
      cost[b][e] = acc;
    }
  }

  // best[k][b]: optimal bottleneck for layers [b, n) in k stages.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(num_stages + 1, std::vector<double>(n + 1, inf));
  for (std::size_t b = 0; b < n; ++b) best[1][b] = cost[b][n];
  for (std::size_t k = 2; k <= num_stages; ++k) {
    for (std::size_t b = 0; b + k <= n; ++b) {
      double v = inf;
      for (std::size_t e = b + 1; e + (k - 1) <= n; ++e) v = std::min(v, std::max(cost[b][e], best[k - 1][e]));
      best[k][b] = v;
    }
  }

  // Earliest boundary at each step that keeps the rest within the global
  // bottleneck gives the lexicographically smallest optimal vector.
  const double bound = best[num_stages][0];
  StagePlan plan;
  plan.tp = tp;
  std::size_t begin = 0;
  for (std::size_t k = num_stages; k >= 1; --k) {
    std::size_t end = n;
    if (k > 1) {
      for (end = begin + 1; end + (k - 1) <= n; ++end) {
        if (cost[begin][end] <= bound && best[k - 1][end] <= bound) break;
      }
    }
    plan.stages.push_back(stage_cost(layers, {begin, end}, memory));
    begin = end;
  }
  return plan;
}

// Stage with explicit boundaries (used when rebuilding a plan or by oracles).
inline StagePlan stages_from_boundaries(std::span<const LayerCost> layers, const std::vector<std::size_t>& boundaries,
                                        int tp, const MemoryConfig& memory = {}) {
  StagePlan plan;
  plan.tp = tp;
  std::size_t begin = 0;
  for (std::size_t i = 0; i <= boundaries.size(); ++i) {
    const std::size_t end = i < boundaries.size() ? boundaries[i] : layers.size();
    if (end <= begin || end > layers.size()) throw Error(Errc::precondition, "stage boundaries must be increasing");
    plan.stages.push_back(stage_cost(layers, {begin, end}, memory));
    begin = end;
  }
  return plan;
}

struct MemoryEstimate {
  std::uint64_t model_bytes = 0;  // parameters + gradients + optimizer states
  std::uint64_t data_bytes = 0;   // activations per microbatch x k_if
  int k_if = 1;

  std::uint64_t total() const { return model_bytes + data_bytes; }
};

inline MemoryEstimate estimate_memory(const StageCost& stage, int k_if) {
  if (k_if < 1) throw Error(Errc::precondition, "k_if must be >= 1");
  MemoryEstimate m;
  m.k_if = k_if;
  m.model_bytes = stage.param_bytes + stage.grad_bytes + stage.optimizer_bytes;
  m.data_bytes = stage.activation_bytes * static_cast<std::uint64_t>(k_if);
  return m;
}

}  // namespace mmplan
