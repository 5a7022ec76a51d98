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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmplan/model_graph.hpp"

namespace mmplan::testing {

inline LayerProfile Layer(double f, double bd, double bw, std::uint64_t params = 100, std::uint64_t acts = 10) {
  LayerProfile l;
  l.forward_time[1] = f;
  l.bwd_data_time[1] = bd;
  l.bwd_weight_time[1] = bw;
  l.param_bytes[1] = params;
  l.activation_bytes[1] = acts;
  return l;
}

inline ModuleSpec Module(std::string name, ModuleKind kind, std::vector<bool> frozen, double f = 1.0, double bd = 1.0,
                         double bw = 1.0) {
  ModuleSpec m;
  m.name = std::move(name);
  m.kind = kind;
  for (std::size_t i = 0; i < frozen.size(); ++i) m.layers.push_back(Layer(f, bd, bw));
  m.frozen = std::move(frozen);
  return m;
}

// Layer-level dataflow graph: every layer is a node, chains are edges, and
// each projector's last layer feeds the LLM's first layer.
struct LayerGraph {
  std::vector<bool> frozen;
  std::vector<std::vector<std::size_t>> preds;
  std::vector<std::vector<std::size_t>> encoder_nodes, projector_nodes;
  std::vector<std::size_t> llm_nodes;

  explicit LayerGraph(const ModelSpec& model) {
    std::vector<std::size_t> tails;
    for (const auto& b : model.encoders) {
      encoder_nodes.push_back(Chain(b.encoder, {}));
      projector_nodes.push_back(Chain(b.projector, {encoder_nodes.back().back()}));
      tails.push_back(projector_nodes.back().back());
    }
    llm_nodes = Chain(model.llm, tails);
  }

  // p(v): some trainable layer reaches v (v included).
  bool Reached(std::size_t v) const {
    std::vector<bool> seen(frozen.size(), false);
    std::vector<std::size_t> stack{v};
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      if (seen[u]) continue;
      seen[u] = true;
      if (!frozen[u]) return true;
      for (auto w : preds[u]) stack.push_back(w);
    }
    return false;
  }

 private:
  std::vector<std::size_t> Chain(const ModuleSpec& m, std::vector<std::size_t> first_preds) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < m.size(); ++i) {
      ids.push_back(frozen.size());
      frozen.push_back(m.frozen[i]);
      preds.push_back(i == 0 ? first_preds : std::vector<std::size_t>{ids[i - 1]});
    }
    return ids;
  }
};

}  // namespace mmplan::testing
