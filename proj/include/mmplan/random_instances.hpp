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
#include <random>
#include <string>
#include <vector>

#include "mmplan/attention_mask.hpp"
#include "mmplan/context_balance.hpp"
#include "mmplan/model_graph.hpp"

namespace mmplan::random {

// Seeded generator with portable range helpers. The standard distributions
// are implementation-defined, so draws go through `below` instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool chance(std::uint64_t num, std::uint64_t den) { return below(den) < num; }

 private:
  std::mt19937_64 engine_;
};

// Times are multiples of 1/4 ms so sums stay exact in double precision.
struct ModelOptions {
  std::size_t min_encoders = 1, max_encoders = 2;
  std::size_t min_encoder_layers = 1, max_encoder_layers = 8;
  std::size_t min_projector_layers = 1, max_projector_layers = 1;
  std::size_t min_llm_layers = 1, max_llm_layers = 8;
  std::int64_t max_quarter_ms = 16;  // per-layer time at tp=1, in quarters
  std::vector<int> tp_degrees{1};
  std::uint64_t param_bytes = 1 << 20;
  std::uint64_t activation_bytes = 1 << 18;
  // frozen encoders and LLM, trainable projectors
  bool standard_freezing = true;
};

inline LayerProfile random_layer(Rng& rng, const ModelOptions& opt) {
  const double f = 0.25 * static_cast<double>(rng.range(1, opt.max_quarter_ms));
  const double bd = 0.25 * static_cast<double>(rng.range(0, opt.max_quarter_ms));
  const double bw = 0.25 * static_cast<double>(rng.range(0, opt.max_quarter_ms));
  const std::uint64_t params = opt.param_bytes * static_cast<std::uint64_t>(rng.range(1, 4));
  const std::uint64_t acts = opt.activation_bytes * static_cast<std::uint64_t>(rng.range(1, 4));
  LayerProfile layer;
  for (int tp : opt.tp_degrees) {
    // tp shards compute and bytes; 1/4 ms of collective overhead per extra degree step
    const double overhead = tp > 1 ? 0.25 : 0.0;
    const double d = static_cast<double>(tp);
    layer.forward_time[tp] = f / d + overhead;
    layer.bwd_data_time[tp] = bd / d + overhead;
    layer.bwd_weight_time[tp] = bw / d;
    layer.param_bytes[tp] = params / static_cast<std::uint64_t>(tp);
    layer.activation_bytes[tp] = acts / static_cast<std::uint64_t>(tp);
  }
  return layer;
}

inline ModuleSpec random_module(Rng& rng, const ModelOptions& opt, std::string name, ModuleKind kind,
                                std::size_t min_layers, std::size_t max_layers) {
  ModuleSpec m;
  m.name = std::move(name);
  m.kind = kind;
  const auto n = static_cast<std::size_t>(
      rng.range(static_cast<std::int64_t>(min_layers), static_cast<std::int64_t>(max_layers)));
  for (std::size_t i = 0; i < n; ++i) {
    m.layers.push_back(random_layer(rng, opt));
    m.frozen.push_back(opt.standard_freezing ? kind != ModuleKind::projector : rng.chance(1, 2));
  }
  return m;
}

inline ModelSpec random_model(Rng& rng, const ModelOptions& opt = {}) {
  ModelSpec model;
  const auto encoders = static_cast<std::size_t>(
      rng.range(static_cast<std::int64_t>(opt.min_encoders), static_cast<std::int64_t>(opt.max_encoders)));
  for (std::size_t e = 0; e < encoders; ++e) {
    const std::string name = "enc" + std::to_string(e);
    EncoderBranch b;
    b.encoder =
        random_module(rng, opt, name, ModuleKind::encoder, opt.min_encoder_layers, opt.max_encoder_layers);
    b.projector = random_module(rng, opt, name + "_proj", ModuleKind::projector, opt.min_projector_layers,
                                opt.max_projector_layers);
    model.sample.per_encoder_tokens[name] = static_cast<std::uint64_t>(rng.range(64, 1024));
    model.encoders.push_back(std::move(b));
  }
  model.llm = random_module(rng, opt, "llm", ModuleKind::llm, opt.min_llm_layers, opt.max_llm_layers);
  model.sample.text_tokens = static_cast<std::uint64_t>(rng.range(64, 1024));
  return model;
}

// A packed sequence of at most `max_tokens` tokens drawn from text and
// `modalities` encoders.
inline std::vector<Segment> random_packing(Rng& rng, std::size_t max_tokens, std::size_t modalities = 3,
                                           std::size_t max_segment = 48) {
  std::vector<Segment> segs;
  std::size_t total = 0;
  while (true) {
    const auto n = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(max_segment)));
    if (total + n > max_tokens) break;
    const auto m = rng.below(modalities + 2);
    segs.push_back({m < 2 ? std::string(kTextModality) : "enc" + std::to_string(m - 2), n});
    total += n;
  }
  if (segs.empty()) segs.push_back({std::string(kTextModality), 1});
  return segs;
}

inline std::vector<Workload> random_workloads(Rng& rng, std::size_t count, Workload max_w) {
  std::vector<Workload> w(count);
  for (auto& x : w) x = rng.below(max_w + 1);
  return w;
}

}  // namespace mmplan::random
