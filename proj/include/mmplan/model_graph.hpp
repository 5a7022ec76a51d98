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
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmplan/error.hpp"

namespace mmplan {

// Per-layer costs, each keyed by tensor-parallel degree. Times are
// milliseconds per microbatch; byte counts are per GPU at that degree.
struct LayerProfile {
  std::map<int, double> forward_time;
  std::map<int, double> bwd_data_time;
  std::map<int, double> bwd_weight_time;
  std::map<int, std::uint64_t> param_bytes;
  std::map<int, std::uint64_t> activation_bytes;

  bool has_degree(int tp) const { return forward_time.count(tp) != 0; }

  std::vector<int> degrees() const {
    std::vector<int> out;
    out.reserve(forward_time.size());
    for (const auto& [tp, _] : forward_time) out.push_back(tp);
    return out;
  }

  double forward(int tp) const { return at(forward_time, tp); }
  double bwd_data(int tp) const { return at(bwd_data_time, tp); }
  double bwd_weight(int tp) const { return at(bwd_weight_time, tp); }
  std::uint64_t params(int tp) const { return at(param_bytes, tp); }
  std::uint64_t activations(int tp) const { return at(activation_bytes, tp); }

  // Throws Errc::invariant with `where` prefixed to the message.
  void validate(const std::string& where) const {
    if (forward_time.empty()) throw Error(Errc::invariant, where + ": no tensor-parallel degree profiled");
    for (const auto& [tp, _] : forward_time) {
      if (tp <= 0 || (tp & (tp - 1)) != 0) {
        throw Error(Errc::invariant, where + ": tensor-parallel degree " + std::to_string(tp) +
                                         " is not a positive power of two");
      }
    }
    auto same_keys = [&](const auto& m, const char* field) {
      bool ok = m.size() == forward_time.size();
      if (ok) {
        for (const auto& [tp, _] : forward_time) ok = ok && m.count(tp) != 0;
      }
      if (!ok) {
        throw Error(Errc::invariant, where + ": field '" + field +
                                         "' does not cover the same tensor-parallel degrees as 'forward_time'");
      }
    };
    same_keys(bwd_data_time, "bwd_data_time");
    same_keys(bwd_weight_time, "bwd_weight_time");
    same_keys(param_bytes, "param_bytes");
    same_keys(activation_bytes, "activation_bytes");
    auto non_negative = [&](const std::map<int, double>& m, const char* field) {
      for (const auto& [tp, v] : m) {
        if (!(v >= 0.0)) {
          throw Error(Errc::invariant, where + ": field '" + field + "' at tp=" + std::to_string(tp) +
                                           " must be a non-negative time");
        }
      }
    };
    non_negative(forward_time, "forward_time");
    non_negative(bwd_data_time, "bwd_data_time");
    non_negative(bwd_weight_time, "bwd_weight_time");
  }

 private:
  template <typename V>
  static V at(const std::map<int, V>& m, int tp) {
    auto it = m.find(tp);
    if (it == m.end()) {
      throw Error(Errc::precondition, "tensor-parallel degree " + std::to_string(tp) + " is not profiled");
    }
    return it->second;
  }
};

enum class ModuleKind { encoder, projector, llm };

inline const char* to_string(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::encoder: return "encoder";
    case ModuleKind::projector: return "projector";
    case ModuleKind::llm: return "llm";
  }
  return "unknown";
}

struct ModuleSpec {
  std::string name;
  ModuleKind kind = ModuleKind::llm;
  std::vector<LayerProfile> layers;
  std::vector<bool> frozen;

  std::size_t size() const { return layers.size(); }

  bool profiled_at(int tp) const {
    for (const auto& layer : layers) {
      if (!layer.has_degree(tp)) return false;
    }
    return !layers.empty();
  }

  void validate() const {
    const std::string where = "module '" + name + "'";
    if (layers.empty()) throw Error(Errc::invariant, where + ": must have at least one layer");
    if (frozen.size() != layers.size()) {
      throw Error(Errc::invariant, where + ": frozen list has " + std::to_string(frozen.size()) +
                                       " entries but the module has " + std::to_string(layers.size()) + " layers");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].validate(where + " layer " + std::to_string(i));
    }
  }
};

// An encoder and the projector that maps its output into the LLM's
// embedding space. Dataflow is encoder -> projector -> LLM.
struct EncoderBranch {
  ModuleSpec encoder;
  ModuleSpec projector;

  const std::string& name() const { return encoder.name; }
  std::size_t size() const { return encoder.size() + projector.size(); }

  // Layer `i` of the concatenated encoder+projector sequence.
  const LayerProfile& layer(std::size_t i) const {
    return i < encoder.size() ? encoder.layers[i] : projector.layers[i - encoder.size()];
  }
  bool frozen(std::size_t i) const {
    return i < encoder.size() ? encoder.frozen[i] : projector.frozen[i - encoder.size()];
  }
};

struct SampleTokens {
  std::uint64_t text_tokens = 0;
  std::map<std::string, std::uint64_t> per_encoder_tokens;
};

// Modality encoders fanning into a single LLM.
struct ModelSpec {
  std::vector<EncoderBranch> encoders;
  ModuleSpec llm;
  SampleTokens sample;

  std::size_t num_modules() const { return encoders.size() * 2 + 1; }

  void validate() const {
    if (encoders.empty()) throw Error(Errc::invariant, "model: at least one encoder is required");
    if (llm.kind != ModuleKind::llm) throw Error(Errc::invariant, "model: llm module has wrong kind");
    std::map<std::string, int> names;
    for (const auto& branch : encoders) {
      if (branch.encoder.kind != ModuleKind::encoder || branch.projector.kind != ModuleKind::projector) {
        throw Error(Errc::invariant, "model: encoder '" + branch.name() + "' has mis-typed modules");
      }
      branch.encoder.validate();
      branch.projector.validate();
      if (++names[branch.encoder.name] > 1) {
        throw Error(Errc::invariant, "model: duplicate encoder name '" + branch.encoder.name + "'");
      }
    }
    llm.validate();
    for (const auto& [name, _] : sample.per_encoder_tokens) {
      if (names.count(name) == 0) {
        throw Error(Errc::invariant, "model: sample references unknown encoder '" + name + "'");
      }
    }
  }
};

// p(L) for every layer: whether a trainable layer precedes it (or is it)
// along some dataflow path, so that it must produce input gradients.
struct TrainabilityMap {
  std::vector<std::vector<bool>> encoders;
  std::vector<std::vector<bool>> projectors;
  std::vector<bool> llm;

  // p over the concatenated encoder+projector sequence of one branch.
  std::vector<bool> branch(std::size_t i) const {
    std::vector<bool> out = encoders[i];
    out.insert(out.end(), projectors[i].begin(), projectors[i].end());
    return out;
  }
};

namespace detail {

inline std::vector<bool> propagate(const std::vector<bool>& frozen, bool upstream) {
  std::vector<bool> p(frozen.size());
  bool carry = upstream;
  for (std::size_t l = 0; l < frozen.size(); ++l) {
    carry = carry || !frozen[l];
    p[l] = carry;
  }
  return p;
}

}  // namespace detail

// Forward propagation of trainability. Each encoder chain starts from
// p(L_0) = not f(L_0); the LLM's first layer ORs in every incoming chain.
inline TrainabilityMap compute_trainability(const ModelSpec& model) {
  TrainabilityMap map;
  bool into_llm = false;
  for (const auto& branch : model.encoders) {
    auto enc = detail::propagate(branch.encoder.frozen, false);
    auto proj = detail::propagate(branch.projector.frozen, !enc.empty() && enc.back());
    into_llm = into_llm || (!proj.empty() && proj.back());
    map.encoders.push_back(std::move(enc));
    map.projectors.push_back(std::move(proj));
  }
  map.llm = detail::propagate(model.llm.frozen, into_llm);
  return map;
}

// B = (B_w if not frozen) + (B_d if p).
inline double effective_backward_time(const LayerProfile& layer, bool frozen, bool p, int tp) {
  const double weight = layer.bwd_weight(tp);
  const double data = layer.bwd_data(tp);
  return (frozen ? 0.0 : weight) + (p ? data : 0.0);
}

// Baseline that ignores frozen status: every layer pays both terms.
inline double naive_backward_time(const LayerProfile& layer, int tp) {
  return layer.bwd_weight(tp) + layer.bwd_data(tp);
}

}  // namespace mmplan
