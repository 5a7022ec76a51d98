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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmplan/attention_mask.hpp"
#include "mmplan/context_balance.hpp"
#include "mmplan/error.hpp"
#include "mmplan/model_graph.hpp"
#include "mmplan/planner.hpp"
#include "mmplan/schedule_sim.hpp"

namespace mmplan::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline Json parse_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::parse, origin + ": " + e.what());
  }
}

inline Json read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::parse, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::parse, path + ": cannot open for writing");
  out << text;
  if (!out) throw Error(Errc::parse, path + ": write failed");
}

namespace detail {

inline const Json& field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw Error(Errc::parse, path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw Error(Errc::parse, path + "." + key + ": missing field");
  return *it;
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw Error(Errc::parse, path + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t count(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw Error(Errc::parse, path + ": expected a non-negative integer");
}

inline std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) throw Error(Errc::parse, path + ": expected a string");
  return j.get<std::string>();
}

inline int degree_key(const std::string& key, const std::string& path) {
  std::size_t used = 0;
  int tp = 0;
  try {
    tp = std::stoi(key, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != key.size() || tp < 1) throw Error(Errc::parse, path + ": tp key '" + key + "' is not a positive integer");
  return tp;
}

inline std::map<int, double> time_map(const Json& j, const std::string& path) {
  if (!j.is_object()) throw Error(Errc::parse, path + ": expected an object keyed by tp degree");
  std::map<int, double> out;
  for (const auto& [k, v] : j.items()) out[degree_key(k, path)] = number(v, path + "." + k);
  return out;
}

// Byte fields are either a map keyed by tp degree (per-GPU bytes) or one
// unsharded total that every degree splits evenly, rounding up.
inline std::map<int, std::uint64_t> byte_map(const Json& j, const std::map<int, double>& degrees,
                                             const std::string& path) {
  std::map<int, std::uint64_t> out;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) out[degree_key(k, path)] = count(v, path + "." + k);
    return out;
  }
  const std::uint64_t total = count(j, path);
  for (const auto& [tp, _] : degrees) {
    const auto d = static_cast<std::uint64_t>(tp);
    out[tp] = (total + d - 1) / d;
  }
  return out;
}

inline ModuleSpec module(const Json& j, std::string name, ModuleKind kind, const std::string& path) {
  ModuleSpec m;
  m.name = j.contains("name") ? text(j["name"], path + ".name") : std::move(name);
  m.kind = kind;
  const Json& layers = field(j, "layers", path);
  if (!layers.is_array()) throw Error(Errc::parse, path + ".layers: expected a list");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string lp = path + ".layers[" + std::to_string(i) + "]";
    const Json& l = layers[i];
    LayerProfile prof;
    prof.forward_time = time_map(field(l, "forward_time", lp), lp + ".forward_time");
    prof.bwd_data_time = time_map(field(l, "bwd_data_time", lp), lp + ".bwd_data_time");
    prof.bwd_weight_time = time_map(field(l, "bwd_weight_time", lp), lp + ".bwd_weight_time");
    prof.param_bytes = byte_map(field(l, "param_bytes", lp), prof.forward_time, lp + ".param_bytes");
    prof.activation_bytes = byte_map(field(l, "activation_bytes", lp), prof.forward_time, lp + ".activation_bytes");
    const std::uint64_t repeat = l.contains("repeat") ? count(l["repeat"], lp + ".repeat") : 1;
    if (repeat == 0) throw Error(Errc::parse, lp + ".repeat: must be >= 1");
    for (std::uint64_t r = 0; r < repeat; ++r) m.layers.push_back(prof);
  }
  const Json& frozen = field(j, "frozen", path);
  if (frozen.is_boolean()) {
    m.frozen.assign(m.layers.size(), frozen.get<bool>());
  } else if (frozen.is_array()) {
    for (std::size_t i = 0; i < frozen.size(); ++i) {
      if (!frozen[i].is_boolean()) throw Error(Errc::parse, path + ".frozen[" + std::to_string(i) + "]: expected a bool");
      m.frozen.push_back(frozen[i].get<bool>());
    }
  } else {
    throw Error(Errc::parse, path + ".frozen: expected a bool or a list of bools");
  }
  return m;
}

inline void check_schema(const Json& j, const char* kind, const std::string& origin) {
  if (!j.is_object()) throw Error(Errc::parse, origin + ": expected a JSON object");
  if (j.contains("schema_version")) {
    const Json& v = j["schema_version"];
    if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
      throw Error(Errc::parse, origin + ": unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }
  if (j.contains("kind") && (!j["kind"].is_string() || j["kind"].get<std::string>() != kind)) {
    throw Error(Errc::parse, origin + ": expected a '" + kind + "' document");
  }
}

}  // namespace detail

// ---- model ----

inline ModelSpec model_from_json(const Json& j, const std::string& origin = "model") {
  detail::check_schema(j, "model", origin);
  ModelSpec m;
  const Json& encoders = detail::field(j, "encoders", origin);
  if (!encoders.is_array()) throw Error(Errc::parse, origin + ".encoders: expected a list");
  for (std::size_t i = 0; i < encoders.size(); ++i) {
    const std::string ep = origin + ".encoders[" + std::to_string(i) + "]";
    const std::string name = detail::text(detail::field(encoders[i], "name", ep), ep + ".name");
    EncoderBranch b;
    b.encoder = detail::module(detail::field(encoders[i], "encoder", ep), name, ModuleKind::encoder, ep + ".encoder");
    b.encoder.name = name;
    b.projector = detail::module(detail::field(encoders[i], "projector", ep), name + "_proj", ModuleKind::projector,
                                 ep + ".projector");
    m.encoders.push_back(std::move(b));
  }
  m.llm = detail::module(detail::field(j, "llm", origin), "llm", ModuleKind::llm, origin + ".llm");
  if (j.contains("sample")) {
    const Json& s = j["sample"];
    const std::string sp = origin + ".sample";
    if (s.contains("text_tokens")) m.sample.text_tokens = detail::count(s["text_tokens"], sp + ".text_tokens");
    if (s.contains("per_encoder_tokens")) {
      const Json& pe = s["per_encoder_tokens"];
      if (!pe.is_object()) throw Error(Errc::parse, sp + ".per_encoder_tokens: expected an object");
      for (const auto& [k, v] : pe.items()) m.sample.per_encoder_tokens[k] = detail::count(v, sp + "." + k);
    }
  }
  m.validate();
  return m;
}

inline Json module_to_json(const ModuleSpec& m) {
  Json layers = Json::array();
  for (const auto& l : m.layers) {
    Json lj;
    auto times = [](const std::map<int, double>& t) {
      Json o = Json::object();
      for (const auto& [k, v] : t) o[std::to_string(k)] = v;
      return o;
    };
    auto bytes = [](const std::map<int, std::uint64_t>& t) {
      Json o = Json::object();
      for (const auto& [k, v] : t) o[std::to_string(k)] = v;
      return o;
    };
    lj["forward_time"] = times(l.forward_time);
    lj["bwd_data_time"] = times(l.bwd_data_time);
    lj["bwd_weight_time"] = times(l.bwd_weight_time);
    lj["param_bytes"] = bytes(l.param_bytes);
    lj["activation_bytes"] = bytes(l.activation_bytes);
    layers.push_back(std::move(lj));
  }
  Json out;
  out["name"] = m.name;
  out["layers"] = std::move(layers);
  out["frozen"] = m.frozen;
  return out;
}

inline Json model_to_json(const ModelSpec& m) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["kind"] = "model";
  Json enc = Json::array();
  for (const auto& b : m.encoders) {
    Json e;
    e["name"] = b.name();
    e["encoder"] = module_to_json(b.encoder);
    e["encoder"].erase("name");
    e["projector"] = module_to_json(b.projector);
    enc.push_back(std::move(e));
  }
  out["encoders"] = std::move(enc);
  out["llm"] = module_to_json(m.llm);
  Json per = Json::object();
  for (const auto& [k, v] : m.sample.per_encoder_tokens) per[k] = v;
  out["sample"] = {{"text_tokens", m.sample.text_tokens}, {"per_encoder_tokens", std::move(per)}};
  return out;
}

// ---- cluster ----

inline ClusterSpec cluster_from_json(const Json& j, const std::string& origin = "cluster") {
  detail::check_schema(j, "cluster", origin);
  ClusterSpec c;
  c.num_nodes = detail::count(detail::field(j, "num_nodes", origin), origin + ".num_nodes");
  c.gpus_per_node = detail::count(detail::field(j, "gpus_per_node", origin), origin + ".gpus_per_node");
  c.gpu_memory_bytes = detail::count(detail::field(j, "gpu_memory_bytes", origin), origin + ".gpu_memory_bytes");
  if (j.contains("tp_degrees")) {
    const Json& t = j["tp_degrees"];
    if (!t.is_array()) throw Error(Errc::parse, origin + ".tp_degrees: expected a list");
    c.tp_degrees.clear();
    for (std::size_t i = 0; i < t.size(); ++i) {
      c.tp_degrees.push_back(static_cast<int>(detail::count(t[i], origin + ".tp_degrees[" + std::to_string(i) + "]")));
    }
  }
  c.validate();
  return c;
}

inline Json cluster_to_json(const ClusterSpec& c) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["kind"] = "cluster";
  out["num_nodes"] = c.num_nodes;
  out["gpus_per_node"] = c.gpus_per_node;
  out["gpu_memory_bytes"] = c.gpu_memory_bytes;
  out["tp_degrees"] = c.tp_degrees;
  return out;
}

// ---- plan ----

inline Json plan_to_json(const ParallelPlan& plan) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["kind"] = "plan";
  out["modality_mode"] = to_string(plan.mode);
  out["llm_nodes"] = plan.llm_nodes;
  out["num_microbatches"] = plan.num_microbatches;
  out["microbatch_size"] = plan.microbatch_size;
  out["p2p_latency_ms"] = plan.p2p_latency_ms;
  Json modules = Json::array();
  for (const auto& m : plan.modules) {
    Json mj;
    mj["name"] = m.name;
    mj["role"] = m.is_llm ? "llm" : "encoder";
    if (!m.is_llm) mj["members"] = m.members;
    mj["tp"] = m.tp;
    Json stages = Json::array();
    for (const auto& s : m.stages) {
      Json sj;
      Json ranges = Json::array();
      for (const auto& r : s.layer_range) ranges.push_back({{"module", r.module}, {"begin", r.begin}, {"end", r.end}});
      sj["layer_range"] = std::move(ranges);
      sj["devices"] = s.devices;
      sj["fwd_ms"] = s.cost.forward_ms;
      sj["bwd_ms"] = s.cost.backward_ms;
      sj["model_bytes"] = s.memory.model_bytes;
      sj["data_bytes"] = s.memory.data_bytes;
      sj["k_if"] = s.memory.k_if;
      stages.push_back(std::move(sj));
    }
    mj["stages"] = std::move(stages);
    modules.push_back(std::move(mj));
  }
  out["modules"] = std::move(modules);
  out["iteration_time_ms"] = plan.iteration_time_ms;
  out["throughput"] = plan.throughput;
  out["bubble_ratio"] = plan.bubble_ratio;
  return out;
}

// Reads the fields the simulator needs. Memory figures are carried over
// as written.
inline ParallelPlan plan_from_json(const Json& j, const std::string& origin = "plan") {
  detail::check_schema(j, "plan", origin);
  ParallelPlan plan;
  const std::string mode = detail::text(detail::field(j, "modality_mode", origin), origin + ".modality_mode");
  if (mode == "colocated") {
    plan.mode = ModalityMode::colocated;
  } else if (mode == "parallel") {
    plan.mode = ModalityMode::parallel;
  } else {
    throw Error(Errc::parse, origin + ".modality_mode: expected 'colocated' or 'parallel'");
  }
  if (j.contains("llm_nodes")) plan.llm_nodes = detail::count(j["llm_nodes"], origin + ".llm_nodes");
  if (j.contains("num_microbatches")) {
    plan.num_microbatches = detail::count(j["num_microbatches"], origin + ".num_microbatches");
  }
  if (j.contains("microbatch_size")) plan.microbatch_size = detail::count(j["microbatch_size"], origin + ".microbatch_size");
  if (j.contains("p2p_latency_ms")) plan.p2p_latency_ms = detail::number(j["p2p_latency_ms"], origin + ".p2p_latency_ms");
  const Json& modules = detail::field(j, "modules", origin);
  if (!modules.is_array()) throw Error(Errc::parse, origin + ".modules: expected a list");
  std::size_t llms = 0;
  for (std::size_t i = 0; i < modules.size(); ++i) {
    const std::string mp = origin + ".modules[" + std::to_string(i) + "]";
    const Json& mj = modules[i];
    PlannedModule m;
    m.name = detail::text(detail::field(mj, "name", mp), mp + ".name");
    const std::string role = detail::text(detail::field(mj, "role", mp), mp + ".role");
    if (role != "llm" && role != "encoder") throw Error(Errc::parse, mp + ".role: expected 'llm' or 'encoder'");
    m.is_llm = role == "llm";
    llms += m.is_llm ? 1 : 0;
    if (mj.contains("members")) {
      for (const auto& x : mj["members"]) m.members.push_back(detail::text(x, mp + ".members"));
    }
    m.tp = static_cast<int>(detail::count(detail::field(mj, "tp", mp), mp + ".tp"));
    const Json& stages = detail::field(mj, "stages", mp);
    if (!stages.is_array()) throw Error(Errc::parse, mp + ".stages: expected a list");
    for (std::size_t s = 0; s < stages.size(); ++s) {
      const std::string sp = mp + ".stages[" + std::to_string(s) + "]";
      const Json& sj = stages[s];
      PlannedStage st;
      if (sj.contains("layer_range")) {
        for (const auto& r : sj["layer_range"]) {
          st.layer_range.push_back({detail::text(detail::field(r, "module", sp), sp + ".layer_range.module"),
                                    detail::count(detail::field(r, "begin", sp), sp + ".layer_range.begin"),
                                    detail::count(detail::field(r, "end", sp), sp + ".layer_range.end")});
        }
      }
      if (sj.contains("devices")) {
        for (const auto& d : sj["devices"]) st.devices.push_back(detail::count(d, sp + ".devices"));
      }
      st.cost.forward_ms = detail::number(detail::field(sj, "fwd_ms", sp), sp + ".fwd_ms");
      st.cost.backward_ms = detail::number(detail::field(sj, "bwd_ms", sp), sp + ".bwd_ms");
      if (!(st.cost.forward_ms >= 0.0) || !(st.cost.backward_ms >= 0.0)) {
        throw Error(Errc::invariant, sp + ": stage times must be >= 0");
      }
      if (sj.contains("model_bytes")) st.memory.model_bytes = detail::count(sj["model_bytes"], sp + ".model_bytes");
      if (sj.contains("data_bytes")) st.memory.data_bytes = detail::count(sj["data_bytes"], sp + ".data_bytes");
      if (sj.contains("k_if")) st.memory.k_if = static_cast<int>(detail::count(sj["k_if"], sp + ".k_if"));
      m.stages.push_back(std::move(st));
    }
    if (m.stages.empty()) throw Error(Errc::invariant, mp + ": module has no stages");
    plan.modules.push_back(std::move(m));
  }
  if (llms != 1) throw Error(Errc::invariant, origin + ": a plan needs exactly one llm module");
  if (!plan.modules.back().is_llm) throw Error(Errc::invariant, origin + ": the llm module must come last");
  if (j.contains("iteration_time_ms")) plan.iteration_time_ms = detail::number(j["iteration_time_ms"], origin);
  if (j.contains("throughput")) plan.throughput = detail::number(j["throughput"], origin);
  if (j.contains("bubble_ratio")) plan.bubble_ratio = detail::number(j["bubble_ratio"], origin);
  return plan;
}

// ---- trace ----

inline Json trace_to_json(const ScheduleTrace& trace, const std::vector<int>& k_if) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["kind"] = "trace";
  out["modules"] = trace.module_names;
  Json devices = Json::array();
  for (std::size_t d = 0; d < trace.devices.size(); ++d) {
    devices.push_back({{"device", trace.device_names[d]}, {"module", trace.module_names[trace.device_module[d]]}});
  }
  out["devices"] = std::move(devices);
  Json events = Json::array();
  for (std::size_t d = 0; d < trace.devices.size(); ++d) {
    for (const auto& e : trace.devices[d]) {
      events.push_back({{"device", trace.device_names[d]},
                        {"task_kind", to_string(e.kind)},
                        {"stage", e.stage},
                        {"microbatch", e.microbatch},
                        {"start_ms", e.start_ms},
                        {"end_ms", e.end_ms}});
    }
  }
  out["events"] = std::move(events);
  out["summary"] = {{"iteration_time_ms", trace.iteration_time_ms},
                    {"bubble_ratio", trace.bubble_ratio},
                    {"k_if", k_if},
                    {"peak_inflight", trace.peak_inflight}};
  return out;
}

inline ScheduleTrace trace_from_json(const Json& j, const std::string& origin = "trace") {
  detail::check_schema(j, "trace", origin);
  ScheduleTrace t;
  for (const auto& m : detail::field(j, "modules", origin)) t.module_names.push_back(detail::text(m, origin + ".modules"));
  const Json& devices = detail::field(j, "devices", origin);
  std::map<std::string, std::size_t> index;
  for (std::size_t d = 0; d < devices.size(); ++d) {
    const std::string dp = origin + ".devices[" + std::to_string(d) + "]";
    const std::string name = detail::text(detail::field(devices[d], "device", dp), dp + ".device");
    const std::string module = detail::text(detail::field(devices[d], "module", dp), dp + ".module");
    auto it = std::find(t.module_names.begin(), t.module_names.end(), module);
    if (it == t.module_names.end()) throw Error(Errc::invariant, dp + ": unknown module '" + module + "'");
    if (!index.emplace(name, d).second) throw Error(Errc::invariant, dp + ": duplicate device '" + name + "'");
    t.device_names.push_back(name);
    t.device_module.push_back(static_cast<std::size_t>(it - t.module_names.begin()));
  }
  t.devices.resize(t.device_names.size());
  const Json& events = detail::field(j, "events", origin);
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::string ep = origin + ".events[" + std::to_string(i) + "]";
    const Json& e = events[i];
    const std::string dev = detail::text(detail::field(e, "device", ep), ep + ".device");
    auto it = index.find(dev);
    if (it == index.end()) throw Error(Errc::invariant, ep + ": unknown device '" + dev + "'");
    TaskEvent ev;
    const std::string kind = detail::text(detail::field(e, "task_kind", ep), ep + ".task_kind");
    if (kind != "forward" && kind != "backward") throw Error(Errc::parse, ep + ".task_kind: expected forward/backward");
    ev.kind = kind == "forward" ? TaskKind::forward : TaskKind::backward;
    ev.stage = detail::count(detail::field(e, "stage", ep), ep + ".stage");
    ev.microbatch = detail::count(detail::field(e, "microbatch", ep), ep + ".microbatch");
    ev.start_ms = detail::number(detail::field(e, "start_ms", ep), ep + ".start_ms");
    ev.end_ms = detail::number(detail::field(e, "end_ms", ep), ep + ".end_ms");
    if (!(ev.end_ms >= ev.start_ms) || !(ev.start_ms >= 0.0)) {
      throw Error(Errc::invariant, ep + ": event must satisfy 0 <= start_ms <= end_ms");
    }
    t.devices[it->second].push_back(ev);
  }
  const Json& summary = detail::field(j, "summary", origin);
  t.iteration_time_ms = detail::number(detail::field(summary, "iteration_time_ms", origin + ".summary"),
                                       origin + ".summary.iteration_time_ms");
  if (summary.contains("bubble_ratio")) t.bubble_ratio = detail::number(summary["bubble_ratio"], origin);
  t.peak_inflight = measured_peak_inflight(t);
  return t;
}

// ---- mask ----

struct MaskDocument {
  BitfieldMask mask;
  std::size_t block_size = 128;
};

inline MaskDocument mask_from_json(const Json& j, const std::string& origin = "mask") {
  detail::check_schema(j, "mask", origin);
  MaskDocument doc;
  if (j.contains("block_size")) {
    doc.block_size = detail::count(j["block_size"], origin + ".block_size");
    if (doc.block_size == 0) throw Error(Errc::invariant, origin + ".block_size: must be >= 1");
  }
  const bool has_segments = j.contains("segments"), has_raw = j.contains("descriptors");
  if (has_segments == has_raw) throw Error(Errc::parse, origin + ": expected exactly one of 'segments' or 'descriptors'");
  if (has_segments) {
    std::vector<Segment> segs;
    const Json& s = j["segments"];
    if (!s.is_array()) throw Error(Errc::parse, origin + ".segments: expected a list");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string sp = origin + ".segments[" + std::to_string(i) + "]";
      segs.push_back({detail::text(detail::field(s[i], "modality", sp), sp + ".modality"),
                      detail::count(detail::field(s[i], "count", sp), sp + ".count")});
    }
    try {
      doc.mask = build_bitfield(segs);
    } catch (const Error& e) {
      throw Error(Errc::invariant, origin + ": " + e.what());
    }
  } else {
    std::vector<std::uint64_t> d;
    const Json& r = j["descriptors"];
    if (!r.is_array()) throw Error(Errc::parse, origin + ".descriptors: expected a list");
    for (std::size_t i = 0; i < r.size(); ++i) d.push_back(detail::count(r[i], origin + ".descriptors"));
    doc.mask = BitfieldMask(std::move(d));
  }
  return doc;
}

inline Json segments_to_json(const std::vector<Segment>& segs, std::size_t block_size) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["kind"] = "mask";
  out["block_size"] = block_size;
  Json s = Json::array();
  for (const auto& seg : segs) s.push_back({{"modality", seg.modality}, {"count", seg.count}});
  out["segments"] = std::move(s);
  return out;
}

// ---- balance report ----

inline Json report_to_json(const BlockWorkload& w, const BalanceReport& r) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["kind"] = "cp-report";
  out["N_B"] = w.block_size;
  out["num_blocks"] = w.num_blocks;
  out["W"] = w.workloads;
  out["classification"] = w.run_length_rows();
  out["gpus"] = r.gpus;
  out["compute_units"] = r.intra.compute_units;
  out["subblock_size"] = r.intra.subblock_size;
  out["alpha"] = r.intra.alpha;
  out["beta"] = r.intra.beta;
  Json policies = Json::array();
  for (const auto& p : r.policies) {
    Json pj;
    pj["name"] = p.name;
    pj["subblocked"] = p.subblocked;
    pj["blocks"] = p.assignment.blocks;
    pj["loads"] = p.assignment.loads;
    pj["makespan"] = p.assignment.makespan();
    pj["imbalance"] = p.assignment.imbalance();
    pj["compute_makespan"] = p.compute_makespan();
    pj["aggregation_cost"] = p.aggregation_cost();
    pj["total"] = p.total();
    policies.push_back(std::move(pj));
  }
  out["policies"] = std::move(policies);
  if (r.has_optimum) {
    out["optimum"] = {{"blocks", r.optimum.blocks}, {"loads", r.optimum.loads}, {"makespan", r.optimum.makespan()}};
  }
  return out;
}

}  // namespace mmplan::io
