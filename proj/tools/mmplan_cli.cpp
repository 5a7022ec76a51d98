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

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmplan/attention_mask.hpp"
#include "mmplan/context_balance.hpp"
#include "mmplan/error.hpp"
#include "mmplan/gantt.hpp"
#include "mmplan/io.hpp"
#include "mmplan/planner.hpp"
#include "mmplan/random_instances.hpp"
#include "mmplan/schedule_sim.hpp"

namespace {

// Exit codes. Stable; documented in the README.
enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,       // bad flags or values outside an operation's domain
  kParse = 3,       // unreadable or malformed document
  kInvariant = 4,   // document parsed but violates a domain invariant
  kInfeasible = 5,  // no plan fits
};

int exit_code(mmplan::Errc code) {
  switch (code) {
    case mmplan::Errc::parse: return kParse;
    case mmplan::Errc::invariant: return kInvariant;
    case mmplan::Errc::precondition: return kUsage;
    case mmplan::Errc::budget: return kUsage;
    case mmplan::Errc::infeasible: return kInfeasible;
  }
  return kInternal;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
  } else {
    mmplan::io::write_file(path, text);
  }
}

struct PlanArgs {
  std::string model, cluster, output;
  std::size_t microbatches = 8;
  std::size_t microbatch_size = 1;
  double optimizer_multiplier = 2.0;
  std::uint64_t bytes_per_param = 2;
  double p2p_latency_ms = 0.0;
  bool frozen_unaware = false;
  std::uint64_t boundary_budget = 4096;
};

void run_plan(const PlanArgs& a) {
  mmplan::PlannerOptions opt;
  opt.num_microbatches = a.microbatches;
  opt.microbatch_size = a.microbatch_size;
  opt.memory.optimizer_multiplier = a.optimizer_multiplier;
  opt.memory.bytes_per_param = a.bytes_per_param;
  opt.p2p_latency_ms = a.p2p_latency_ms;
  opt.boundary_budget = a.boundary_budget;
  opt.backward = a.frozen_unaware ? mmplan::BackwardModel::frozen_unaware : mmplan::BackwardModel::frozen_aware;
  opt.validate();

  const auto model = mmplan::io::model_from_json(mmplan::io::read_file(a.model), a.model);
  const auto cluster = mmplan::io::cluster_from_json(mmplan::io::read_file(a.cluster), a.cluster);
  const auto plan = mmplan::plan(model, cluster, opt);
  emit(a.output, mmplan::io::dump(mmplan::io::plan_to_json(plan)));
  std::fprintf(stderr, "plan: %s, llm on %zu node(s), %zu stages, iteration %.6g ms, %.6g samples/s\n",
               mmplan::to_string(plan.mode), plan.llm_nodes, plan.total_stages(), plan.iteration_time_ms,
               plan.throughput);
}

struct SimulateArgs {
  std::string plan, output, summary;
  std::optional<std::size_t> microbatches;
  std::optional<double> p2p_latency_ms;
};

void run_simulate(const SimulateArgs& a) {
  if (a.microbatches && *a.microbatches == 0) throw mmplan::Error(mmplan::Errc::precondition, "--microbatches must be >= 1");
  if (a.p2p_latency_ms && !(*a.p2p_latency_ms >= 0.0)) {
    throw mmplan::Error(mmplan::Errc::precondition, "--p2p-latency-ms must be >= 0");
  }
  auto plan = mmplan::io::plan_from_json(mmplan::io::read_file(a.plan), a.plan);
  if (a.microbatches) plan.num_microbatches = *a.microbatches;
  if (a.p2p_latency_ms) plan.p2p_latency_ms = *a.p2p_latency_ms;
  if (plan.num_microbatches == 0) throw mmplan::Error(mmplan::Errc::invariant, a.plan + ": num_microbatches must be >= 1");
  const auto layout = mmplan::layout_of(plan);
  const auto k_if = mmplan::inflight_microbatches(layout);
  const auto trace = mmplan::simulate_1f1b(layout, plan.num_microbatches);

  mmplan::io::Json summary;
  summary["schema_version"] = mmplan::io::kSchemaVersion;
  summary["kind"] = "simulate-summary";
  summary["num_microbatches"] = plan.num_microbatches;
  summary["iteration_time_ms"] = trace.iteration_time_ms;
  summary["bubble_ratio"] = trace.bubble_ratio;
  summary["throughput"] = mmplan::throughput_of(plan.num_microbatches, plan.microbatch_size, trace.iteration_time_ms);
  summary["k_if"] = k_if;
  summary["peak_inflight"] = trace.peak_inflight;
  if (!a.output.empty()) mmplan::io::write_file(a.output, mmplan::io::dump(mmplan::io::trace_to_json(trace, k_if)));
  emit(a.summary, mmplan::io::dump(summary));
}

struct CpArgs {
  std::string mask, segments, output;
  std::optional<std::size_t> block_size;
  std::size_t gpus = 4;
  std::size_t compute_units = 4;
  std::uint64_t subblock_size = 2;
  double alpha = 0.25, beta = 0.5;
  bool ilp = false;
};

// "text:128,A:256,text:64"
std::vector<mmplan::Segment> parse_segments(const std::string& spec) {
  std::vector<mmplan::Segment> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw mmplan::Error(mmplan::Errc::parse, "--segments: expected modality:count, got '" + item + "'");
    }
    std::size_t used = 0;
    unsigned long long n = 0;
    try {
      n = std::stoull(item.substr(colon + 1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() - colon - 1) {
      throw mmplan::Error(mmplan::Errc::parse, "--segments: bad count in '" + item + "'");
    }
    out.push_back({item.substr(0, colon), static_cast<std::size_t>(n)});
  }
  if (out.empty()) throw mmplan::Error(mmplan::Errc::parse, "--segments: empty");
  return out;
}

void run_cp(const CpArgs& a) {
  if (a.gpus == 0) throw mmplan::Error(mmplan::Errc::precondition, "--gpus must be >= 1");
  if (a.block_size && *a.block_size == 0) throw mmplan::Error(mmplan::Errc::precondition, "--block-size must be >= 1");
  const mmplan::IntraCostModel intra{a.compute_units, a.subblock_size, a.alpha, a.beta};
  intra.validate();
  if (a.mask.empty() == a.segments.empty()) {
    throw mmplan::Error(mmplan::Errc::precondition, "give exactly one of --mask or --segments");
  }

  mmplan::io::MaskDocument doc;
  if (!a.mask.empty()) {
    doc = mmplan::io::mask_from_json(mmplan::io::read_file(a.mask), a.mask);
  } else {
    try {
      doc.mask = mmplan::build_bitfield(parse_segments(a.segments));
    } catch (const mmplan::Error& e) {
      throw mmplan::Error(e.code() == mmplan::Errc::parse ? mmplan::Errc::parse : mmplan::Errc::invariant, e.what());
    }
  }
  if (a.block_size) doc.block_size = *a.block_size;
  const auto w = mmplan::block_workloads(doc.mask, doc.block_size);
  const auto report = mmplan::balance_report(w.workloads, a.gpus, intra, a.ilp);
  emit(a.output, mmplan::io::dump(mmplan::io::report_to_json(w, report)));
}

struct GanttArgs {
  std::string trace, output;
};

void run_gantt(const GanttArgs& a) {
  const auto trace = mmplan::io::trace_from_json(mmplan::io::read_file(a.trace), a.trace);
  emit(a.output, mmplan::render_gantt(trace));
}

struct GenArgs {
  std::string kind = "model", output;
  std::uint64_t seed = 0;
  std::size_t encoders = 2, encoder_layers = 8, llm_layers = 8;
  std::vector<int> tp{1, 2};
  std::size_t tokens = 512, modalities = 3, block_size = 16;
  bool random_freezing = false;
};

void run_gen(const GenArgs& a) {
  mmplan::random::Rng rng(a.seed);
  if (a.kind == "model") {
    if (a.encoders == 0 || a.encoder_layers == 0 || a.llm_layers == 0) {
      throw mmplan::Error(mmplan::Errc::precondition, "--encoders and layer counts must be >= 1");
    }
    for (int tp : a.tp) {
      if (tp < 1 || (tp & (tp - 1)) != 0) throw mmplan::Error(mmplan::Errc::precondition, "--tp values must be powers of two");
    }
    mmplan::random::ModelOptions opt;
    opt.min_encoders = opt.max_encoders = a.encoders;
    opt.max_encoder_layers = a.encoder_layers;
    opt.max_llm_layers = a.llm_layers;
    opt.tp_degrees = a.tp;
    opt.standard_freezing = !a.random_freezing;
    const auto model = mmplan::random::random_model(rng, opt);
    emit(a.output, mmplan::io::dump(mmplan::io::model_to_json(model)));
  } else if (a.kind == "mask") {
    if (a.tokens == 0 || a.block_size == 0) {
      throw mmplan::Error(mmplan::Errc::precondition, "--tokens and --block-size must be >= 1");
    }
    if (a.modalities > mmplan::kMaxModalities) {
      throw mmplan::Error(mmplan::Errc::precondition, "--modalities must be <= 60");
    }
    const auto segs = mmplan::random::random_packing(rng, a.tokens, a.modalities);
    emit(a.output, mmplan::io::dump(mmplan::io::segments_to_json(segs, a.block_size)));
  } else {
    throw mmplan::Error(mmplan::Errc::precondition, "--kind must be 'model' or 'mask'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmplan: pipeline planning, 1F1B simulation and context-parallel balancing for multimodal LLM training"};
  app.require_subcommand(1);

  PlanArgs pa;
  auto* plan = app.add_subcommand("plan", "search the best parallel plan for a model on a cluster");
  plan->add_option("--model", pa.model, "model-spec document")->required();
  plan->add_option("--cluster", pa.cluster, "cluster document")->required();
  plan->add_option("-M,--microbatches", pa.microbatches, "microbatches per iteration");
  plan->add_option("--microbatch-size", pa.microbatch_size, "samples per microbatch");
  plan->add_option("--optimizer-multiplier", pa.optimizer_multiplier, "optimizer bytes per trainable parameter byte");
  plan->add_option("--bytes-per-param", pa.bytes_per_param, "parameter width in bytes");
  plan->add_option("--p2p-latency-ms", pa.p2p_latency_ms, "latency added to every cross-stage edge");
  plan->add_flag("--frozen-unaware", pa.frozen_unaware, "charge bwd_data + bwd_weight on every layer");
  plan->add_option("--boundary-budget", pa.boundary_budget, "max boundary combinations searched per configuration");
  plan->add_option("-o,--output", pa.output, "plan document path (default stdout)");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "simulate a plan under 1F1B");
  sim->add_option("--plan", sa.plan, "plan document")->required();
  sim->add_option("-M,--microbatches", sa.microbatches, "override the plan's microbatch count");
  sim->add_option("--p2p-latency-ms", sa.p2p_latency_ms, "override the plan's p2p latency");
  sim->add_option("-o,--output", sa.output, "trace document path");
  sim->add_option("--summary", sa.summary, "summary path (default stdout)");

  CpArgs ca;
  auto* cp = app.add_subcommand("cp-distribute", "compare context-parallel block distributions");
  cp->add_option("--mask", ca.mask, "mask document");
  cp->add_option("--segments", ca.segments, "inline packing, e.g. text:128,img:256,text:64");
  cp->add_option("--block-size", ca.block_size, "tokens per block (default: document value or 128)");
  cp->add_option("-G,--gpus", ca.gpus, "GPUs");
  cp->add_option("-C,--compute-units", ca.compute_units, "compute units per GPU");
  cp->add_option("-s,--subblock-size", ca.subblock_size, "key blocks per subblock");
  cp->add_option("--alpha", ca.alpha, "aggregation cost per extra subblock");
  cp->add_option("--beta", ca.beta, "aggregation cost per split query block");
  cp->add_flag("--ilp", ca.ilp, "also run the exact oracle (<= 14 blocks, <= 4 GPUs)");
  cp->add_option("-o,--output", ca.output, "report path (default stdout)");

  GanttArgs ga;
  auto* gantt = app.add_subcommand("gantt", "render a trace as SVG");
  gantt->add_option("--trace", ga.trace, "trace document")->required();
  gantt->add_option("-o,--output", ga.output, "SVG path (default stdout)");

  GenArgs ge;
  auto* gen = app.add_subcommand("gen", "generate a seeded synthetic fixture");
  gen->add_option("--kind", ge.kind, "model or mask");
  gen->add_option("--seed", ge.seed, "64-bit seed");
  gen->add_option("--encoders", ge.encoders, "encoder count (model)");
  gen->add_option("--encoder-layers", ge.encoder_layers, "max encoder layers (model)");
  gen->add_option("--llm-layers", ge.llm_layers, "max LLM layers (model)");
  gen->add_option("--tp", ge.tp, "profiled tp degrees (model)")->delimiter(',');
  gen->add_flag("--random-freezing", ge.random_freezing, "random frozen flags instead of frozen encoders+LLM");
  gen->add_option("--tokens", ge.tokens, "max packed tokens (mask)");
  gen->add_option("--modalities", ge.modalities, "encoder modalities (mask)");
  gen->add_option("--block-size", ge.block_size, "block size written into the mask document");
  gen->add_option("-o,--output", ge.output, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*plan) run_plan(pa);
    if (*sim) run_simulate(sa);
    if (*cp) run_cp(ca);
    if (*gantt) run_gantt(ga);
    if (*gen) run_gen(ge);
  } catch (const mmplan::Error& e) {
    std::fprintf(stderr, "mmplan: %s: %s\n", mmplan::to_string(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mmplan: internal error: %s\n", e.what());
    return kInternal;
  }
  return kOk;
}
