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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any of them fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "../cli_runner.hpp"
#include "../planner_oracle.hpp"
#include "../test_support.hpp"
#include "mmplan/attention_mask.hpp"
#include "mmplan/context_balance.hpp"
#include "mmplan/io.hpp"
#include "mmplan/model_graph.hpp"
#include "mmplan/partition.hpp"
#include "mmplan/planner.hpp"
#include "mmplan/random_instances.hpp"
#include "mmplan/schedule_sim.hpp"

namespace {

using mmplan::Workload;
using mmplan::random::Rng;

struct Outcome {
  bool pass = true;
  std::string detail;
  double limit_s = 0.0;  // 0: no runtime bound
};

int failures = 0;

void Run(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.limit_s > 0.0 && secs >= o.limit_s) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(o.limit_s)) + " s limit";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %2d: %s  %s [%s] (%.2f s)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string Join(const std::vector<Workload>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + "}";
}

// Exact P||Cmax by depth-first search, heaviest job first, skipping machines
// whose load equals an earlier machine's.
Workload OptimalMakespan(std::vector<Workload> w, std::size_t gpus) {
  std::sort(w.rbegin(), w.rend());
  std::vector<Workload> load(gpus, 0);
  Workload best = std::accumulate(w.begin(), w.end(), Workload{0});
  auto rec = [&](auto&& self, std::size_t i, Workload worst) -> void {
    if (worst >= best) return;
    if (i == w.size()) {
      best = worst;
      return;
    }
    for (std::size_t g = 0; g < gpus; ++g) {
      bool seen = false;
      for (std::size_t h = 0; h < g; ++h) seen = seen || load[h] == load[g];
      if (seen) continue;
      load[g] += w[i];
      self(self, i + 1, std::max(worst, load[g]));
      load[g] -= w[i];
    }
  };
  rec(rec, 0, 0);
  return best;
}

// Classifies every block straight from materialize.
std::vector<Workload> BruteWorkloads(const mmplan::BitfieldMask& mask, std::size_t nb_size,
                                     std::vector<mmplan::BlockClass>& classes) {
  const std::size_t T = mask.size();
  const std::size_t nb = (T + nb_size - 1) / nb_size;
  std::vector<Workload> out(nb, 0);
  classes.assign(nb * nb, mmplan::BlockClass::skip);
  for (std::size_t qb = 0; qb < nb; ++qb) {
    for (std::size_t kb = 0; kb < nb; ++kb) {
      std::size_t yes = 0, cells = 0;
      for (std::size_t q = qb * nb_size; q < std::min(T, (qb + 1) * nb_size); ++q) {
        for (std::size_t k = kb * nb_size; k < std::min(T, (kb + 1) * nb_size); ++k) {
          ++cells;
          yes += mmplan::materialize(mask, q, k) ? 1 : 0;
        }
      }
      if (yes == 0) continue;
      classes[qb * nb + kb] = yes == cells ? mmplan::BlockClass::full : mmplan::BlockClass::partial;
      ++out[qb];
    }
  }
  return out;
}

// Lexicographically first optimal contiguous partition by enumeration.
std::pair<double, std::vector<std::size_t>> BestContiguous(const std::vector<mmplan::LayerCost>& layers, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> arg;
  for (const auto& cut : mmplan::testing::AllBoundaries(layers.size(), k)) {
    double worst = 0.0;
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= cut.size(); ++i) {
      const std::size_t end = i < cut.size() ? cut[i] : layers.size();
      double t = 0.0;
      for (std::size_t l = begin; l < end; ++l) t += layers[l].forward_ms + layers[l].backward_ms;
      worst = std::max(worst, t);
      begin = end;
    }
    if (worst < best) {
      best = worst;
      arg = cut;
    }
  }
  return {best, arg};
}

const std::vector<Workload> kIrregular{1, 2, 2, 4, 5, 2, 2, 8};

Outcome IrregularMask() {
  Outcome o{true, "", 1.0};
  const std::vector<mmplan::Segment> segs{{"text", 128}, {"A", 256}, {"text", 256}, {"B", 256}, {"text", 128}};
  const auto w = mmplan::block_workloads(mmplan::build_bitfield(segs), 128);
  const auto zz = mmplan::zigzag_distribute(w.workloads.size(), 4, w.workloads);
  const auto lpt = mmplan::lpt_distribute(w.workloads, 4);
  const auto ilp = mmplan::ilp_optimal(w.workloads, 4);
  auto sorted = zz.loads;
  std::sort(sorted.begin(), sorted.end());
  o.pass = w.workloads == kIrregular && sorted == std::vector<Workload>{4, 4, 9, 9} && lpt.makespan() == 8 &&
           ilp.makespan() == 8 && OptimalMakespan(w.workloads, 4) == 8;
  o.detail = "W=" + Join(w.workloads) + " zigzag=" + Join(zz.loads) + " lpt=" + std::to_string(lpt.makespan()) +
             " ilp=" + std::to_string(ilp.makespan());
  return o;
}

Outcome LptGuarantees() {
  Outcome o{true, "", 60.0};
  Rng rng(20260101);
  int additive = 0, ratio = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Workload> w(static_cast<std::size_t>(rng.range(1, 64)));
    for (auto& x : w) x = static_cast<Workload>(rng.range(0, 64));
    const auto G = static_cast<std::size_t>(rng.range(1, 8));
    const Workload sum = std::accumulate(w.begin(), w.end(), Workload{0});
    const Workload heaviest = *std::max_element(w.begin(), w.end());
    // makespan <= sum/G + max, cleared of the division
    if (mmplan::lpt_distribute(w, G).makespan() * G > sum + heaviest * G) ++additive;
  }
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Workload> w(static_cast<std::size_t>(rng.range(1, 14)));
    for (auto& x : w) x = static_cast<Workload>(rng.range(0, 64));
    const auto G = static_cast<std::size_t>(rng.range(1, 4));
    const Workload opt = OptimalMakespan(w, G);
    if (mmplan::ilp_optimal(w, G).makespan() != opt) ++ratio;
    // lpt <= (4/3 - 1/(3G)) opt  <=>  3G lpt <= (4G - 1) opt
    if (3 * G * mmplan::lpt_distribute(w, G).makespan() > (4 * G - 1) * opt) ++ratio;
  }
  o.pass = additive == 0 && ratio == 0;
  o.detail = "additive bound violations " + std::to_string(additive) + "/1000, ratio bound or oracle mismatches " +
             std::to_string(ratio) + "/200";
  return o;
}

Outcome FrozenFormula() {
  Outcome o;
  int bad = 0;
  const auto model = mmplan::io::model_from_json(mmplan::io::read_file(mmplan::testing::kFixtureDir + "/vlm-small.json"));
  const auto p = mmplan::compute_trainability(model);
  for (int tp : {1, 2, 4}) {
    const auto& b = model.encoders[0];
    for (std::size_t i = 0; i < b.encoder.size(); ++i) {
      bad += mmplan::effective_backward_time(b.encoder.layers[i], b.encoder.frozen[i], p.encoders[0][i], tp) != 0.0;
    }
    for (std::size_t i = 0; i < b.projector.size(); ++i) {
      const auto& l = b.projector.layers[i];
      bad += mmplan::effective_backward_time(l, b.projector.frozen[i], p.projectors[0][i], tp) !=
             l.bwd_data(tp) + l.bwd_weight(tp);
    }
    for (std::size_t i = 0; i < model.llm.size(); ++i) {
      const auto& l = model.llm.layers[i];
      bad += mmplan::effective_backward_time(l, model.llm.frozen[i], p.llm[i], tp) != l.bwd_data(tp);
    }
  }
  const int fixture_bad = bad;

  Rng rng(31337);
  mmplan::random::ModelOptions opt;
  opt.standard_freezing = false;
  opt.max_encoders = 3;
  opt.max_projector_layers = 2;
  opt.tp_degrees = {1};
  int random_bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = mmplan::random::random_model(rng, opt);
    const mmplan::testing::LayerGraph g(m);
    const auto q = mmplan::compute_trainability(m);
    std::vector<const mmplan::LayerProfile*> layers;
    std::vector<bool> computed;
    for (std::size_t i = 0; i < m.encoders.size(); ++i) {
      for (std::size_t l = 0; l < m.encoders[i].size(); ++l) layers.push_back(&m.encoders[i].layer(l));
      const auto bp = q.branch(i);
      computed.insert(computed.end(), bp.begin(), bp.end());
    }
    for (const auto& l : m.llm.layers) layers.push_back(&l);
    computed.insert(computed.end(), q.llm.begin(), q.llm.end());
    bool ok = computed.size() == g.frozen.size();
    for (std::size_t v = 0; ok && v < computed.size(); ++v) {
      const bool reached = g.Reached(v);
      const double want = (g.frozen[v] ? 0.0 : layers[v]->bwd_weight(1)) + (reached ? layers[v]->bwd_data(1) : 0.0);
      ok = computed[v] == reached && mmplan::effective_backward_time(*layers[v], g.frozen[v], computed[v], 1) == want;
    }
    random_bad += !ok;
  }
  o.pass = fixture_bad == 0 && random_bad == 0;
  o.detail = "fixture mismatches " + std::to_string(fixture_bad) + ", random models off the dataflow oracle " +
             std::to_string(random_bad) + "/500";
  return o;
}

Outcome PartitionOptimality() {
  Outcome o{true, "", 30.0};
  Rng rng(4242);
  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.range(1, 12));
    std::vector<mmplan::LayerCost> layers;
    for (std::size_t i = 0; i < n; ++i) {
      layers.push_back({0.25 * static_cast<double>(rng.range(0, 12)), 0.25 * static_cast<double>(rng.range(0, 12)), 1, 1,
                        rng.chance(1, 2)});
    }
    const auto k = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(std::min<std::size_t>(4, n))));
    const auto plan = mmplan::partition_stages(layers, k, 1);
    const auto [best, cut] = BestContiguous(layers, k);
    bad += plan.max_stage_time() != best || plan.boundaries() != cut;
  }
  o.pass = bad == 0;
  o.detail = "mismatches against enumeration " + std::to_string(bad) + "/200";
  return o;
}

Outcome SimulatorCalibration() {
  Outcome o;
  int bad = 0;
  const double f = 1.25, b = 2.5;
  for (std::size_t N : {2, 4, 8}) {
    for (std::size_t M : {1, 8, 64}) {
      const auto trace = mmplan::simulate_1f1b(mmplan::chain_layout(std::vector<mmplan::StageTiming>(N, {f, b})), M);
      bad += trace.iteration_time_ms != static_cast<double>(M + N - 1) * (f + b);
      const auto peak = mmplan::measured_peak_inflight(trace);
      std::vector<int> want;
      // N - p needs at least N - p microbatches to exist
      for (std::size_t p = 0; p < N; ++p) want.push_back(static_cast<int>(std::min(M, N - p)));
      bad += peak != want;
    }
  }
  // Two 2-stage encoders into a 4-stage LLM, every stage 1F+1B balanced.
  const auto layout = mmplan::fan_in_layout({{"A", {{1, 2}, {1, 2}}}, {"B", {{1, 2}, {1, 2}}}},
                                            {"llm", {{1, 2}, {1, 2}, {1, 2}, {1, 2}}});
  const auto trace = mmplan::simulate_1f1b(layout, 16);
  double idle = 0.0;
  for (const auto& events : trace.devices) {
    double first_backward = -1.0, last_forward_end = 0.0;
    for (const auto& e : events) {
      if (e.kind == mmplan::TaskKind::backward && first_backward < 0.0) first_backward = e.start_ms;
      if (e.kind == mmplan::TaskKind::forward) last_forward_end = e.end_ms;
    }
    double busy = 0.0;
    for (const auto& e : events) busy += std::max(0.0, std::min(e.end_ms, last_forward_end) - std::max(e.start_ms, first_backward));
    idle += (last_forward_end - first_backward) - busy;
  }
  o.pass = bad == 0 && idle == 0.0;
  o.detail = "chain mismatches " + std::to_string(bad) + "/18 (peak checked as N-p, capped by M when M < N), balanced graph steady idle " +
             std::to_string(idle) + " ms";
  return o;
}

Outcome FrozenDominance() {
  Outcome o{true, "", 300.0};
  Rng rng(606);
  mmplan::random::ModelOptions mo;
  mo.min_encoder_layers = 2;
  mo.max_encoder_layers = 8;
  mo.min_llm_layers = 4;
  mo.max_llm_layers = 8;
  const mmplan::ClusterSpec cluster{3, 2, 1ull << 30, {1}};
  int worse = 0, strict = 0;
  const int total = 60;
  for (int trial = 0; trial < total; ++trial) {
    const auto model = mmplan::random::random_model(rng, mo);
    mmplan::PlannerOptions opt;
    const auto aware = mmplan::plan(model, cluster, opt);
    opt.backward = mmplan::BackwardModel::frozen_unaware;
    const auto blind = mmplan::retime_plan(mmplan::plan(model, cluster, opt), model, mmplan::BackwardModel::frozen_aware);
    worse += aware.iteration_time_ms > blind.iteration_time_ms;
    strict += aware.iteration_time_ms < blind.iteration_time_ms;
  }
  o.pass = worse == 0 && strict * 10 >= total * 3;
  o.detail = "aware slower on " + std::to_string(worse) + ", strictly faster on " + std::to_string(strict) + "/" +
             std::to_string(total);
  return o;
}

Outcome PlannerArgmax() {
  Outcome o;
  Rng rng(8080);
  mmplan::random::ModelOptions mo;
  mo.max_encoder_layers = 5;
  mo.max_llm_layers = 6;
  mo.min_llm_layers = 2;
  mo.tp_degrees = {1, 2};
  int checked = 0, bad = 0;
  for (int trial = 0; checked < 30 && trial < 200; ++trial) {
    const auto model = mmplan::random::random_model(rng, mo);
    const mmplan::ClusterSpec cluster =
        trial % 2 ? mmplan::ClusterSpec{2, 2, 64ull << 20, {1, 2}} : mmplan::ClusterSpec{3, 1, 64ull << 20, {1}};
    mmplan::PlannerOptions opt;
    opt.num_microbatches = 4;
    const auto oracle = mmplan::testing::ExhaustivePlan(model, cluster, opt);
    if (oracle.evaluated == 0) continue;
    ++checked;
    const auto plan = mmplan::plan(model, cluster, opt);
    bad += plan.throughput != mmplan::throughput_of(opt.num_microbatches, opt.microbatch_size, oracle.best_iteration_ms);
  }
  o.pass = checked == 30 && bad == 0;
  o.detail = "throughput off the exhaustive maximum on " + std::to_string(bad) + "/" + std::to_string(checked);
  return o;
}

Outcome MaskSemantics() {
  Outcome o;
  const std::vector<mmplan::Segment> segs{{"text", 1}, {"A", 2}, {"B", 2}, {"text", 3}};
  const auto mask = mmplan::build_bitfield(segs);
  const char* dense[8] = {"10000000", "01100000", "01100000", "00011000",
                          "00011000", "11111100", "11111110", "11111111"};
  int cells = 0;
  for (std::size_t q = 0; q < 8; ++q) {
    for (std::size_t k = 0; k < 8; ++k) cells += mmplan::materialize(mask, q, k) != (dense[q][k] == '1');
  }
  Rng rng(512);
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto packing = mmplan::random::random_packing(rng, 512, 3);
    const auto m = mmplan::build_bitfield(packing);
    for (std::size_t nb : {1, 16, 128}) {
      std::vector<mmplan::BlockClass> classes;
      const auto brute = BruteWorkloads(m, nb, classes);
      const auto fast = mmplan::block_workloads(m, nb);
      bad += fast.workloads != brute || fast.classes != classes;
    }
  }
  o.pass = cells == 0 && bad == 0;
  o.detail = "dense mask cells wrong " + std::to_string(cells) + "/64, block mismatches " + std::to_string(bad) + "/300";
  return o;
}

Outcome IntraModel() {
  Outcome o;
  const std::vector<Workload> fig{1, 5};
  const mmplan::IntraCostModel cfg{2, 2, 0.25, 0.5};
  const auto split = mmplan::intra_schedule(fig, cfg).compute_makespan;
  const auto whole = mmplan::whole_block_schedule(fig, cfg).compute_makespan;
  Rng rng(77);
  int violations = 0;
  std::string example;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Workload> w(static_cast<std::size_t>(rng.range(1, 12)));
    for (auto& x : w) x = static_cast<Workload>(rng.range(0, 32));
    const auto C = static_cast<std::size_t>(rng.range(1, 8));
    bool ok = true;
    for (Workload s = 1; s < 8 && ok; ++s) {
      const auto smaller = mmplan::intra_schedule(w, {C, s, 0.25, 0.5}).compute_makespan;
      const auto larger = mmplan::intra_schedule(w, {C, s + 1, 0.25, 0.5}).compute_makespan;
      if (smaller > larger) {
        ok = false;
        if (example.empty()) {
          example = "; e.g. W=" + Join(w) + " C=" + std::to_string(C) + ": s=" + std::to_string(s) + " gives " +
                    std::to_string(smaller) + ", s=" + std::to_string(s + 1) + " gives " + std::to_string(larger);
        }
      }
    }
    violations += !ok;
  }
  o.pass = split == 3 && whole == 5 && violations == 0;
  o.detail = "{1,5} C=2 s=2: " + std::to_string(split) + " vs whole-block " + std::to_string(whole) +
             "; non-monotone loads " + std::to_string(violations) + "/100" + example;
  return o;
}

Outcome Determinism() {
  Outcome o;
  using namespace mmplan::testing;
  int bad = 0, files = 0;
  for (const auto& c : GoldenCases()) {
    const auto a = ScratchDir("acc-" + c.name + "-a");
    const auto b = ScratchDir("acc-" + c.name + "-b");
    const bool ran = RunCli(Expand(c.args, a)) == 0 && RunCli(Expand(c.args, b)) == 0;
    for (const auto& file : c.outputs) {
      ++files;
      const auto first = Slurp(a + "/" + file);
      bad += !ran || first.empty() || first != Slurp(b + "/" + file) || first != Slurp(kGoldenDir + "/" + file);
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
  }
  o.pass = bad == 0;
  o.detail = std::to_string(GoldenCases().size()) + " invocations, " + std::to_string(bad) + "/" + std::to_string(files) +
             " outputs differ between runs or from the pins";
  return o;
}

}  // namespace

int main() {
  Run(1, "irregular mask workloads and distributions", IrregularMask);
  Run(2, "LPT bounds", LptGuarantees);
  Run(3, "frozen-status backward times", FrozenFormula);
  Run(4, "partition optimality", PartitionOptimality);
  Run(5, "simulator calibration", SimulatorCalibration);
  Run(6, "frozen-aware dominance", FrozenDominance);
  Run(7, "planner argmax", PlannerArgmax);
  Run(8, "mask semantics", MaskSemantics);
  Run(9, "intra-GPU model", IntraModel);
  Run(10, "CLI determinism", Determinism);
  std::printf("%d/10 criteria pass\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
