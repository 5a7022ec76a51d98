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

#include "mmplan/context_balance.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace {

using mmplan::Workload;

const std::vector<Workload> kIrregular{1, 2, 2, 4, 5, 2, 2, 8};

// Enumerates all G^T owner vectors.
Workload BruteOptimum(const std::vector<Workload>& w, std::size_t gpus) {
  std::vector<std::size_t> owner(w.size(), 0);
  Workload best = std::numeric_limits<Workload>::max();
  while (true) {
    std::vector<Workload> load(gpus, 0);
    for (std::size_t i = 0; i < w.size(); ++i) load[owner[i]] += w[i];
    best = std::min(best, *std::max_element(load.begin(), load.end()));
    std::size_t i = 0;
    while (i < owner.size() && ++owner[i] == gpus) owner[i++] = 0;
    if (i == owner.size()) break;
  }
  return best;
}

void ExpectComplete(const mmplan::BlockAssignment& a, std::size_t blocks) {
  std::vector<int> seen(blocks, 0);
  for (const auto& g : a.blocks) {
    for (auto b : g) ++seen[b];
  }
  for (std::size_t b = 0; b < blocks; ++b) EXPECT_EQ(seen[b], 1) << "block " << b;
}

TEST(Lpt, IrregularWorkloadsOnFourGpus) {
  const auto a = mmplan::lpt_distribute(kIrregular, 4);
  EXPECT_EQ(a.loads, (std::vector<Workload>{8, 6, 6, 6}));
  EXPECT_EQ(a.makespan(), 8u);
  EXPECT_EQ(a.blocks[0], (std::vector<std::size_t>{7}));
  EXPECT_EQ(a.blocks[1], (std::vector<std::size_t>{4, 0}));
  ExpectComplete(a, kIrregular.size());
}

TEST(Lpt, EqualWorkloadsSplitEvenly) {
  const std::vector<Workload> w(12, 3);
  const auto a = mmplan::lpt_distribute(w, 4);
  EXPECT_EQ(a.loads, (std::vector<Workload>{9, 9, 9, 9}));
  EXPECT_DOUBLE_EQ(a.imbalance(), 1.0);
}

TEST(Lpt, SingleGpuTakesEverything) {
  const auto a = mmplan::lpt_distribute(kIrregular, 1);
  EXPECT_EQ(a.makespan(), 26u);
  EXPECT_THROW(mmplan::lpt_distribute(kIrregular, 0), mmplan::Error);
}

TEST(Zigzag, BalancesCausalWorkloads) {
  const std::vector<Workload> causal{1, 2, 3, 4, 5, 6, 7, 8};
  const auto a = mmplan::zigzag_distribute(8, 4, causal);
  EXPECT_EQ(a.loads, (std::vector<Workload>{9, 9, 9, 9}));
  EXPECT_EQ(a.blocks[1], (std::vector<std::size_t>{1, 6}));
}

TEST(Zigzag, ImbalancedOnMultimodalWorkloads) {
  const auto a = mmplan::zigzag_distribute(8, 4, kIrregular);
  EXPECT_EQ(a.loads, (std::vector<Workload>{9, 4, 4, 9}));
  EXPECT_EQ(a.makespan(), 9u);
}

TEST(Zigzag, SingleGpuAndPadding) {
  const auto one = mmplan::zigzag_distribute(8, 1, kIrregular);
  EXPECT_EQ(one.loads, (std::vector<Workload>{26}));
  ExpectComplete(one, 8);
  const std::vector<Workload> odd{5, 1, 1};
  const auto padded = mmplan::zigzag_distribute(3, 2, odd);
  EXPECT_EQ(padded.loads, (std::vector<Workload>{5, 2}));
  ExpectComplete(padded, 3);
}

TEST(Ilp, ExamplesMatchExhaustiveSearch) {
  EXPECT_EQ(mmplan::ilp_optimal(kIrregular, 4).makespan(), 8u);
  EXPECT_EQ(BruteOptimum(kIrregular, 4), 8u);
  EXPECT_EQ(mmplan::ilp_optimal(std::vector<Workload>{3, 3, 3}, 3).makespan(), 3u);
  const auto two = mmplan::ilp_optimal(std::vector<Workload>{5, 5}, 4);
  EXPECT_EQ(two.makespan(), 5u);
  EXPECT_EQ(std::count(two.loads.begin(), two.loads.end(), Workload{0}), 2);
}

TEST(Ilp, RejectsOversizedInstances) {
  EXPECT_THROW(mmplan::ilp_optimal(std::vector<Workload>(15, 1), 2), mmplan::Error);
  EXPECT_THROW(mmplan::ilp_optimal(std::vector<Workload>(4, 1), 5), mmplan::Error);
}

TEST(Ilp, OptimalOnRandomInstances) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> count(1, 9), gpus(1, 4), work(0, 20);
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<Workload> w(static_cast<std::size_t>(count(rng)));
    for (auto& x : w) x = static_cast<Workload>(work(rng));
    const std::size_t G = static_cast<std::size_t>(gpus(rng));
    const auto a = mmplan::ilp_optimal(w, G);
    ExpectComplete(a, w.size());
    EXPECT_EQ(a.makespan(), BruteOptimum(w, G)) << "trial " << trial;
  }
}

TEST(Lpt, WorstCaseBoundsHold) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> count(1, 64), gpus(1, 8), work(0, 64);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Workload> w(static_cast<std::size_t>(count(rng)));
    for (auto& x : w) x = static_cast<Workload>(work(rng));
    const std::size_t G = static_cast<std::size_t>(gpus(rng));
    const auto a = mmplan::lpt_distribute(w, G);
    ExpectComplete(a, w.size());
    const double sum = static_cast<double>(std::accumulate(w.begin(), w.end(), Workload{0}));
    const double heaviest = static_cast<double>(*std::max_element(w.begin(), w.end()));
    EXPECT_LE(static_cast<double>(a.makespan()), sum / static_cast<double>(G) + heaviest);
    EXPECT_GE(a.makespan(), (static_cast<Workload>(sum) + G - 1) / G);
  }
}

TEST(Lpt, NeverWorseThanZigzagWithinItsDomain) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> gpus(1, 6), work(0, 32);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t G = static_cast<std::size_t>(gpus(rng));
    std::vector<Workload> w(2 * G);
    for (auto& x : w) x = static_cast<Workload>(work(rng));
    EXPECT_LE(mmplan::lpt_distribute(w, G).makespan(), mmplan::zigzag_distribute(w.size(), G, w).makespan());
  }
}

TEST(Intra, SubblocksBalanceComputeUnits) {
  const std::vector<Workload> w{1, 5};
  const auto split = mmplan::intra_schedule(w, {2, 2, 0.25, 0.5});
  EXPECT_EQ(split.unit_loads, (std::vector<Workload>{3, 3}));
  EXPECT_EQ(split.compute_makespan, 3u);
  EXPECT_DOUBLE_EQ(split.aggregation_cost, 0.25 * 2 + 0.5);
  const auto whole = mmplan::whole_block_schedule(w, {2, 2, 0.25, 0.5});
  EXPECT_EQ(whole.compute_makespan, 5u);
  EXPECT_EQ(whole.aggregation_cost, 0.0);
}

TEST(Intra, LargeSubblocksReproduceWholeBlocks) {
  const std::vector<Workload> w{3, 7, 2, 9, 4};
  for (Workload s : {9, 10, 50}) {
    const auto a = mmplan::intra_schedule(w, {3, s, 1.0, 1.0});
    const auto b = mmplan::whole_block_schedule(w, {3, 1, 1.0, 1.0});
    EXPECT_EQ(a.unit_loads, b.unit_loads);
    EXPECT_EQ(a.aggregation_cost, 0.0);
  }
}

TEST(Intra, SingleUnitIsSerial) {
  const std::vector<Workload> w{3, 7, 2};
  for (Workload s = 1; s <= 8; ++s) {
    const auto a = mmplan::intra_schedule(w, {1, s, 0.25, 0.5});
    EXPECT_EQ(a.compute_makespan, 12u);
    if (s < 7) {
      EXPECT_GT(a.total(), mmplan::intra_schedule(w, {1, 7, 0.25, 0.5}).total());
    }
  }
}

TEST(Intra, SubblocksNeverExceedSizeAndCoverWork) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> count(1, 12), work(0, 30), units(1, 8), size(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Workload> w(static_cast<std::size_t>(count(rng)));
    for (auto& x : w) x = static_cast<Workload>(work(rng));
    const auto sched = mmplan::intra_schedule(w, {static_cast<std::size_t>(units(rng)),
                                                  static_cast<Workload>(size(rng)), 0.25, 0.5});
    std::vector<Workload> covered(w.size(), 0);
    for (const auto& unit : sched.per_unit) {
      for (const auto& sub : unit) {
        EXPECT_LE(sub.work, sched.subblock_size);
        EXPECT_GT(sub.work, 0u);
        covered[sub.query_block] += sub.work;
      }
    }
    EXPECT_EQ(covered, w);
  }
}

TEST(Intra, RejectsZeroUnits) {
  const std::vector<Workload> w{1};
  EXPECT_THROW(mmplan::intra_schedule(w, {0, 1, 0, 0}), mmplan::Error);
  EXPECT_THROW(mmplan::intra_schedule(w, {1, 0, 0, 0}), mmplan::Error);
}

TEST(Report, ComparesFourPolicies) {
  const auto r = mmplan::balance_report(kIrregular, 4, {4, 2, 0.25, 0.5}, true);
  ASSERT_EQ(r.policies.size(), 4u);
  EXPECT_EQ(r.policies[0].assignment.makespan(), 9u);
  EXPECT_EQ(r.policies[1].assignment.makespan(), 8u);
  EXPECT_EQ(r.optimum.makespan(), 8u);
  const std::vector<Workload> causal{1, 2, 3, 4, 5, 6, 7, 8};
  const auto c = mmplan::balance_report(causal, 4, {4, 2, 0.25, 0.5});
  EXPECT_EQ(c.policies[0].assignment.makespan(), c.policies[1].assignment.makespan());
  const auto single = mmplan::balance_report(std::vector<Workload>{4}, 2, {2, 2, 0.25, 0.5});
  EXPECT_EQ(single.policies[0].assignment.makespan(), single.policies[1].assignment.makespan());
}

}  // namespace
