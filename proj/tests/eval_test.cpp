// Copyright 2026 The Scopeworks Authors.
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


#include "scopeworks/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace scopeworks::eval {
namespace {

WordPredictions wp(std::vector<int> predicted, std::vector<int> gold, std::string id = "i") {
  return {std::move(id), std::move(predicted), std::move(gold)};
}

TEST(Score, HandArithmetic) {
  // Scope task: TP 2, FP 1, FN 1.
  auto rep = score_task({wp({1, 1, 1, 0, 0}, {1, 1, 0, 1, 0})}, Task::kScope);
  EXPECT_EQ(rep.tp, 2u);
  EXPECT_EQ(rep.fp, 1u);
  EXPECT_EQ(rep.fn, 1u);
  EXPECT_DOUBLE_EQ(rep.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rep.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rep.f1, 2.0 / 3.0);
  EXPECT_EQ(rep.words, 5u);
}

TEST(Score, PerfectAndEmpty) {
  auto perfect = score_task({wp({3, 1, 2, 2}, {3, 1, 2, 2})}, Task::kCue);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  auto none = score_task({wp({0, 0}, {0, 0})}, Task::kScope);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(Score, CueClassesCollapseButBreakdownSeparates) {
  // 1 predicted as 2 counts as a positive hit in the collapsed view.
  auto rep = score_task({wp({2, 3, 4}, {1, 3, 2})}, Task::kCue);
  EXPECT_EQ(rep.tp, 1u);
  EXPECT_EQ(rep.fn, 1u);
  EXPECT_EQ(rep.fp, 0u);
  ASSERT_EQ(rep.per_class.size(), 3u);
  EXPECT_EQ(rep.per_class[0].label, 1);
  EXPECT_EQ(rep.per_class[0].fn, 1u);
  EXPECT_EQ(rep.per_class[1].label, 2);
  EXPECT_EQ(rep.per_class[1].fp, 1u);
  EXPECT_EQ(rep.per_class[1].fn, 1u);
  EXPECT_FALSE(rep.exact_scope_match.has_value());
}

TEST(Score, AlphabetViolations) {
  EXPECT_THROW(score_task({wp({5}, {1})}, Task::kCue), Error);
  EXPECT_THROW(score_task({wp({1}, {4})}, Task::kCue), Error);
  EXPECT_THROW(score_task({wp({2}, {1})}, Task::kScope), Error);
  EXPECT_THROW(score_task({wp({1, 0}, {1})}, Task::kScope), Error);
}

TEST(Score, SupplementaryExactMatch) {
  auto rep = score_task({wp({1, 0}, {1, 0}, "a"), wp({1, 1}, {1, 0}, "b")}, Task::kScope);
  ASSERT_TRUE(rep.exact_scope_match.has_value());
  EXPECT_DOUBLE_EQ(*rep.exact_scope_match, 0.5);
  EXPECT_TRUE(to_json(rep).contains("supplementary_exact_scope_match"));
}

TEST(Score, MatchesBruteForceTallies) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<WordPredictions> preds;
    std::size_t tp = 0, fp = 0, fn = 0;
    const int n = 1 + static_cast<int>(gen() % 5);
    for (int k = 0; k < n; ++k) {
      WordPredictions w;
      const int len = static_cast<int>(gen() % 8);
      for (int i = 0; i < len; ++i) {
        const int g = static_cast<int>(gen() % 2);
        const int p = static_cast<int>(gen() % 2);
        w.gold.push_back(g);
        w.predicted.push_back(p);
        tp += (p == 1 && g == 1);
        fp += (p == 1 && g == 0);
        fn += (p == 0 && g == 1);
      }
      preds.push_back(w);
    }
    auto rep = score_task(preds, Task::kScope);
    EXPECT_EQ(rep.tp, tp);
    EXPECT_EQ(rep.fp, fp);
    EXPECT_EQ(rep.fn, fn);
  }
}

TEST(Averaging, MeanAndSampleStd) {
  MetricsReport a, b;
  a.f1 = 0.8;
  b.f1 = 0.9;
  auto avg = average_runs({a, b});
  EXPECT_NEAR(avg.f1, 0.85, 1e-12);
  EXPECT_NEAR(avg.f1_std, 0.0707106781186548, 1e-12);
  EXPECT_EQ(avg.runs, 2u);
}

TEST(Averaging, SingleAndIdenticalRuns) {
  auto rep = score_task({wp({1, 1, 0}, {1, 0, 0})}, Task::kScope);
  rep.seeds = {4};
  auto one = average_runs({rep});
  EXPECT_EQ(one.f1, rep.f1);
  EXPECT_EQ(one.f1_std, 0.0);
  EXPECT_EQ(one.tp, rep.tp);
  auto five = average_runs(std::vector<MetricsReport>(5, rep));
  EXPECT_EQ(five.f1_std, 0.0);
  EXPECT_EQ(five.precision_std, 0.0);
  EXPECT_EQ(five.runs, 5u);
}

TEST(Averaging, RejectsMixedCells) {
  MetricsReport a, b;
  a.eval_set = "BF";
  b.eval_set = "BA";
  EXPECT_THROW(average_runs({a, b}), Error);
  EXPECT_THROW(average_runs({}), Error);
}

TEST(CrossMatrix, ShapeAndCells) {
  const std::vector<std::string> names = {"BF", "BA", "SFU"};
  std::map<std::string, std::vector<TaskInstance>> tests;
  for (const auto& n : names) {
    TaskInstance t;
    t.instance_id = n + "/1";
    t.task = Task::kScope;
    t.words = {"a", "b"};
    t.labels = {1, 0};
    tests[n] = {t};
  }
  std::vector<TrainedEntry> trained;
  for (const auto& n : names) {
    trained.push_back({n, [n](const std::vector<TaskInstance>& insts) {
                         std::vector<WordPredictions> out;
                         for (const auto& i : insts) {
                           // "BA" predicts everything in scope, others copy gold.
                           out.push_back({i.instance_id,
                                          n == "BA" ? std::vector<int>{1, 1} : i.labels,
                                          i.labels});
                         }
                         return out;
                       }});
  }
  auto m = cross_matrix(trained, names, tests, Task::kScope, Aggregation::kAverage);
  ASSERT_EQ(m.size(), 3u);
  std::size_t cells = 0;
  for (const auto& row : m) cells += row.size();
  EXPECT_EQ(cells, 9u);
  EXPECT_EQ(m[1][0].train_set, "BA");
  EXPECT_EQ(m[1][0].eval_set, "BF");
  EXPECT_NE(m[1][0].precision, m[0][0].precision);
  EXPECT_THROW(cross_matrix(trained, {"X"}, tests, Task::kScope, Aggregation::kAverage), Error);
}

TEST(CrossMatrix, SingleDatasetEqualsScoreTask) {
  TaskInstance t{"x/1", "x/1", Task::kCue, {"a", "b"}, {1, 3}, "", {}};
  std::vector<WordPredictions> fixed = {wp({1, 1}, {1, 3}, "x/1")};
  std::vector<TrainedEntry> trained = {
      {"x", [&](const std::vector<TaskInstance>&) { return fixed; }}};
  auto m = cross_matrix(trained, {"x"}, {{"x", {t}}}, Task::kCue, Aggregation::kFirstToken);
  ASSERT_EQ(m.size(), 1u);
  auto direct = score_task(fixed, Task::kCue);
  EXPECT_EQ(m[0][0].f1, direct.f1);
  EXPECT_EQ(m[0][0].tp, direct.tp);
}

TEST(Serialization, ReportJsonRoundTripAndRendering) {
  auto rep = score_task({wp({1, 0, 1}, {1, 1, 0})}, Task::kScope);
  rep.train_set = "BF";
  rep.eval_set = "BA";
  rep.seeds = {1, 2};
  rep.config_hash = "abc";
  auto back = report_from_json(to_json(rep));
  EXPECT_EQ(to_json(back), to_json(rep));
  const auto table = render_table({rep});
  EXPECT_NE(table.find("BF"), std::string::npos);
  EXPECT_NE(table.find("class_order [0,1]"), std::string::npos);
  const auto csv = render_csv({rep});
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

}  // namespace
}  // namespace scopeworks::eval
