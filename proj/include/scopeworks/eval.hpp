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

// Word-level precision/recall/F1, inter-dataset score matrices and run
// averaging.
//
// Scoring is binary and micro-averaged over every real word of every
// instance: for cue detection the positive class is "any cue" (labels 1 and
// 2), for scope resolution it is "in scope" (label 1). Marker words are never
// scored. A zero denominator yields 0 for that ratio, and F1 of (0, 0) is 0.

#ifndef SCOPEWORKS_EVAL_HPP_
#define SCOPEWORKS_EVAL_HPP_

#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scopeworks/common.hpp"
#include "scopeworks/encoding.hpp"
#include "scopeworks/tokenize.hpp"

namespace scopeworks::eval {

using align::Aggregation;
using encoding::TaskInstance;

struct WordPredictions {
  std::string instance_id;
  std::vector<int> predicted;  // real words only
  std::vector<int> gold;
};

// Aggregates one instance's token probabilities to word labels and drops
// marker positions.
inline WordPredictions make_word_predictions(const TaskInstance& inst,
                                             const align::TokenizedInstance& tok,
                                             const align::ProbTable& probs,
                                             Aggregation method) {
  if (tok.word_spans.size() != inst.words.size()) {
    throw Error(ErrorKind::kInput, "instance " + inst.instance_id + ": " +
                                       std::to_string(inst.words.size()) + " words but " +
                                       std::to_string(tok.word_spans.size()) + " spans");
  }
  auto labels = align::word_labels(probs, tok.word_spans, method, class_order(inst.task));
  WordPredictions wp;
  wp.instance_id = inst.instance_id;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (inst.is_marker_position(i)) continue;
    wp.predicted.push_back(labels[i]);
    wp.gold.push_back(inst.labels[i]);
  }
  return wp;
}

struct Ratios {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline Ratios ratios(std::size_t tp, std::size_t fp, std::size_t fn) {
  Ratios r;
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (r.precision + r.recall > 0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

struct ClassBreakdown {
  int label = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
  Task task = Task::kCue;
  std::string train_set;
  std::string eval_set;
  Aggregation method = Aggregation::kAverage;
  double precision = 0.0;  // mean across runs for averaged reports
  double recall = 0.0;
  double f1 = 0.0;
  double precision_std = 0.0;
  double recall_std = 0.0;
  double f1_std = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;  // summed across runs when averaged
  std::size_t words = 0;
  std::size_t instances = 0;
  std::size_t runs = 1;
  std::vector<std::uint64_t> seeds;
  std::vector<ClassBreakdown> per_class;
  // Supplementary: share of scope instances predicted exactly.
  std::optional<double> exact_scope_match;
  std::string config_hash;
};

inline bool is_positive(Task task, int label) {
  return task == Task::kCue ? (label == kNormalCue || label == kMultiwordCue)
                            : label == kInScope;
}

inline MetricsReport score_task(const std::vector<WordPredictions>& preds, Task task) {
  const auto order = class_order(task);
  const auto check = [&](int label, bool gold, const std::string& id) {
    bool ok = task == Task::kCue ? (label >= 1 && label <= (gold ? 3 : 4))
                                 : (label == 0 || label == 1);
    if (!ok) {
      throw Error(ErrorKind::kInput, "instance " + id + ": " + (gold ? "gold" : "predicted") +
                                         " label " + std::to_string(label) +
                                         " outside the " + std::string(to_string(task)) +
                                         " alphabet");
    }
  };
  MetricsReport rep;
  rep.task = task;
  std::map<int, ClassBreakdown> classes;
  for (int label : order) {
    if (task == Task::kCue && label == kCuePad) continue;
    classes[label].label = label;
  }
  std::size_t exact = 0;
  for (const auto& wp : preds) {
    if (wp.predicted.size() != wp.gold.size()) {
      throw Error(ErrorKind::kInput, "instance " + wp.instance_id +
                                         ": prediction and gold lengths differ");
    }
    bool all_match = true;
    for (std::size_t i = 0; i < wp.gold.size(); ++i) {
      const int p = wp.predicted[i];
      const int g = wp.gold[i];
      check(g, true, wp.instance_id);
      check(p, false, wp.instance_id);
      const bool pp = is_positive(task, p);
      const bool gp = is_positive(task, g);
      if (pp && gp) ++rep.tp;
      if (pp && !gp) ++rep.fp;
      if (!pp && gp) ++rep.fn;
      for (auto& [label, cb] : classes) {
        if (p == label && g == label) ++cb.tp;
        if (p == label && g != label) ++cb.fp;
        if (p != label && g == label) ++cb.fn;
      }
      all_match = all_match && p == g;
    }
    exact += all_match ? 1 : 0;
    rep.words += wp.gold.size();
  }
  rep.instances = preds.size();
  auto r = ratios(rep.tp, rep.fp, rep.fn);
  rep.precision = r.precision;
  rep.recall = r.recall;
  rep.f1 = r.f1;
  for (auto& [label, cb] : classes) {
    auto cr = ratios(cb.tp, cb.fp, cb.fn);
    cb.precision = cr.precision;
    cb.recall = cr.recall;
    cb.f1 = cr.f1;
    rep.per_class.push_back(cb);
  }
  if (task == Task::kScope) {
    rep.exact_scope_match =
        preds.empty() ? 0.0 : static_cast<double>(exact) / static_cast<double>(preds.size());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Inter-dataset matrix

using Predictor = std::function<std::vector<WordPredictions>(const std::vector<TaskInstance>&)>;

struct TrainedEntry {
  std::string train_set;
  Predictor predict;
};

// Row i holds the reports of model i on every eval set, in `eval_sets`
// order. The diagonal is same-dataset evaluation when both lists agree.
inline std::vector<std::vector<MetricsReport>> cross_matrix(
    const std::vector<TrainedEntry>& trained, const std::vector<std::string>& eval_sets,
    const std::map<std::string, std::vector<TaskInstance>>& test_splits, Task task,
    Aggregation method) {
  for (const auto& e : eval_sets) {
    if (!test_splits.count(e)) {
      throw Error(ErrorKind::kConfig, "no test split for dataset " + e);
    }
  }
  std::vector<std::vector<MetricsReport>> matrix;
  for (const auto& t : trained) {
    auto& row = matrix.emplace_back();
    for (const auto& e : eval_sets) {
      MetricsReport rep = score_task(t.predict(test_splits.at(e)), task);
      rep.train_set = t.train_set;
      rep.eval_set = e;
      rep.method = method;
      row.push_back(std::move(rep));
    }
  }
  return matrix;
}

// ---------------------------------------------------------------------------
// Run averaging

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

inline MetricsReport average_runs(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw Error(ErrorKind::kInput, "no reports to average");
  const MetricsReport& first = reports.front();
  for (const auto& r : reports) {
    if (r.task != first.task || r.train_set != first.train_set ||
        r.eval_set != first.eval_set || r.method != first.method) {
      throw Error(ErrorKind::kInput, "cannot average reports of different cells (" +
                                         first.train_set + "->" + first.eval_set + " vs " +
                                         r.train_set + "->" + r.eval_set + ")");
    }
  }
  MetricsReport out = first;
  out.tp = out.fp = out.fn = out.words = out.instances = 0;
  out.seeds.clear();
  std::vector<double> p, r, f, exact;
  for (const auto& rep : reports) {
    p.push_back(rep.precision);
    r.push_back(rep.recall);
    f.push_back(rep.f1);
    if (rep.exact_scope_match) exact.push_back(*rep.exact_scope_match);
    out.tp += rep.tp;
    out.fp += rep.fp;
    out.fn += rep.fn;
    out.words += rep.words;
    out.instances += rep.instances;
    out.seeds.insert(out.seeds.end(), rep.seeds.begin(), rep.seeds.end());
  }
  auto ps = mean_std(p), rs = mean_std(r), fs = mean_std(f);
  out.precision = ps.mean;
  out.precision_std = ps.std;
  out.recall = rs.mean;
  out.recall_std = rs.std;
  out.f1 = fs.mean;
  out.f1_std = fs.std;
  out.runs = reports.size();
  if (!exact.empty()) out.exact_scope_match = mean_std(exact).mean;
  for (std::size_t c = 0; c < out.per_class.size(); ++c) {
    auto& cb = out.per_class[c];
    cb.tp = cb.fp = cb.fn = 0;
    std::vector<double> cp, cr, cf;
    for (const auto& rep : reports) {
      const auto& o = rep.per_class.at(c);
      cb.tp += o.tp;
      cb.fp += o.fp;
      cb.fn += o.fn;
      cp.push_back(o.precision);
      cr.push_back(o.recall);
      cf.push_back(o.f1);
    }
    cb.precision = mean_std(cp).mean;
    cb.recall = mean_std(cr).mean;
    cb.f1 = mean_std(cf).mean;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization and rendering

inline Json to_json(const MetricsReport& r) {
  Json per_class = Json::array();
  for (const auto& c : r.per_class) {
    per_class.push_back({{"label", c.label}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn},
                         {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
  }
  Json j = {{"task", to_string(r.task)},
            {"train_set", r.train_set},
            {"eval_set", r.eval_set},
            {"aggregation", to_string(r.method)},
            {"class_order", class_order(r.task)},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"precision_std", r.precision_std},
            {"recall_std", r.recall_std},
            {"f1_std", r.f1_std},
            {"tp", r.tp},
            {"fp", r.fp},
            {"fn", r.fn},
            {"words", r.words},
            {"instances", r.instances},
            {"runs", r.runs},
            {"seeds", r.seeds},
            {"per_class", per_class},
            {"config_hash", r.config_hash}};
  if (r.exact_scope_match) j["supplementary_exact_scope_match"] = *r.exact_scope_match;
  return j;
}

inline MetricsReport report_from_json(const Json& j) {
  MetricsReport r;
  r.task = parse_task(j.at("task").get<std::string>());
  r.train_set = j.at("train_set").get<std::string>();
  r.eval_set = j.at("eval_set").get<std::string>();
  r.method = align::parse_aggregation(j.at("aggregation").get<std::string>());
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.precision_std = j.value("precision_std", 0.0);
  r.recall_std = j.value("recall_std", 0.0);
  r.f1_std = j.value("f1_std", 0.0);
  r.tp = j.value("tp", std::size_t{0});
  r.fp = j.value("fp", std::size_t{0});
  r.fn = j.value("fn", std::size_t{0});
  r.words = j.value("words", std::size_t{0});
  r.instances = j.value("instances", std::size_t{0});
  r.runs = j.value("runs", std::size_t{1});
  r.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  r.config_hash = j.value("config_hash", "");
  if (j.contains("per_class")) {
    for (const auto& c : j.at("per_class")) {
      r.per_class.push_back({c.at("label").get<int>(), c.at("tp").get<std::size_t>(),
                             c.at("fp").get<std::size_t>(), c.at("fn").get<std::size_t>(),
                             c.at("precision").get<double>(), c.at("recall").get<double>(),
                             c.at("f1").get<double>()});
    }
  }
  if (j.contains("supplementary_exact_scope_match")) {
    r.exact_scope_match = j.at("supplementary_exact_scope_match").get<double>();
  }
  return r;
}

inline std::string render_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(7) << "task" << std::setw(14) << "train" << std::setw(14)
     << "eval" << std::setw(13) << "aggregation" << std::right << std::setw(6) << "runs"
     << std::setw(10) << "P" << std::setw(10) << "R" << std::setw(10) << "F1"
     << std::setw(10) << "F1 std" << "\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    os << std::left << std::setw(7) << to_string(r.task) << std::setw(14) << r.train_set
       << std::setw(14) << r.eval_set << std::setw(13) << to_string(r.method) << std::right
       << std::setw(6) << r.runs << std::setw(10) << r.precision << std::setw(10)
       << r.recall << std::setw(10) << r.f1 << std::setw(10) << r.f1_std << "\n";
  }
  if (!reports.empty()) {
    os << "class_order " << order_string(class_order(reports.front().task))
       << "  config " << reports.front().config_hash << "\n";
  }
  return os.str();
}

inline std::string render_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << "task,train_set,eval_set,aggregation,runs,precision,recall,f1,precision_std,"
        "recall_std,f1_std,tp,fp,fn,words,class_order,config_hash\n";
  os << std::setprecision(10);
  for (const auto& r : reports) {
    std::string order = order_string(class_order(r.task));
    for (char& c : order) {
      if (c == ',') c = ' ';
    }
    os << to_string(r.task) << ',' << r.train_set << ',' << r.eval_set << ','
       << to_string(r.method) << ',' << r.runs << ',' << r.precision << ',' << r.recall
       << ',' << r.f1 << ',' << r.precision_std << ',' << r.recall_std << ',' << r.f1_std
       << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',' << r.words << ',' << order << ','
       << r.config_hash << "\n";
  }
  return os.str();
}

}  // namespace scopeworks::eval

#endif  // SCOPEWORKS_EVAL_HPP_
