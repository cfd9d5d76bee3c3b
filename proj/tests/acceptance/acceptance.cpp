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


// Acceptance suite: one PASS/FAIL/SKIP line per criterion, each checked
// against its time budget. Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scopeworks/scopeworks.hpp"
#include "support/reference.hpp"

namespace sw = scopeworks;
namespace fs = std::filesystem;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kPass;
  std::string detail;
};

// Collects failed checks; the first few messages end up in the detail.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (ok) return;
    ++failed_;
    if (messages_.size() < 3) messages_.push_back(what);
  }

  Outcome outcome(const std::string& summary) const {
    if (failed_ == 0) return {Status::kPass, summary};
    std::string d = std::to_string(failed_) + "/" + std::to_string(total_) + " checks failed";
    for (const auto& m : messages_) d += "; " + m;
    return {Status::kFail, d};
  }

  std::size_t total() const { return total_; }

 private:
  std::size_t total_ = 0, failed_ = 0;
  std::vector<std::string> messages_;
};

template <class T>
std::string show(const std::vector<T>& v) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome worked_example() {
  Checks ck;
  sw::corpus::AnnotatedSentence s{"ex", {"It", "might", "rain", "tomorrow"},
                                  {{"c1", sw::corpus::CueKind::kSpeculation, {1}}},
                                  {{"c1", {2, 3}}}};
  auto cue = sw::encoding::encode_cue_task(s);
  ck.expect(cue.labels == std::vector<int>{3, 1, 3, 3}, "cue labels " + show(cue.labels));

  auto scope = sw::encoding::encode_scope_task(s);
  ck.expect(scope.size() == 1, "one scope instance");
  if (scope.size() == 1) {
    const auto& inst = scope[0];
    ck.expect(inst.words == std::vector<std::string>{"It", "<token[1]>", "might", "rain",
                                                     "tomorrow"},
              "marker placement " + show(inst.words));
    ck.expect(inst.marker_positions == std::vector<int>{1}, "single marker before the cue");
    auto stripped = sw::encoding::strip_markers(inst);
    ck.expect(stripped.words == s.words, "marker stripping restores the sentence");
    ck.expect(stripped.labels == std::vector<int>{0, 0, 1, 1},
              "scope labels " + show(stripped.labels));
  }

  sw::align::WordPieceTokenizer tok({"it", "might", "rain", "tom", "##or", "##row"}, 10);
  std::vector<std::string> pieces;
  for (const auto& p : tok.tokenize_word("tomorrow")) pieces.push_back(p.text);
  ck.expect(pieces == std::vector<std::string>{"tom", "##or", "##row"},
            "tomorrow pieces " + show(pieces));
  auto t = sw::align::tokenize_instance(cue, tok);
  ck.expect(t.token_labels == std::vector<int>{3, 1, 3, 3, 3, 3, 4, 4, 4, 4},
            "token labels " + show(t.token_labels));
  ck.expect(t.word_spans.back().begin == 3 && t.word_spans.back().end == 6,
            "tomorrow spans three tokens");
  return ck.outcome("cue [3,1,3,3], marker before 'might', token labels [3,1,3,3,3,3,4,...]");
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> oracle_near_max(const std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mx - v[i] <= 1e-12 * std::max(1.0, std::abs(mx))) out.push_back(i);
  }
  return out;
}

Outcome aggregation_oracle() {
  Checks ck;
  std::mt19937_64 gen(20261016);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int cases = 2000;
  std::size_t single_words = 0;
  for (int n = 0; n < cases; ++n) {
    const std::size_t classes = (n % 2) ? 4 : 2;
    std::vector<sw::align::WordSpan> spans;
    std::size_t rows = 0;
    const std::size_t words = 1 + gen() % 12;
    for (std::size_t w = 0; w < words; ++w) {
      const std::size_t width = 1 + gen() % 4;
      spans.push_back({static_cast<int>(rows), static_cast<int>(rows + width)});
      rows += width;
    }
    const std::size_t pad = gen() % 5;
    sw::align::ProbTable probs(rows + pad, classes);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      const int mode = static_cast<int>(gen() % 10);
      double sum = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        // Some rows are uniform or one-hot to exercise ties.
        double v = mode == 0 ? 1.0 : mode == 1 ? (c == gen() % classes ? 1.0 : 0.0) : unit(gen);
        probs.at(r, c) = v;
        sum += v;
      }
      if (sum == 0.0) {
        probs.at(r, 0) = 1.0;
        sum = 1.0;
      }
      for (std::size_t c = 0; c < classes; ++c) probs.at(r, c) /= sum;
    }
    auto avg = sw::align::aggregate_average(probs, spans);
    auto first = sw::align::aggregate_first(probs, spans);
    ck.expect(avg.size() == words && first.size() == words, "one label per word");
    if (avg.size() != words || first.size() != words) continue;
    for (std::size_t w = 0; w < words; ++w) {
      std::vector<double> mean(classes, 0.0);
      const auto& sp = spans[w];
      for (int r = sp.begin; r < sp.end; ++r) {
        for (std::size_t c = 0; c < classes; ++c) mean[c] += probs.at(static_cast<std::size_t>(r), c);
      }
      for (double& m : mean) m /= static_cast<double>(sp.end - sp.begin);
      std::vector<double> head(classes);
      for (std::size_t c = 0; c < classes; ++c) head[c] = probs.at(static_cast<std::size_t>(sp.begin), c);
      auto avg_ok = oracle_near_max(mean);
      auto first_ok = oracle_near_max(head);
      // Lowest index among maximal classes.
      ck.expect(static_cast<std::size_t>(avg[w]) == avg_ok.front(),
                "average case " + std::to_string(n) + " word " + std::to_string(w));
      ck.expect(static_cast<std::size_t>(first[w]) == first_ok.front(),
                "first case " + std::to_string(n) + " word " + std::to_string(w));
      if (sp.end - sp.begin == 1) {
        ++single_words;
        ck.expect(avg[w] == first[w], "single-token word disagreement");
      }
    }
  }
  return ck.outcome(std::to_string(cases) + " cases, " + std::to_string(single_words) +
                    " single-token words agree");
}

// ---------------------------------------------------------------------------

Outcome metrics_oracle() {
  Checks ck;
  std::mt19937_64 gen(7);
  const int cases = 2000;
  for (int n = 0; n < cases; ++n) {
    const sw::Task task = (n % 2) ? sw::Task::kCue : sw::Task::kScope;
    std::vector<sw::eval::WordPredictions> preds;
    std::size_t tp = 0, fp = 0, fn = 0;
    const std::size_t insts = gen() % 6;
    for (std::size_t i = 0; i < insts; ++i) {
      sw::eval::WordPredictions wp;
      wp.instance_id = "i" + std::to_string(i);
      const std::size_t len = gen() % 10;
      for (std::size_t k = 0; k < len; ++k) {
        int g, p;
        if (task == sw::Task::kCue) {
          g = static_cast<int>(1 + gen() % 3);
          p = static_cast<int>(1 + gen() % 4);
        } else {
          g = static_cast<int>(gen() % 2);
          p = static_cast<int>(gen() % 2);
        }
        wp.gold.push_back(g);
        wp.predicted.push_back(p);
        const bool gpos = task == sw::Task::kCue ? (g == 1 || g == 2) : g == 1;
        const bool ppos = task == sw::Task::kCue ? (p == 1 || p == 2) : p == 1;
        tp += gpos && ppos;
        fp += !gpos && ppos;
        fn += gpos && !ppos;
      }
      preds.push_back(wp);
    }
    auto rep = sw::eval::score_task(preds, task);
    ck.expect(rep.tp == tp && rep.fp == fp && rep.fn == fn,
              "counts case " + std::to_string(n));
    const double P = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double R = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double F = P + R > 0 ? 2 * P * R / (P + R) : 0.0;
    ck.expect(std::abs(rep.precision - P) <= 1e-12, "precision case " + std::to_string(n));
    ck.expect(std::abs(rep.recall - R) <= 1e-12, "recall case " + std::to_string(n));
    ck.expect(std::abs(rep.f1 - F) <= 1e-12, "f1 case " + std::to_string(n));
    const double identity = rep.precision + rep.recall > 0
                                ? 2 * rep.precision * rep.recall / (rep.precision + rep.recall)
                                : 0.0;
    ck.expect(std::abs(rep.f1 - identity) <= 1e-12, "F1 identity case " + std::to_string(n));
  }
  return ck.outcome(std::to_string(cases) + " cases, counts exact, ratios within 1e-12");
}

// ---------------------------------------------------------------------------

sw::model::ClassifierConfig miniature(std::size_t classes) {
  sw::model::ClassifierConfig c;
  c.vocab_size = 16;
  c.n_hidden = 8;
  c.num_classes = classes;
  c.encoder_layers = 2;
  c.attention_heads = 2;
  c.ff_width = 12;
  c.dropout = 0.1;
  c.max_len = 10;
  return c;
}

Outcome gradient_check() {
  Checks ck;
  std::mt19937_64 gen(99);
  std::size_t points = 0;
  double worst = 0.0;
  for (int model_seed = 0; model_seed < 6; ++model_seed) {
    const sw::Task task = model_seed % 2 ? sw::Task::kScope : sw::Task::kCue;
    auto cfg = miniature(sw::class_order(task).size());
    sw::model::TransformerClassifier m(cfg, static_cast<std::uint64_t>(100 + model_seed));
    auto t = sw::testing::random_instance(gen, task, cfg.vocab_size, cfg.max_len,
                                          4 + gen() % 6);
    const auto w = sw::model::default_class_weights(task);
    auto grads = m.parameters().zeros_like();
    auto parts = m.accumulate_gradients(t, w, grads, nullptr);
    if (parts.weight <= 0.0) continue;
    auto entries = m.parameters().entries();
    auto gentries = grads.entries();
    for (int k = 0; k < 30; ++k) {
      const std::size_t e = gen() % entries.size();
      sw::model::Matrix& mat = *entries[e].second;
      const auto i = static_cast<Eigen::Index>(gen() % static_cast<std::uint64_t>(mat.size()));
      const double orig = mat.data()[i];
      const double h = 1e-5;
      mat.data()[i] = orig + h;
      const double up = sw::testing::model_loss(m, t, w);
      mat.data()[i] = orig - h;
      const double down = sw::testing::model_loss(m, t, w);
      mat.data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = gentries[e].second->data()[i] / parts.weight;
      const double rel = std::abs(numeric - analytic) /
                         std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, rel);
      ++points;
      ck.expect(rel <= 1e-4, entries[e].first + " rel " + std::to_string(rel));
    }
  }
  ck.expect(points >= 100, "only " + std::to_string(points) + " points");
  std::ostringstream d;
  d << points << " points, worst relative error " << std::scientific << std::setprecision(2)
    << worst;
  return ck.outcome(d.str());
}

// ---------------------------------------------------------------------------

Outcome zero_weight_independence() {
  Checks ck;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  const auto order = sw::class_order(sw::Task::kCue);
  const auto weights = sw::model::default_class_weights(sw::Task::kCue);
  for (int n = 0; n < 1000; ++n) {
    const std::size_t len = 1 + gen() % 12;
    sw::align::ProbTable p(len, 4);
    std::vector<int> labels(len);
    std::vector<bool> mask(len);
    for (std::size_t r = 0; r < len; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 4; ++c) s += (p.at(r, c) = unit(gen));
      for (std::size_t c = 0; c < 4; ++c) p.at(r, c) /= s;
      labels[r] = static_cast<int>(1 + gen() % 4);
      mask[r] = gen() % 4 != 0;
    }
    auto q = p;
    for (std::size_t r = 0; r < len; ++r) {
      if (mask[r] && labels[r] != 4) continue;
      for (std::size_t c = 0; c < 4; ++c) q.at(r, c) = gen() % 3 == 0 ? 0.0 : unit(gen);
    }
    const double a = sw::model::weighted_ce_loss(p, labels, weights, mask, order);
    const double b = sw::model::weighted_ce_loss(q, labels, weights, mask, order);
    ck.expect(a == b, "table case " + std::to_string(n));
  }
  // Model level: pad token content changes neither loss nor gradients.
  for (int n = 0; n < 20; ++n) {
    const sw::Task task = n % 2 ? sw::Task::kScope : sw::Task::kCue;
    auto cfg = miniature(sw::class_order(task).size());
    sw::model::TransformerClassifier m(cfg, static_cast<std::uint64_t>(n));
    auto t = sw::testing::random_instance(gen, task, cfg.vocab_size, cfg.max_len, 3 + gen() % 6);
    auto u = t;
    for (std::size_t i = t.real_length(); i < u.token_ids.size(); ++i) {
      u.token_ids[i] = static_cast<int>(4 + gen() % (cfg.vocab_size - 4));
    }
    const auto w = sw::model::default_class_weights(task);
    ck.expect(sw::testing::model_loss(m, t, w) == sw::testing::model_loss(m, u, w),
              "model loss depends on pad content");
    auto g1 = m.parameters().zeros_like(), g2 = m.parameters().zeros_like();
    m.accumulate_gradients(t, w, g1, nullptr);
    m.accumulate_gradients(u, w, g2, nullptr);
    ck.expect(g1 == g2, "gradients depend on pad content");
  }
  return ck.outcome("1000 perturbed tables and 20 pad-perturbed models: loss change exactly 0");
}

// ---------------------------------------------------------------------------

struct OverfitResult {
  double f1_average = 0.0;
  double f1_first = 0.0;
  int epochs = 0;
};

OverfitResult overfit_task(sw::Task task, const sw::corpus::Corpus& train_c,
                           const sw::corpus::Corpus& val_c) {
  std::vector<std::vector<std::string>> words;
  for (const auto& s : train_c.sentences) words.push_back(s.words);
  auto train_i = sw::encoding::encode_corpus(train_c, task);
  auto val_i = sw::encoding::encode_corpus(val_c, task);
  // Sequence length: the longest instance, so nothing is dropped.
  auto probe = sw::align::WordPieceTokenizer::build(words, {}, 4096);
  std::size_t need = 1;
  for (const auto* set : {&train_i, &val_i}) {
    for (const auto& inst : *set) {
      std::size_t n = 0;
      for (const auto& w : inst.words) n += probe.tokenize_word(w).size();
      need = std::max(need, n);
    }
  }
  auto tok = sw::align::WordPieceTokenizer::build(words, {}, need);
  auto train_x = sw::experiment::make_examples(train_i, tok, false, nullptr);
  auto val_x = sw::experiment::make_examples(val_i, tok, false, nullptr);
  sw::model::ClassifierConfig cc;  // default architecture
  cc.vocab_size = tok.vocab_size();
  cc.num_classes = sw::class_order(task).size();
  cc.max_len = need;
  sw::model::TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.max_epochs = 60;
  tc.seed = 1;
  auto res = sw::model::train(cc, train_x, val_x, tc);
  OverfitResult out;
  out.epochs = static_cast<int>(res.history.epochs.size());
  out.f1_average = sw::eval::score_task(
      sw::model::predict_words(res.model, train_x, sw::align::Aggregation::kAverage), task).f1;
  out.f1_first = sw::eval::score_task(
      sw::model::predict_words(res.model, train_x, sw::align::Aggregation::kFirstToken), task).f1;
  return out;
}

Outcome overfit_smoke() {
  Checks ck;
  sw::synthetic::Options o;
  o.sentences = 500;
  auto train_c = sw::synthetic::generate(o);
  sw::synthetic::Options vo = o;
  vo.sentences = 100;
  vo.seed = 2;
  vo.id_prefix = "val";
  auto val_c = sw::synthetic::generate(vo);
  std::ostringstream d;
  d << std::fixed << std::setprecision(4);
  for (sw::Task task : {sw::Task::kCue, sw::Task::kScope}) {
    auto r = overfit_task(task, train_c, val_c);
    ck.expect(r.f1_average >= 0.99 && r.f1_first >= 0.99,
              std::string(sw::to_string(task)) + " train F1 " + std::to_string(r.f1_average) +
                  "/" + std::to_string(r.f1_first));
    ck.expect(r.epochs <= 60, "epoch limit exceeded");
    d << sw::to_string(task) << " F1 " << r.f1_average << "/" << r.f1_first << " in "
      << r.epochs << " epochs; ";
  }

  // Scripted validation metric peaking at epoch 3.
  auto cfg = miniature(4);
  std::mt19937_64 gen(5);
  std::vector<sw::model::Example> train_x, val_x;
  for (int i = 0; i < 6; ++i) {
    sw::model::Example ex;
    ex.tokens = sw::testing::random_instance(gen, sw::Task::kCue, cfg.vocab_size, cfg.max_len, 5);
    ex.tokens.instance_id = (i < 4 ? "t" : "v") + std::to_string(i);
    ex.instance.instance_id = ex.tokens.instance_id;
    ex.instance.task = sw::Task::kCue;
    for (const auto& s : ex.tokens.word_spans) {
      ex.instance.words.push_back("w");
      ex.instance.labels.push_back(ex.tokens.token_labels[static_cast<std::size_t>(s.begin)]);
    }
    (i < 4 ? train_x : val_x).push_back(ex);
  }
  sw::model::TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.validation_metric = [](int epoch, const sw::model::TransformerClassifier&) {
    return epoch <= 3 ? 0.2 * epoch : 0.5;
  };
  sw::model::Parameters best;
  tc.on_epoch_end = [&](const sw::model::EpochRecord& r, const sw::model::TransformerClassifier& m) {
    if (r.epoch == 3) best = m.parameters();
  };
  auto res = sw::model::train(cfg, train_x, val_x, tc);
  ck.expect(res.history.early_stopped && res.history.epochs.size() == 9,
            "early stop after " + std::to_string(res.history.epochs.size()) + " epochs");
  ck.expect(res.history.best_epoch == 3, "best epoch " + std::to_string(res.history.best_epoch));
  ck.expect(res.model.parameters() == best, "returned parameters are not the epoch-3 ones");
  d << "early stop at epoch " << res.history.epochs.size() << " with epoch-"
    << res.history.best_epoch << " weights";
  return ck.outcome(d.str());
}

// ---------------------------------------------------------------------------

Outcome protocol_conformance() {
  Checks ck;
  // Splits over many sizes and seeds.
  for (std::size_t n = 3; n <= 400; n += 7) {
    sw::corpus::Corpus c;
    c.name = "P" + std::to_string(n % 3);
    for (std::size_t i = 0; i < n; ++i) c.sentences.push_back({"s" + std::to_string(i), {"w"}, {}, {}});
    for (std::uint64_t seed : {1u, 13u, 77u}) {
      sw::experiment::SplitSpec spec;
      spec.seed = seed;
      auto a = sw::experiment::split(c, spec);
      auto b = sw::experiment::split(c, spec);
      ck.expect(a.train == b.train && a.val == b.val && a.test == b.test, "non-deterministic split");
      std::multiset<std::string> all;
      for (const auto* part : {&a.train, &a.val, &a.test}) {
        for (const auto& s : part->sentences) all.insert(s.sentence_id);
      }
      std::set<std::string> uniq(all.begin(), all.end());
      ck.expect(all.size() == n && uniq.size() == n, "split not a partition at n=" + std::to_string(n));
      const double exact[3] = {0.7 * n, 0.15 * n, 0.15 * n};
      const std::size_t got[3] = {a.train.sentences.size(), a.val.sentences.size(),
                                  a.test.sentences.size()};
      for (int k = 0; k < 3; ++k) {
        ck.expect(std::abs(static_cast<double>(got[k]) - exact[k]) <= 1.0,
                  "size off by more than 1 at n=" + std::to_string(n));
      }
    }
  }

  // End-to-end runs on fixtures with a small model.
  const fs::path dir = fs::temp_directory_path() / "scopeworks_acceptance_protocol";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const auto& [name, seed] : {std::pair<std::string, int>{"A", 1}, {"B", 2}, {"C", 3}}) {
    sw::synthetic::Options o;
    o.sentences = 40;
    o.seed = static_cast<std::uint64_t>(seed);
    o.name = name;
    sw::write_file_atomic(dir / (name + ".jsonl"),
                          sw::corpus::write_canonical(sw::synthetic::generate(o)));
  }
  const auto base = [&](std::vector<std::string> names, std::size_t runs) {
    sw::experiment::ExperimentConfig c;
    for (const auto& n : names) c.datasets.push_back({n, (dir / (n + ".jsonl")).string()});
    c.max_len = 64;
    c.classifier.n_hidden = 8;
    c.classifier.attention_heads = 2;
    c.classifier.encoder_layers = 1;
    c.classifier.ff_width = 8;
    c.train.max_epochs = 2;
    c.train.learning_rate = 1e-3;
    c.runs = runs;
    return c;
  };

  // Joint: merged train/val, one test report per dataset, no leakage.
  {
    std::vector<sw::experiment::Split> splits;
    std::size_t train_total = 0, val_total = 0;
    for (const auto& n : {"A", "B", "C"}) {
      auto c = sw::experiment::namespaced(
          sw::corpus::read_canonical(sw::read_file(dir / (std::string(n) + ".jsonl"))));
      c.name = n;
      c = sw::experiment::namespaced(c);
      splits.push_back(sw::experiment::split(c, {}));
      train_total += splits.back().train.sentences.size();
      val_total += splits.back().val.sentences.size();
    }
    auto joint = sw::experiment::prepare_joint(splits, 1);
    ck.expect(joint.train.sentences.size() == train_total, "merged train size");
    ck.expect(joint.val.sentences.size() == val_total, "merged val size");
    std::set<std::string> fit;
    for (const auto& s : joint.train.sentences) fit.insert(s.sentence_id);
    for (const auto& s : joint.val.sentences) fit.insert(s.sentence_id);
    for (const auto& t : joint.tests) {
      for (const auto& s : t.sentences) ck.expect(!fit.count(s.sentence_id), "leak " + s.sentence_id);
    }

    auto cfg = base({"A", "B", "C"}, 1);
    cfg.mode = "joint";
    cfg.methods = {sw::align::Aggregation::kAverage};
    cfg.task = sw::Task::kScope;
    auto b = sw::experiment::run(cfg);
    ck.expect(b.per_run.size() == 3, "joint per-run reports " + std::to_string(b.per_run.size()));
    std::set<std::string> evals;
    for (const auto& r : b.per_run) evals.insert(r.eval_set);
    ck.expect(evals == std::set<std::string>{"A", "B", "C"}, "one test report per dataset");

    auto cfg2 = base({"A", "B"}, 3);
    cfg2.mode = "joint";
    cfg2.methods = {sw::align::Aggregation::kAverage};
    auto b2 = sw::experiment::run(cfg2);
    ck.expect(b2.per_run.size() == 6 && b2.averaged.size() == 2, "joint 2x3 cardinality");
  }

  // runs=5: 5 per-run reports and 1 averaged report per cell.
  {
    auto cfg = base({"A"}, 5);
    auto b = sw::experiment::run(cfg);
    ck.expect(b.per_run.size() == 10 && b.averaged.size() == 2,
              "runs=5 gave " + std::to_string(b.per_run.size()) + " per-run and " +
                  std::to_string(b.averaged.size()) + " averaged");
    for (const auto& avg : b.averaged) {
      std::vector<double> p, r, f;
      for (const auto& rep : b.per_run) {
        if (rep.method != avg.method) continue;
        p.push_back(rep.precision);
        r.push_back(rep.recall);
        f.push_back(rep.f1);
      }
      ck.expect(f.size() == 5, "five reports per cell");
      const auto hand = [](const std::vector<double>& xs) {
        double mean = 0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double ss = 0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        return std::pair<double, double>{mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
      };
      auto [pm, ps] = hand(p);
      auto [rm, rs] = hand(r);
      auto [fm, fs_] = hand(f);
      ck.expect(std::abs(avg.precision - pm) <= 1e-12 && std::abs(avg.precision_std - ps) <= 1e-12,
                "precision mean/std");
      ck.expect(std::abs(avg.recall - rm) <= 1e-12 && std::abs(avg.recall_std - rs) <= 1e-12,
                "recall mean/std");
      ck.expect(std::abs(avg.f1 - fm) <= 1e-12 && std::abs(avg.f1_std - fs_) <= 1e-12,
                "f1 mean/std");
    }
    // Determinism of the written bundle.
    sw::experiment::run_and_write(base({"A"}, 1), dir / "o1");
    sw::experiment::run_and_write(base({"A"}, 1), dir / "o2");
    ck.expect(sw::read_file(dir / "o1" / "bundle.json") == sw::read_file(dir / "o2" / "bundle.json"),
              "bundle bytes differ between identical runs");
  }
  fs::remove_all(dir);
  return ck.outcome("splits deterministic/disjoint/exhaustive within +-1 over " +
                    std::to_string(ck.total()) + " checks; joint and runs=5 cardinalities hold");
}

// ---------------------------------------------------------------------------

Outcome corpus_stats() {
  const char* bf = std::getenv("SCOPEWORKS_BF_XML");
  const char* ba = std::getenv("SCOPEWORKS_BA_XML");
  if (!bf || !ba || !*bf || !*ba) {
    return {Status::kSkip, "set SCOPEWORKS_BF_XML and SCOPEWORKS_BA_XML to the official corpora"};
  }
  Checks ck;
  auto count = [](const char* path) {
    auto c = sw::corpus::parse_inline_xml(sw::read_file(path), sw::corpus::XmlFormat::kBioscope,
                                          sw::corpus::CueKind::kSpeculation);
    return sw::corpus::corpus_stats(c).sentence_count;
  };
  const auto nbf = count(bf), nba = count(ba);
  ck.expect(nbf == 2670, "BF sentences " + std::to_string(nbf));
  ck.expect(nba == 11871, "BA sentences " + std::to_string(nba));
  return ck.outcome("BF 2670, BA 11871 sentences");
}

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"worked-example exactness", 1.0, worked_example},
      {"aggregation oracle", 10.0, aggregation_oracle},
      {"metrics oracle", 10.0, metrics_oracle},
      {"gradient check", 30.0, gradient_check},
      {"zero-weight and pad independence", 1.0, zero_weight_independence},
      {"overfit smoke test and early stopping", 300.0, overfit_smoke},
      {"protocol conformance", 30.0, protocol_conformance},
      {"corpus statistics", 5.0, corpus_stats},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status == Status::kPass && secs > c.budget_seconds) {
      o.status = Status::kFail;
      o.detail += "; over the " + std::to_string(static_cast<int>(c.budget_seconds)) + " s budget";
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    if (o.status == Status::kFail) ++failures;
    std::cout << tag << "  " << c.name << "  [" << std::fixed << std::setprecision(2) << secs
              << " s]  " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
