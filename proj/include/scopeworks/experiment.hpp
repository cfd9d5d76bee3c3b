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

// Experiment protocols: deterministic 70/15/15 splits, single-dataset runs
// with an inter-dataset score matrix, joint multi-dataset training, run
// repetition and report bundles.

#ifndef SCOPEWORKS_EXPERIMENT_HPP_
#define SCOPEWORKS_EXPERIMENT_HPP_

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "scopeworks/common.hpp"
#include "scopeworks/corpus.hpp"
#include "scopeworks/encoding.hpp"
#include "scopeworks/eval.hpp"
#include "scopeworks/model.hpp"
#include "scopeworks/tokenize.hpp"

namespace scopeworks::experiment {

// Failure inside run(), tagged with the pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "[" + stage + "] " + cause.what(), cause.where()),
        stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

template <class F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorKind::kInternal, e.what()));
  }
}

// ---------------------------------------------------------------------------
// Splits

// Counter-based generator: the i-th draw is a pure function of (key, i), so
// a split never depends on call history or platform library details.
class CounterRng {
 public:
  CounterRng(std::string_view name, std::uint64_t seed)
      : key_(mix(fnv1a(name) ^ mix(seed + 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t operator()() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 13;

  void validate() const {
    if (!(train > 0 && val > 0 && test > 0) || std::abs(train + val + test - 1.0) > 1e-9) {
      throw Error(ErrorKind::kConfig, "split ratios must be positive and sum to 1");
    }
  }
};

struct Split {
  corpus::Corpus train, val, test;
};

// Largest-remainder apportionment: sizes sum to n and each differs from its
// exact share by less than 1. Ties favour the earlier part.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  const double shares[3] = {spec.train * static_cast<double>(n), spec.val * static_cast<double>(n),
                            spec.test * static_cast<double>(n)};
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<std::size_t>(std::floor(shares[i] + 1e-9));
    assigned += sizes[i];
  }
  std::array<int, 3> idx = {0, 1, 2};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return shares[a] - static_cast<double>(sizes[a]) > shares[b] - static_cast<double>(sizes[b]);
  });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[idx[k % 3]];
  return sizes;
}

// Sentence-level shuffle keyed by (corpus name, seed), then contiguous slices.
inline Split split(const corpus::Corpus& c, const SplitSpec& spec) {
  spec.validate();
  if (c.sentences.size() < 3) {
    throw Error(ErrorKind::kConfig, "corpus " + c.name + " has fewer than 3 sentences");
  }
  std::vector<std::size_t> order(c.sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  CounterRng rng(c.name, spec.seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto sizes = split_sizes(order.size(), spec);
  Split out;
  for (auto* part : {&out.train, &out.val, &out.test}) {
    part->name = c.name;
    part->cue_kind = c.cue_kind;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& part = i < sizes[0] ? out.train : i < sizes[0] + sizes[1] ? out.val : out.test;
    part.sentences.push_back(c.sentences[order[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Joint training data

// Prefixes sentence ids with "<corpus name>/" unless already prefixed.
inline corpus::Corpus namespaced(corpus::Corpus c) {
  const std::string prefix = c.name + "/";
  for (auto& s : c.sentences) {
    if (s.sentence_id.rfind(prefix, 0) != 0) s.sentence_id = prefix + s.sentence_id;
  }
  return c;
}

struct JointData {
  corpus::Corpus train;
  corpus::Corpus val;
  std::vector<corpus::Corpus> tests;  // one per dataset, untouched
};

inline JointData prepare_joint(const std::vector<Split>& splits, std::uint64_t seed) {
  if (splits.empty()) throw Error(ErrorKind::kConfig, "joint mode needs datasets");
  JointData out;
  out.train.name = out.val.name = "joint";
  out.train.cue_kind = out.val.cue_kind = splits.front().train.cue_kind;
  std::set<std::string> seen;
  const auto take = [&](const corpus::Corpus& part, corpus::Corpus* into) {
    corpus::Corpus ns = namespaced(part);
    for (auto& s : ns.sentences) {
      if (!seen.insert(s.sentence_id).second) {
        throw Error(ErrorKind::kConfig, "sentence id " + s.sentence_id +
                                            " appears in more than one dataset");
      }
      if (into) into->sentences.push_back(std::move(s));
    }
    return ns;
  };
  for (const auto& sp : splits) {
    take(sp.train, &out.train);
    take(sp.val, &out.val);
  }
  for (const auto& sp : splits) {
    corpus::Corpus t = namespaced(sp.test);
    take(sp.test, nullptr);
    out.tests.push_back(std::move(t));
  }
  model::Rng rng(seed);
  rng.shuffle(out.train.sentences);
  rng.shuffle(out.val.sentences);
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

struct DatasetSpec {
  std::string name;
  std::string path;
  std::string format = "canonical";  // canonical | bioscope | sfu | columns | starsem
  corpus::CueKind cue_kind = corpus::CueKind::kSpeculation;
};

struct ExperimentConfig {
  Task task = Task::kCue;
  std::string mode = "single";  // single | joint
  std::vector<DatasetSpec> datasets;
  SplitSpec split;
  std::size_t max_len = 128;
  align::VocabOptions vocab;
  model::ClassifierConfig classifier;  // vocab_size and num_classes are filled in
  model::TrainConfig train;
  std::vector<align::Aggregation> methods = {align::Aggregation::kAverage,
                                             align::Aggregation::kFirstToken};
  std::size_t runs = 5;
  std::uint64_t base_seed = 1;
  bool allow_empty_scopes = false;
  bool drop_overflow = false;
  std::string output_dir = "artifacts";

  void validate() const {
    if (runs < 1) throw Error(ErrorKind::kConfig, "runs must be at least 1");
    if (datasets.empty()) throw Error(ErrorKind::kConfig, "no datasets configured");
    if (mode != "single" && mode != "joint") {
      throw Error(ErrorKind::kConfig, "mode must be single or joint");
    }
    if (mode == "joint" && datasets.size() < 2) {
      throw Error(ErrorKind::kConfig, "joint mode needs at least two datasets");
    }
    if (methods.empty()) throw Error(ErrorKind::kConfig, "no aggregation methods");
    std::set<std::string> names;
    for (const auto& d : datasets) {
      if (!names.insert(d.name).second) {
        throw Error(ErrorKind::kConfig, "dataset name " + d.name + " used twice");
      }
    }
    split.validate();
  }
};

// Reads every section except "datasets" and skips validation; shared by
// `run` configs and the single-model `train` command.
inline ExperimentConfig settings_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    c.task = parse_task(j.value("task", "cue"));
    c.mode = j.value("mode", c.mode);
    if (j.contains("split")) {
      const Json& s = j.at("split");
      if (s.contains("ratios")) {
        auto r = s.at("ratios").get<std::vector<double>>();
        if (r.size() != 3) throw Error(ErrorKind::kConfig, "split.ratios needs three values");
        c.split.train = r[0];
        c.split.val = r[1];
        c.split.test = r[2];
      }
      c.split.seed = s.value("seed", c.split.seed);
    }
    if (j.contains("tokenizer")) {
      const Json& t = j.at("tokenizer");
      c.max_len = t.value("max_len", c.max_len);
      c.vocab.min_count = t.value("min_count", c.vocab.min_count);
      c.vocab.max_words = t.value("max_words", c.vocab.max_words);
    }
    if (j.contains("model")) {
      const Json& m = j.at("model");
      const std::string backend = m.value("backend", "transformer");
      if (backend != "transformer") {
        throw Error(ErrorKind::kConfig,
                    "run supports the transformer backend; score external probability "
                    "files with `scopeworks evaluate`");
      }
      c.classifier = model::classifier_config_from_json(m);
    }
    if (j.contains("train")) {
      const Json& t = j.at("train");
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
      c.train.early_stop_patience = t.value("early_stop_patience", c.train.early_stop_patience);
      c.train.class_weights = t.value("class_weights", c.train.class_weights);
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) {
        c.methods.push_back(align::parse_aggregation(m.get<std::string>()));
      }
    }
    c.runs = j.value("runs", c.runs);
    c.base_seed = j.value("base_seed", c.base_seed);
    c.allow_empty_scopes = j.value("allow_empty_scopes", c.allow_empty_scopes);
    c.drop_overflow = j.value("drop_overflow", c.drop_overflow);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c = settings_from_json(j);
  try {
    for (const auto& d : j.at("datasets")) {
      DatasetSpec ds;
      ds.name = d.at("name").get<std::string>();
      ds.path = d.at("path").get<std::string>();
      ds.format = d.value("format", ds.format);
      ds.cue_kind = corpus::parse_cue_kind(d.value("cue_kind", "speculation"));
      c.datasets.push_back(std::move(ds));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline Json to_json(const ExperimentConfig& c) {
  Json datasets = Json::array();
  for (const auto& d : c.datasets) {
    datasets.push_back({{"name", d.name}, {"path", d.path}, {"format", d.format},
                        {"cue_kind", corpus::to_string(d.cue_kind)}});
  }
  Json methods = Json::array();
  for (auto m : c.methods) methods.push_back(align::to_string(m));
  Json model = model::to_json(c.classifier);
  model["backend"] = "transformer";
  model.erase("vocab_size");
  model.erase("num_classes");
  model.erase("max_len");
  return {{"task", to_string(c.task)},
          {"mode", c.mode},
          {"datasets", datasets},
          {"split", {{"ratios", {c.split.train, c.split.val, c.split.test}}, {"seed", c.split.seed}}},
          {"tokenizer",
           {{"max_len", c.max_len}, {"min_count", c.vocab.min_count}, {"max_words", c.vocab.max_words}}},
          {"model", model},
          {"train",
           {{"learning_rate", c.train.learning_rate},
            {"batch_size", c.train.batch_size},
            {"max_epochs", c.train.max_epochs},
            {"early_stop_patience", c.train.early_stop_patience},
            {"class_weights", c.train.class_weights},
            {"optimizer", "adam(beta1=0.9,beta2=0.999,eps=1e-8), constant rate"}}},
          {"methods", methods},
          {"runs", c.runs},
          {"base_seed", c.base_seed},
          {"allow_empty_scopes", c.allow_empty_scopes},
          {"drop_overflow", c.drop_overflow}};
}

// Hash of everything that influences results (the output directory does not).
inline std::string config_hash(const ExperimentConfig& c) {
  return hex64(fnv1a(to_json(c).dump()));
}

inline corpus::Corpus load_dataset(const DatasetSpec& d) {
  const std::string bytes = read_file(d.path);
  corpus::Corpus c;
  if (d.format == "canonical") {
    c = corpus::read_canonical(bytes);
  } else if (d.format == "bioscope") {
    c = corpus::parse_inline_xml(bytes, corpus::XmlFormat::kBioscope, d.cue_kind, d.name);
  } else if (d.format == "sfu") {
    c = corpus::parse_inline_xml(bytes, corpus::XmlFormat::kSfu, d.cue_kind, d.name);
  } else if (d.format == "columns") {
    c = corpus::parse_column_format(bytes, d.cue_kind, corpus::ColumnLayout::simple(), d.name);
  } else if (d.format == "starsem") {
    c = corpus::parse_column_format(bytes, d.cue_kind, corpus::ColumnLayout::starsem(), d.name);
  } else {
    throw Error(ErrorKind::kConfig, "unknown dataset format " + d.format);
  }
  c.name = d.name;
  return c;
}

// ---------------------------------------------------------------------------
// Running

// Tokenizes instances; overflowing ones are an error unless `drop_overflow`,
// in which case they are skipped and counted.
inline std::vector<model::Example> make_examples(const std::vector<encoding::TaskInstance>& insts,
                                                 const align::WordPieceTokenizer& tok,
                                                 bool drop_overflow, std::size_t* dropped) {
  std::vector<model::Example> out;
  out.reserve(insts.size());
  for (const auto& inst : insts) {
    try {
      out.push_back({inst, align::tokenize_instance(inst, tok)});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kOverflow || !drop_overflow) throw;
      std::cerr << "scopeworks: dropping " << inst.instance_id << ": " << e.what() << "\n";
      if (dropped) ++*dropped;
    }
  }
  return out;
}

struct ReportBundle {
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<eval::MetricsReport> per_run;
  std::vector<eval::MetricsReport> averaged;
  std::size_t dropped_instances = 0;
};

inline constexpr std::string_view kBundleSchema = "scopeworks-report-bundle";

inline Json to_json(const ReportBundle& b, const ExperimentConfig& c) {
  Json per_run = Json::array();
  for (const auto& r : b.per_run) per_run.push_back(eval::to_json(r));
  Json averaged = Json::array();
  for (const auto& r : b.averaged) averaged.push_back(eval::to_json(r));
  return {{"schema", kBundleSchema},
          {"version", 1},
          {"tool_version", kVersion},
          {"config", to_json(c)},
          {"config_hash", b.config_hash},
          {"class_order", class_order(c.task)},
          {"split_rule", "counter-based shuffle keyed by (corpus name, split seed), contiguous slices"},
          {"seed_rule", "run seed = base_seed + run index"},
          {"seeds", b.seeds},
          {"dropped_instances", b.dropped_instances},
          {"reports", per_run},
          {"averaged", averaged}};
}

struct RunHooks {
  // Called with the finished per-run reports of each run.
  std::function<void(std::size_t run, const std::vector<eval::MetricsReport>&)> on_run;
};

namespace detail {

inline void check_no_leakage(const std::vector<const corpus::Corpus*>& fit,
                             const corpus::Corpus& test) {
  std::set<std::string> ids;
  for (const auto* c : fit) {
    for (const auto& s : c->sentences) ids.insert(s.sentence_id);
  }
  for (const auto& s : test.sentences) {
    if (ids.count(s.sentence_id)) {
      throw Error(ErrorKind::kInternal, "test sentence " + s.sentence_id +
                                            " also used for training or validation");
    }
  }
}

struct Fitted {
  align::WordPieceTokenizer tokenizer;
  model::TrainedModel trained;
};

}  // namespace detail

// Executes split -> encode -> tokenize -> train -> predict -> aggregate ->
// score for every run seed. Stage failures surface as StageError.
inline ReportBundle run(const ExperimentConfig& config, const RunHooks& hooks = {}) {
  config.validate();
  ReportBundle bundle;
  bundle.config_hash = config_hash(config);
  const Task task = config.task;

  std::vector<Split> splits;
  for (const auto& d : config.datasets) {
    corpus::Corpus c = in_stage("load", [&] { return namespaced(load_dataset(d)); });
    splits.push_back(in_stage("split", [&] { return split(c, config.split); }));
  }

  const auto encode = [&](const corpus::Corpus& c) {
    return in_stage("encode", [&] {
      return encoding::encode_corpus(c, task, {config.allow_empty_scopes});
    });
  };
  const auto fit = [&](const corpus::Corpus& train_c, const corpus::Corpus& val_c,
                       std::uint64_t seed) {
    std::vector<std::vector<std::string>> words;
    for (const auto& s : train_c.sentences) words.push_back(s.words);
    auto tok = align::WordPieceTokenizer::build(words, config.vocab, config.max_len);
    auto train_i = encode(train_c);
    auto val_i = encode(val_c);
    auto [train_x, val_x] = in_stage("tokenize", [&] {
      return std::make_pair(make_examples(train_i, tok, config.drop_overflow, &bundle.dropped_instances),
                            make_examples(val_i, tok, config.drop_overflow, &bundle.dropped_instances));
    });
    model::ClassifierConfig cc = config.classifier;
    cc.vocab_size = tok.vocab_size();
    cc.num_classes = class_order(task).size();
    cc.max_len = config.max_len;
    model::TrainConfig tc = config.train;
    tc.seed = seed;
    auto trained = in_stage("train", [&] { return model::train(cc, train_x, val_x, tc); });
    return detail::Fitted{std::move(tok), std::move(trained)};
  };

  std::map<std::string, std::vector<encoding::TaskInstance>> tests;
  std::vector<std::string> eval_names;
  for (const auto& sp : splits) {
    tests[sp.test.name] = encode(sp.test);
    eval_names.push_back(sp.test.name);
  }

  for (std::size_t r = 0; r < config.runs; ++r) {
    const std::uint64_t seed = config.base_seed + r;
    bundle.seeds.push_back(seed);
    std::vector<std::pair<std::string, detail::Fitted>> fitted;
    if (config.mode == "single") {
      for (const auto& sp : splits) {
        for (const auto& other : splits) detail::check_no_leakage({&sp.train, &sp.val}, other.test);
        fitted.emplace_back(sp.train.name, fit(sp.train, sp.val, seed));
      }
    } else {
      JointData joint = in_stage("split", [&] {
        std::vector<Split> copy = splits;
        return prepare_joint(copy, seed);
      });
      for (const auto& t : joint.tests) detail::check_no_leakage({&joint.train, &joint.val}, t);
      fitted.emplace_back("joint", fit(joint.train, joint.val, seed));
    }

    std::vector<eval::MetricsReport> run_reports;
    for (auto method : config.methods) {
      std::vector<eval::TrainedEntry> entries;
      for (auto& [name, f] : fitted) {
        const detail::Fitted* fp = &f;
        entries.push_back({name, [&, fp, method](const std::vector<encoding::TaskInstance>& insts) {
                             auto ex = in_stage("tokenize", [&] {
                               return make_examples(insts, fp->tokenizer, config.drop_overflow,
                                                    nullptr);
                             });
                             return in_stage("predict", [&] {
                               return model::predict_words(fp->trained.model, ex, method);
                             });
                           }});
      }
      auto matrix = in_stage("score", [&] {
        return eval::cross_matrix(entries, eval_names, tests, task, method);
      });
      for (auto& row : matrix) {
        for (auto& rep : row) {
          rep.seeds = {seed};
          rep.config_hash = bundle.config_hash;
          run_reports.push_back(std::move(rep));
        }
      }
    }
    if (hooks.on_run) hooks.on_run(r, run_reports);
    bundle.per_run.insert(bundle.per_run.end(), run_reports.begin(), run_reports.end());
  }

  // One averaged report per (train set, eval set, method) cell, in first-seen order.
  std::vector<std::string> keys;
  std::map<std::string, std::vector<eval::MetricsReport>> cells;
  for (const auto& rep : bundle.per_run) {
    std::string key = rep.train_set + "\n" + rep.eval_set + "\n" + std::string(align::to_string(rep.method));
    if (!cells.count(key)) keys.push_back(key);
    cells[key].push_back(rep);
  }
  for (const auto& k : keys) bundle.averaged.push_back(eval::average_runs(cells[k]));
  return bundle;
}

// Output directory: SCOPEWORKS_ARTIFACTS_DIR when set, else the configured one.
inline std::filesystem::path output_directory(const ExperimentConfig& c) {
  if (const char* env = std::getenv("SCOPEWORKS_ARTIFACTS_DIR"); env && *env) return env;
  return c.output_dir;
}

// Runs and writes: runs/run-<i>.json as each run completes, then bundle.json,
// report.txt, report.csv, and metadata.json (the only file with a timestamp).
inline ReportBundle run_and_write(const ExperimentConfig& config,
                                  const std::filesystem::path& dir) {
  RunHooks hooks;
  hooks.on_run = [&](std::size_t r, const std::vector<eval::MetricsReport>& reports) {
    Json arr = Json::array();
    for (const auto& rep : reports) arr.push_back(eval::to_json(rep));
    in_stage("write", [&] {
      write_file_atomic(dir / "runs" / ("run-" + std::to_string(r) + ".json"),
                        Json{{"run", r}, {"seed", config.base_seed + r}, {"reports", arr}}.dump(2) +
                            "\n");
      return 0;
    });
  };
  ReportBundle b = run(config, hooks);
  in_stage("write", [&] {
    write_file_atomic(dir / "bundle.json", to_json(b, config).dump(2) + "\n");
    std::vector<eval::MetricsReport> all = b.averaged;
    write_file_atomic(dir / "report.txt", eval::render_table(all));
    write_file_atomic(dir / "report.csv", eval::render_csv(all));
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    write_file_atomic(dir / "metadata.json",
                      Json{{"created", stamp}, {"config_hash", b.config_hash}}.dump(2) + "\n");
    return 0;
  });
  return b;
}

}  // namespace scopeworks::experiment

#endif  // SCOPEWORKS_EXPERIMENT_HPP_
