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

// scopeworks: command-line front end for corpus conversion, encoding,
// tokenization, training, prediction, scoring and experiment runs.
//
// Exit codes: 0 success, 2 usage or configuration, 3 bad input data,
// 4 file system, 5 internal.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scopeworks/scopeworks.hpp"

namespace fs = std::filesystem;
namespace sw = scopeworks;

namespace {

int exit_code(sw::ErrorKind kind) {
  switch (kind) {
    case sw::ErrorKind::kConfig:
      return 2;
    case sw::ErrorKind::kIo:
      return 4;
    case sw::ErrorKind::kInternal:
      return 5;
    default:
      return 3;
  }
}

sw::corpus::Corpus load_corpus(const std::string& path, const std::string& format,
                               sw::corpus::CueKind kind, const std::string& name) {
  sw::experiment::DatasetSpec spec{name, path, format, kind};
  return sw::experiment::load_dataset(spec);
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

sw::Json read_json_file(const std::string& path) {
  try {
    return sw::Json::parse(sw::read_file(path));
  } catch (const sw::Json::parse_error& e) {
    throw sw::Error(sw::ErrorKind::kParse, path + ": " + e.what());
  }
}

// Tokenized view of every instance, keyed by instance id.
std::map<std::string, sw::align::TokenizedInstance> index_tokenized(
    std::vector<sw::align::TokenizedInstance> items) {
  std::map<std::string, sw::align::TokenizedInstance> out;
  for (auto& t : items) {
    std::string id = t.instance_id;
    if (!out.emplace(id, std::move(t)).second) {
      throw sw::Error(sw::ErrorKind::kSchema, "duplicate tokenized instance " + id);
    }
  }
  return out;
}

void log_epoch(const sw::model::EpochRecord& r) {
  std::cerr << "epoch " << r.epoch << "  loss " << r.train_loss << "  val_f1 " << r.val_f1
            << "\n";
}

struct Overrides {
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> base_seed;
  std::optional<int> max_epochs;
  std::optional<int> patience;
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> max_len;
  std::optional<std::string> output_dir;
  std::optional<std::string> mode;
  bool drop_overflow = false;
  bool allow_empty_scopes = false;

  void add_to(CLI::App* app) {
    app->add_option("--runs", runs, "Number of runs");
    app->add_option("--base-seed", base_seed, "First run seed");
    app->add_option("--max-epochs", max_epochs, "Epoch limit");
    app->add_option("--patience", patience, "Early stopping patience");
    app->add_option("--lr", learning_rate, "Adam learning rate");
    app->add_option("--batch-size", batch_size, "Sentences per batch");
    app->add_option("--max-len", max_len, "Token sequence length");
    app->add_option("--output-dir", output_dir, "Artifacts directory");
    app->add_option("--mode", mode, "single or joint")->check(CLI::IsMember({"single", "joint"}));
    app->add_flag("--drop-overflow", drop_overflow, "Skip over-long instances with a log line");
    app->add_flag("--allow-empty-scopes", allow_empty_scopes, "Accept cues with empty scopes");
  }

  void apply(sw::experiment::ExperimentConfig& c) const {
    if (runs) c.runs = *runs;
    if (base_seed) c.base_seed = *base_seed;
    if (max_epochs) c.train.max_epochs = *max_epochs;
    if (patience) c.train.early_stop_patience = *patience;
    if (learning_rate) c.train.learning_rate = *learning_rate;
    if (batch_size) c.train.batch_size = *batch_size;
    if (max_len) c.max_len = *max_len;
    if (output_dir) c.output_dir = *output_dir;
    if (mode) c.mode = *mode;
    if (drop_overflow) c.drop_overflow = true;
    if (allow_empty_scopes) c.allow_empty_scopes = true;
  }
};

const std::vector<std::string> kFormats = {"canonical", "bioscope", "sfu", "columns", "starsem"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculation and negation cue and scope detection toolkit"};
  app.set_version_flag("--version", std::string(sw::kVersion));
  app.require_subcommand(1);
  std::string stage = "cli";

  // convert
  auto* convert = app.add_subcommand("convert", "Convert an annotated corpus to canonical JSONL");
  std::string conv_in, conv_out, conv_format, conv_kind = "speculation", conv_name;
  convert->add_option("--in", conv_in, "Input corpus")->required()->check(CLI::ExistingFile);
  convert->add_option("--format", conv_format, "Input format")
      ->required()
      ->check(CLI::IsMember({"bioscope", "sfu", "columns", "starsem"}));
  convert->add_option("--cue-kind", conv_kind, "speculation or negation")
      ->check(CLI::IsMember({"speculation", "negation"}));
  convert->add_option("--name", conv_name, "Corpus name (default: file stem)");
  convert->add_option("--out", conv_out, "Output canonical JSONL")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Print corpus statistics");
  std::string stats_in, stats_format = "canonical", stats_kind = "speculation";
  stats->add_option("--in", stats_in, "Corpus")->required()->check(CLI::ExistingFile);
  stats->add_option("--format", stats_format, "Input format")->check(CLI::IsMember(kFormats));
  stats->add_option("--cue-kind", stats_kind, "speculation or negation")
      ->check(CLI::IsMember({"speculation", "negation"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic canonical corpus");
  sw::synthetic::Options synth_opt;
  std::string synth_out;
  synth->add_option("--sentences", synth_opt.sentences, "Sentence count");
  synth->add_option("--seed", synth_opt.seed, "Generator seed");
  synth->add_option("--name", synth_opt.name, "Corpus name");
  synth->add_option("--out", synth_out, "Output canonical JSONL")->required();

  // split
  auto* split = app.add_subcommand("split", "Split a canonical corpus 70/15/15");
  std::string split_in, split_dir;
  sw::experiment::SplitSpec split_spec;
  std::vector<double> split_ratios;
  split->add_option("--in", split_in, "Canonical corpus")->required()->check(CLI::ExistingFile);
  split->add_option("--out-dir", split_dir, "Directory for train/val/test files")->required();
  split->add_option("--seed", split_spec.seed, "Split seed");
  split->add_option("--ratios", split_ratios, "train val test")->expected(3);

  // encode
  auto* encode = app.add_subcommand("encode", "Encode a canonical corpus as task instances");
  std::string enc_task, enc_in, enc_out;
  bool enc_empty = false;
  encode->add_option("--task", enc_task, "cue or scope")
      ->required()
      ->check(CLI::IsMember({"cue", "scope"}));
  encode->add_option("--in", enc_in, "Canonical corpus")->required()->check(CLI::ExistingFile);
  encode->add_option("--out", enc_out, "Instance JSONL")->required();
  encode->add_flag("--allow-empty-scopes", enc_empty, "Accept cues with empty scopes");

  // tokenize
  auto* tokenize = app.add_subcommand("tokenize", "Tokenize encoded instances");
  std::string tok_in, tok_out, tok_vocab, tok_corpus, tok_vocab_out;
  std::size_t tok_max_len = 128;
  sw::align::VocabOptions tok_vocab_opt;
  bool tok_drop = false;
  tokenize->add_option("--in", tok_in, "Instance JSONL")->required()->check(CLI::ExistingFile);
  tokenize->add_option("--out", tok_out, "Tokenized JSONL")->required();
  auto* vocab_opt =
      tokenize->add_option("--vocab", tok_vocab, "Vocabulary file")->check(CLI::ExistingFile);
  tokenize->add_option("--build-from", tok_corpus, "Build the vocabulary from this corpus")
      ->check(CLI::ExistingFile)
      ->excludes(vocab_opt);
  tokenize->add_option("--vocab-out", tok_vocab_out, "Write the vocabulary used");
  tokenize->add_option("--max-len", tok_max_len, "Token sequence length");
  tokenize->add_option("--min-count", tok_vocab_opt.min_count, "Whole-word frequency floor");
  tokenize->add_flag("--drop-overflow", tok_drop, "Skip over-long instances with a log line");

  // train
  auto* train = app.add_subcommand("train", "Train the toy transformer on one corpus");
  std::string tr_train, tr_val, tr_out, tr_config, tr_task = "cue";
  std::uint64_t tr_seed = 1;
  Overrides tr_over;
  train->add_option("--task", tr_task, "cue or scope")->check(CLI::IsMember({"cue", "scope"}));
  train->add_option("--train", tr_train, "Canonical training corpus")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--val", tr_val, "Canonical validation corpus")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", tr_out, "Checkpoint path")->required();
  train->add_option("--config", tr_config, "Settings file (tokenizer/model/train sections)")
      ->check(CLI::ExistingFile);
  train->add_option("--seed", tr_seed, "Model seed");
  tr_over.add_to(train);

  // predict
  auto* predict = app.add_subcommand("predict", "Write token probabilities for instances");
  std::string pr_ckpt, pr_in, pr_out, pr_tok_out;
  bool pr_drop = false;
  predict->add_option("--checkpoint", pr_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--in", pr_in, "Instance JSONL")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", pr_out, "Probability JSONL")->required();
  predict->add_option("--tokenized-out", pr_tok_out, "Also write the tokenized instances");
  predict->add_flag("--drop-overflow", pr_drop, "Skip over-long instances with a log line");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score probability files against gold labels");
  std::string ev_task = "cue", ev_inst, ev_tok, ev_probs, ev_out, ev_method = "both";
  std::string ev_train_set = "external", ev_eval_set;
  evaluate->add_option("--task", ev_task, "cue or scope")->check(CLI::IsMember({"cue", "scope"}));
  evaluate->add_option("--instances", ev_inst, "Gold instance JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--tokenized", ev_tok, "Tokenized JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--probs", ev_probs, "Probability JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--method", ev_method, "average, first_token or both")
      ->check(CLI::IsMember({"average", "first", "first_token", "both"}));
  evaluate->add_option("--train-set", ev_train_set, "Label for the training set");
  evaluate->add_option("--eval-set", ev_eval_set, "Label for the evaluation set");
  evaluate->add_option("--out", ev_out, "Report JSON");

  // report
  auto* report = app.add_subcommand("report", "Render reports from a bundle or report file");
  std::string rep_in, rep_format = "table";
  bool rep_per_run = false;
  report->add_option("--in", rep_in, "bundle.json or report JSON")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--format", rep_format, "table, csv or json")
      ->check(CLI::IsMember({"table", "csv", "json"}));
  report->add_flag("--per-run", rep_per_run, "Show per-run reports instead of averages");

  // run
  auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
  std::string run_config;
  Overrides run_over;
  run->add_option("--config", run_config, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run_over.add_to(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*convert) {
      stage = "convert";
      auto c = load_corpus(conv_in, conv_format, sw::corpus::parse_cue_kind(conv_kind),
                           conv_name.empty() ? stem_of(conv_in) : conv_name);
      sw::write_file_atomic(conv_out, sw::corpus::write_canonical(c));
      for (const auto& n : c.notes) std::cerr << "note: " << n << "\n";
      std::cerr << c.sentences.size() << " sentences written to " << conv_out << "\n";
    } else if (*stats) {
      stage = "stats";
      auto c = load_corpus(stats_in, stats_format, sw::corpus::parse_cue_kind(stats_kind),
                           stem_of(stats_in));
      std::cout << sw::corpus::to_json(sw::corpus::corpus_stats(c)).dump(2) << "\n";
    } else if (*synth) {
      stage = "synth";
      sw::write_file_atomic(synth_out,
                            sw::corpus::write_canonical(sw::synthetic::generate(synth_opt)));
    } else if (*split) {
      stage = "split";
      if (!split_ratios.empty()) {
        split_spec.train = split_ratios[0];
        split_spec.val = split_ratios[1];
        split_spec.test = split_ratios[2];
      }
      auto c = sw::corpus::read_canonical(sw::read_file(split_in));
      auto parts = sw::experiment::split(c, split_spec);
      const fs::path dir = split_dir;
      sw::write_file_atomic(dir / "train.jsonl", sw::corpus::write_canonical(parts.train));
      sw::write_file_atomic(dir / "val.jsonl", sw::corpus::write_canonical(parts.val));
      sw::write_file_atomic(dir / "test.jsonl", sw::corpus::write_canonical(parts.test));
      std::cerr << "train " << parts.train.sentences.size() << "  val "
                << parts.val.sentences.size() << "  test " << parts.test.sentences.size() << "\n";
    } else if (*encode) {
      stage = "encode";
      auto c = sw::corpus::read_canonical(sw::read_file(enc_in));
      auto insts = sw::encoding::encode_corpus(c, sw::parse_task(enc_task), {enc_empty});
      sw::write_file_atomic(enc_out, sw::encoding::write_instances(insts));
    } else if (*tokenize) {
      stage = "tokenize";
      auto insts = sw::encoding::read_instances(sw::read_file(tok_in));
      sw::align::WordPieceTokenizer tok;
      if (!tok_vocab.empty()) {
        tok = sw::align::WordPieceTokenizer::from_vocab_text(sw::read_file(tok_vocab), tok_max_len);
      } else {
        std::vector<std::vector<std::string>> words;
        if (!tok_corpus.empty()) {
          for (const auto& s : sw::corpus::read_canonical(sw::read_file(tok_corpus)).sentences) {
            words.push_back(s.words);
          }
        } else {
          for (const auto& i : insts) words.push_back(i.words);
        }
        tok = sw::align::WordPieceTokenizer::build(words, tok_vocab_opt, tok_max_len);
      }
      std::vector<sw::align::TokenizedInstance> out;
      for (auto& ex : sw::experiment::make_examples(insts, tok, tok_drop, nullptr)) {
        out.push_back(std::move(ex.tokens));
      }
      sw::write_file_atomic(tok_out, sw::align::write_tokenized(out));
      if (!tok_vocab_out.empty()) sw::write_file_atomic(tok_vocab_out, tok.to_vocab_text());
    } else if (*train) {
      stage = "config";
      sw::experiment::ExperimentConfig cfg;
      if (!tr_config.empty()) cfg = sw::experiment::settings_from_json(read_json_file(tr_config));
      tr_over.apply(cfg);
      const sw::Task task = sw::parse_task(tr_task);
      stage = "load";
      auto train_c = sw::corpus::read_canonical(sw::read_file(tr_train));
      auto val_c = sw::corpus::read_canonical(sw::read_file(tr_val));
      std::vector<std::vector<std::string>> words;
      for (const auto& s : train_c.sentences) words.push_back(s.words);
      stage = "tokenize";
      auto tok = sw::align::WordPieceTokenizer::build(words, cfg.vocab, cfg.max_len);
      stage = "encode";
      auto train_i = sw::encoding::encode_corpus(train_c, task, {cfg.allow_empty_scopes});
      auto val_i = sw::encoding::encode_corpus(val_c, task, {cfg.allow_empty_scopes});
      stage = "tokenize";
      auto train_x = sw::experiment::make_examples(train_i, tok, cfg.drop_overflow, nullptr);
      auto val_x = sw::experiment::make_examples(val_i, tok, cfg.drop_overflow, nullptr);
      stage = "train";
      sw::model::ClassifierConfig cc = cfg.classifier;
      cc.vocab_size = tok.vocab_size();
      cc.num_classes = sw::class_order(task).size();
      cc.max_len = cfg.max_len;
      sw::model::TrainConfig tc = cfg.train;
      tc.seed = tr_seed;
      tc.on_epoch_end = [](const sw::model::EpochRecord& r, const auto&) { log_epoch(r); };
      auto trained = sw::model::train(cc, train_x, val_x, tc);
      std::cerr << "best epoch " << trained.history.best_epoch
                << (trained.history.early_stopped ? " (early stop)" : "") << "\n";
      stage = "write";
      sw::write_file_atomic(tr_out, sw::model::save_checkpoint({task, trained.model, tok}));
    } else if (*predict) {
      stage = "load";
      auto ck = sw::model::load_checkpoint(sw::read_file(pr_ckpt));
      auto insts = sw::encoding::read_instances(sw::read_file(pr_in));
      for (const auto& i : insts) {
        if (i.task != ck.task) {
          throw sw::Error(sw::ErrorKind::kInput, "instance " + i.instance_id + " is a " +
                                                     std::string(sw::to_string(i.task)) +
                                                     " instance; checkpoint is for " +
                                                     std::string(sw::to_string(ck.task)));
        }
      }
      stage = "tokenize";
      auto examples = sw::experiment::make_examples(insts, ck.tokenizer, pr_drop, nullptr);
      stage = "predict";
      std::vector<std::pair<std::string, sw::align::ProbTable>> tables;
      std::vector<sw::align::TokenizedInstance> toks;
      for (const auto& ex : examples) {
        tables.emplace_back(ex.tokens.instance_id, ck.model.predict(ex.tokens));
        toks.push_back(ex.tokens);
      }
      stage = "write";
      sw::write_file_atomic(pr_out, sw::model::write_probability_file(tables, ck.task));
      if (!pr_tok_out.empty()) sw::write_file_atomic(pr_tok_out, sw::align::write_tokenized(toks));
    } else if (*evaluate) {
      stage = "load";
      const sw::Task task = sw::parse_task(ev_task);
      auto insts = sw::encoding::read_instances(sw::read_file(ev_inst));
      auto toks = index_tokenized(sw::align::read_tokenized(sw::read_file(ev_tok)));
      auto replay = sw::model::ReplayModel::load(sw::read_file(ev_probs), task);
      std::vector<sw::align::Aggregation> methods;
      if (ev_method == "both") {
        methods = {sw::align::Aggregation::kAverage, sw::align::Aggregation::kFirstToken};
      } else {
        methods = {sw::align::parse_aggregation(ev_method)};
      }
      stage = "score";
      std::vector<sw::eval::MetricsReport> reports;
      for (auto method : methods) {
        std::vector<sw::eval::WordPredictions> preds;
        for (const auto& inst : insts) {
          if (inst.task != task) {
            throw sw::Error(sw::ErrorKind::kInput,
                            "instance " + inst.instance_id + " belongs to another task");
          }
          auto it = toks.find(inst.instance_id);
          if (it == toks.end()) {
            throw sw::Error(sw::ErrorKind::kLookup,
                            "no tokenized instance for " + inst.instance_id);
          }
          const auto& table = replay.table(inst.instance_id);
          if (table.rows() != it->second.tokens.size()) {
            throw sw::Error(sw::ErrorKind::kSchema,
                            "instance " + inst.instance_id + ": " +
                                std::to_string(table.rows()) + " probability rows for " +
                                std::to_string(it->second.tokens.size()) + " tokens");
          }
          preds.push_back(sw::eval::make_word_predictions(inst, it->second, table, method));
        }
        auto rep = sw::eval::score_task(preds, task);
        rep.train_set = ev_train_set;
        rep.eval_set = ev_eval_set.empty() ? stem_of(ev_inst) : ev_eval_set;
        rep.method = method;
        reports.push_back(std::move(rep));
      }
      std::cout << sw::eval::render_table(reports);
      if (!ev_out.empty()) {
        sw::Json arr = sw::Json::array();
        for (const auto& r : reports) arr.push_back(sw::eval::to_json(r));
        sw::write_file_atomic(ev_out, sw::Json{{"reports", arr}}.dump(2) + "\n");
      }
    } else if (*report) {
      stage = "report";
      const sw::Json j = read_json_file(rep_in);
      const char* key = rep_per_run || !j.contains("averaged") ? "reports" : "averaged";
      std::vector<sw::eval::MetricsReport> reports;
      try {
        for (const auto& r : j.at(key)) reports.push_back(sw::eval::report_from_json(r));
      } catch (const sw::Json::exception& e) {
        throw sw::Error(sw::ErrorKind::kSchema, rep_in + ": " + e.what());
      }
      if (rep_format == "table") {
        std::cout << sw::eval::render_table(reports);
      } else if (rep_format == "csv") {
        std::cout << sw::eval::render_csv(reports);
      } else {
        sw::Json arr = sw::Json::array();
        for (const auto& r : reports) arr.push_back(sw::eval::to_json(r));
        std::cout << arr.dump(2) << "\n";
      }
    } else if (*run) {
      stage = "config";
      auto cfg = sw::experiment::config_from_json(read_json_file(run_config));
      run_over.apply(cfg);
      cfg.validate();
      const fs::path dir = sw::experiment::output_directory(cfg);
      stage = "run";
      auto bundle = sw::experiment::run_and_write(cfg, dir);
      std::cout << sw::eval::render_table(bundle.averaged);
      std::cerr << "artifacts in " << dir.string() << "\n";
    }
  } catch (const sw::experiment::StageError& e) {
    std::cerr << "scopeworks: error " << e.what() << " (" << sw::to_string(e.kind()) << ")\n";
    return exit_code(e.kind());
  } catch (const sw::Error& e) {
    std::cerr << "scopeworks: error [" << stage << "] " << e.what() << " ("
              << sw::to_string(e.kind()) << ")\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "scopeworks: error [" << stage << "] " << e.what() << "\n";
    return 5;
  }
  return 0;
}
