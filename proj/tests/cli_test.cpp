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


#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "scopeworks/scopeworks.hpp"

namespace scopeworks {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
};

Result sh(const std::string& args) {
  const std::string cmd = std::string(SCOPEWORKS_CLI) + " " + args + " 2>&1";
  Result r{0, ""};
  FILE* p = popen(cmd.c_str(), "r");
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("scopeworks_cli_") +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

const std::string kData = SCOPEWORKS_TEST_DATA;

TEST_F(Cli, ConvertStatsEncode) {
  auto r = sh("convert --in " + kData + "/bioscope_sample.xml --format bioscope --out " +
              at("bf.jsonl") + " --name BF");
  ASSERT_EQ(r.code, 0) << r.out;
  auto c = corpus::read_canonical(read_file(at("bf.jsonl")));
  EXPECT_EQ(c.name, "BF");
  EXPECT_EQ(c.sentences.size(), 5u);
  r = sh("stats --in " + at("bf.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(Json::parse(r.out).at("sentence_count"), 5);
  r = sh("encode --task scope --in " + at("bf.jsonl") + " --out " + at("scope.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(encoding::read_instances(read_file(at("scope.jsonl"))).size(), 5u);
}

TEST_F(Cli, ConvertColumnsWithAffixNote) {
  auto r = sh("convert --in " + kData + "/starsem_sample.txt --format starsem --cue-kind negation --out " +
              at("sh.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("affixal"), std::string::npos);
}

TEST_F(Cli, MalformedInputExitsWithStageTag) {
  write_file_atomic(at("bad.xml"), "<doc><sentence id=\"a\">x</doc>");
  auto r = sh("convert --in " + at("bad.xml") + " --format bioscope --out " + at("x.jsonl"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("[convert]"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(at("x.jsonl")));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_NE(sh("").code, 0);
  EXPECT_NE(sh("encode --task bogus --in x --out y").code, 0);
}

TEST_F(Cli, SplitTrainPredictEvaluateReport) {
  ASSERT_EQ(sh("synth --sentences 40 --out " + at("syn.jsonl")).code, 0);
  auto r = sh("split --in " + at("syn.jsonl") + " --out-dir " + at("sp"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("train 28  val 6  test 6"), std::string::npos) << r.out;
  r = sh("train --task cue --train " + at("sp/train.jsonl") + " --val " + at("sp/val.jsonl") +
         " --out " + at("ck.json") + " --max-epochs 2 --lr 0.001 --max-len 64");
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_EQ(sh("encode --task cue --in " + at("sp/test.jsonl") + " --out " + at("test.jsonl")).code, 0);
  r = sh("predict --checkpoint " + at("ck.json") + " --in " + at("test.jsonl") + " --out " +
         at("probs.jsonl") + " --tokenized-out " + at("tok.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(model::ReplayModel::load(read_file(at("probs.jsonl")), Task::kCue, 64).size(), 6u);
  r = sh("evaluate --task cue --instances " + at("test.jsonl") + " --tokenized " + at("tok.jsonl") +
         " --probs " + at("probs.jsonl") + " --out " + at("rep.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("first_token"), std::string::npos);
  r = sh("report --in " + at("rep.json") + " --format csv");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("task,train_set", 0), 0u);
  // Probabilities for the wrong task are rejected.
  r = sh("evaluate --task scope --instances " + at("test.jsonl") + " --tokenized " +
         at("tok.jsonl") + " --probs " + at("probs.jsonl"));
  EXPECT_EQ(r.code, 3);
}

TEST_F(Cli, TokenizeExportsSchemaAndOverflow) {
  ASSERT_EQ(sh("synth --sentences 10 --out " + at("syn.jsonl")).code, 0);
  ASSERT_EQ(sh("encode --task scope --in " + at("syn.jsonl") + " --out " + at("i.jsonl")).code, 0);
  auto r = sh("tokenize --in " + at("i.jsonl") + " --build-from " + at("syn.jsonl") +
              " --max-len 64 --out " + at("t.jsonl") + " --vocab-out " + at("vocab.txt"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto toks = align::read_tokenized(read_file(at("t.jsonl")));
  EXPECT_EQ(toks.size(), encoding::read_instances(read_file(at("i.jsonl"))).size());
  r = sh("tokenize --in " + at("i.jsonl") + " --vocab " + at("vocab.txt") + " --max-len 3 --out " +
         at("t2.jsonl"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("overflow"), std::string::npos);
  r = sh("tokenize --in " + at("i.jsonl") + " --vocab " + at("vocab.txt") +
         " --max-len 3 --drop-overflow --out " + at("t3.jsonl"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("dropping"), std::string::npos);
}

TEST_F(Cli, RunWithOverrides) {
  ASSERT_EQ(sh("synth --sentences 20 --name A --out " + at("a.jsonl")).code, 0);
  Json cfg = {{"task", "cue"},
              {"datasets", {{{"name", "A"}, {"path", at("a.jsonl")}}}},
              {"tokenizer", {{"max_len", 64}}},
              {"model", {{"n_hidden", 8}, {"attention_heads", 2}, {"encoder_layers", 1}}},
              {"train", {{"max_epochs", 1}}},
              {"runs", 5}};
  write_file_atomic(at("cfg.json"), cfg.dump());
  auto r = sh("run --config " + at("cfg.json") + " --runs 2 --output-dir " + at("out"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto bundle = Json::parse(read_file(at("out/bundle.json")));
  EXPECT_EQ(bundle.at("reports").size(), 4u);
  EXPECT_EQ(bundle.at("averaged").size(), 2u);
  r = sh("report --in " + at("out/bundle.json"));
  EXPECT_EQ(r.code, 0);
  r = sh("run --config " + at("cfg.json") + " --runs 0");
  EXPECT_EQ(r.code, 2);
}

}  // namespace
}  // namespace scopeworks
