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

// Rule-generated corpora with a fixed cue lexicon. A sentence is one to three
// comma-separated clauses ending in "."; a clause may hold one cue, whose
// scope is every later word of the same clause. Useful for smoke tests and
// for exercising the pipeline without licensed data.

#ifndef SCOPEWORKS_SYNTHETIC_HPP_
#define SCOPEWORKS_SYNTHETIC_HPP_

#include <string>
#include <vector>

#include "scopeworks/corpus.hpp"
#include "scopeworks/model.hpp"

namespace scopeworks::synthetic {

struct Lexicon {
  std::vector<std::string> fillers = {
      "the",      "cells",    "protein",  "expression", "results", "data",
      "gene",     "levels",   "patients", "study",      "analysis", "we",
      "observed", "increased", "binding", "activity",   "in",      "of",
      "and",      "to",       "with",     "response",   "model",   "treatment",
      "samples",  "was",      "were",     "is",         "are",     "this",
      "that",     "these",    "factor",   "role",       "function", "signal",
      "pathway",  "tissue",   "cancer",   "human"};
  std::vector<std::string> single_cues = {"might", "may",    "possibly", "perhaps",
                                          "suggest", "likely", "could",  "unclear"};
  std::vector<std::vector<std::string>> multiword_cues = {{"not", "certain"},
                                                          {"open", "question"}};
};

struct Options {
  std::size_t sentences = 500;
  std::uint64_t seed = 1;
  double cue_probability = 0.55;      // per clause
  double multiword_probability = 0.25;  // given a cue
  double rare_word_probability = 0.08;  // per filler slot; rare words split into pieces
  std::string id_prefix = "syn";
  std::string name = "synthetic";
};

inline corpus::Corpus generate(const Options& opt, const Lexicon& lex = {}) {
  model::Rng rng(opt.seed);
  const auto pick = [&](const auto& v) -> const auto& { return v[rng.below(v.size())]; };
  const auto rare_word = [&]() {
    std::string w;
    const std::size_t len = 6 + rng.below(5);
    for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.below(26));
    return w;
  };

  corpus::Corpus c;
  c.name = opt.name;
  c.cue_kind = corpus::CueKind::kSpeculation;
  for (std::size_t s = 0; s < opt.sentences; ++s) {
    corpus::AnnotatedSentence sent;
    sent.sentence_id = opt.id_prefix + "-" + std::to_string(s + 1);
    const std::size_t clauses = 1 + rng.below(3);
    for (std::size_t k = 0; k < clauses; ++k) {
      if (k) sent.words.push_back(",");
      const std::size_t slots = 3 + rng.below(5);
      const bool has_cue = rng.uniform() < opt.cue_probability;
      // The cue never takes the last slot, so every scope is non-empty.
      const std::size_t cue_slot = has_cue ? rng.below(slots - 1) : slots;
      std::vector<int> scope;
      corpus::CueAnnotation cue;
      for (std::size_t slot = 0; slot < slots; ++slot) {
        if (slot == cue_slot) {
          cue.id = "c" + std::to_string(sent.cues.size() + 1);
          cue.kind = corpus::CueKind::kSpeculation;
          std::vector<std::string> cue_words;
          if (rng.uniform() < opt.multiword_probability) {
            cue_words = pick(lex.multiword_cues);
          } else {
            cue_words = {pick(lex.single_cues)};
          }
          for (auto& w : cue_words) {
            cue.word_indices.push_back(static_cast<int>(sent.words.size()));
            sent.words.push_back(std::move(w));
          }
          continue;
        }
        if (slot > cue_slot && has_cue) scope.push_back(static_cast<int>(sent.words.size()));
        sent.words.push_back(rng.uniform() < opt.rare_word_probability ? rare_word()
                                                                       : pick(lex.fillers));
      }
      if (has_cue) {
        sent.scopes.push_back({cue.id, scope});
        sent.cues.push_back(std::move(cue));
      }
    }
    sent.words.push_back(".");
    c.sentences.push_back(std::move(sent));
  }
  corpus::validate(c);
  return c;
}

}  // namespace scopeworks::synthetic

#endif  // SCOPEWORKS_SYNTHETIC_HPP_
