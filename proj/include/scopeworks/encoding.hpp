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

// Word-level task instances.
//
// Cue detection labels every word 1 (single-word cue), 2 (word of a multiword
// cue) or 3 (not a cue). Scope resolution produces one instance per cue: the
// words are copied with a marker word inserted before the cue's first word,
// and every word is labelled 1 (in scope) or 0 (out of scope). The marker
// carries the label of the word that follows it and is skipped by scoring.

#ifndef SCOPEWORKS_ENCODING_HPP_
#define SCOPEWORKS_ENCODING_HPP_

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "scopeworks/common.hpp"
#include "scopeworks/corpus.hpp"

namespace scopeworks::encoding {

// Reserved marker words, one per cue class.
inline constexpr std::string_view kNormalCueMarker = "<token[1]>";
inline constexpr std::string_view kMultiwordCueMarker = "<token[2]>";

inline std::string_view marker_for(int cue_class) {
  return cue_class == kMultiwordCue ? kMultiwordCueMarker : kNormalCueMarker;
}

inline bool is_marker(std::string_view word) {
  return word == kNormalCueMarker || word == kMultiwordCueMarker;
}

struct TaskInstance {
  std::string instance_id;
  std::string sentence_id;
  Task task = Task::kCue;
  std::vector<std::string> words;
  std::vector<int> labels;
  std::string cue_id;                // scope task only
  std::vector<int> marker_positions;  // scope task only, ascending

  bool is_marker_position(std::size_t i) const {
    return std::binary_search(marker_positions.begin(), marker_positions.end(),
                              static_cast<int>(i));
  }

  // Number of words that take part in scoring.
  std::size_t real_word_count() const {
    return words.size() - marker_positions.size();
  }

  bool operator==(const TaskInstance&) const = default;
};

inline TaskInstance encode_cue_task(const corpus::AnnotatedSentence& sentence) {
  corpus::validate(sentence);
  TaskInstance inst;
  inst.instance_id = sentence.sentence_id;
  inst.sentence_id = sentence.sentence_id;
  inst.task = Task::kCue;
  inst.words = sentence.words;
  inst.labels.assign(sentence.words.size(), kNotCue);
  std::vector<const std::string*> owner(sentence.words.size(), nullptr);
  for (const auto& cue : sentence.cues) {
    const int label = cue.multiword() ? kMultiwordCue : kNormalCue;
    for (int w : cue.word_indices) {
      if (owner[w]) {
        throw Error(ErrorKind::kEncoding,
                    "sentence " + sentence.sentence_id + ": cues " + *owner[w] +
                        " and " + cue.id + " share word " + std::to_string(w));
      }
      owner[w] = &cue.id;
      inst.labels[w] = label;
    }
  }
  return inst;
}

// One instance per cue, in cue order. Cues without a scope annotation are an
// error unless `allow_empty_scopes`, in which case every label is 0.
inline std::vector<TaskInstance> encode_scope_task(
    const corpus::AnnotatedSentence& sentence, bool allow_empty_scopes = false) {
  corpus::validate(sentence);
  std::vector<TaskInstance> out;
  for (const auto& cue : sentence.cues) {
    const corpus::ScopeAnnotation* scope = sentence.scope_for(cue.id);
    if (!scope && !allow_empty_scopes) {
      throw Error(ErrorKind::kEncoding, "sentence " + sentence.sentence_id +
                                            ": cue " + cue.id +
                                            " has no scope annotation");
    }
    std::vector<int> gold(sentence.words.size(), kOutOfScope);
    if (scope) {
      for (int w : scope->word_indices) gold[w] = kInScope;
    }
    TaskInstance inst;
    inst.instance_id = sentence.sentence_id + "#" + cue.id;
    inst.sentence_id = sentence.sentence_id;
    inst.task = Task::kScope;
    inst.cue_id = cue.id;
    const int first = cue.word_indices.front();
    const int cue_class = cue.multiword() ? kMultiwordCue : kNormalCue;
    for (std::size_t w = 0; w < sentence.words.size(); ++w) {
      if (static_cast<int>(w) == first) {
        inst.marker_positions.push_back(static_cast<int>(inst.words.size()));
        inst.words.emplace_back(marker_for(cue_class));
        inst.labels.push_back(gold[w]);
      }
      inst.words.push_back(sentence.words[w]);
      inst.labels.push_back(gold[w]);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// Removes the marker words, returning the original sentence words and labels.
inline TaskInstance strip_markers(const TaskInstance& inst) {
  TaskInstance out = inst;
  out.words.clear();
  out.labels.clear();
  out.marker_positions.clear();
  for (std::size_t i = 0; i < inst.words.size(); ++i) {
    if (inst.is_marker_position(i)) continue;
    out.words.push_back(inst.words[i]);
    out.labels.push_back(inst.labels[i]);
  }
  return out;
}

// Maximal runs of label 2 become one multiword cue each; every label-1 word is
// a cue of its own. Ids are p1, p2, ... in word order.
inline std::vector<corpus::CueAnnotation> decode_cue_predictions(
    const std::vector<int>& word_labels,
    corpus::CueKind kind = corpus::CueKind::kSpeculation) {
  std::vector<corpus::CueAnnotation> cues;
  const auto next_id = [&]() { return "p" + std::to_string(cues.size() + 1); };
  for (std::size_t i = 0; i < word_labels.size();) {
    if (word_labels[i] == kNormalCue) {
      cues.push_back({next_id(), kind, {static_cast<int>(i)}});
      ++i;
    } else if (word_labels[i] == kMultiwordCue) {
      corpus::CueAnnotation cue{next_id(), kind, {}};
      while (i < word_labels.size() && word_labels[i] == kMultiwordCue) {
        cue.word_indices.push_back(static_cast<int>(i++));
      }
      cues.push_back(std::move(cue));
    } else {
      ++i;
    }
  }
  return cues;
}

struct EncodeOptions {
  bool allow_empty_scopes = false;
};

inline std::vector<TaskInstance> encode_corpus(const corpus::Corpus& corpus,
                                               Task task,
                                               const EncodeOptions& options = {}) {
  std::vector<TaskInstance> out;
  for (const auto& s : corpus.sentences) {
    if (task == Task::kCue) {
      out.push_back(encode_cue_task(s));
    } else {
      auto scoped = encode_scope_task(s, options.allow_empty_scopes);
      std::move(scoped.begin(), scoped.end(), std::back_inserter(out));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoded-instance JSON Lines

inline Json to_json(const TaskInstance& inst) {
  Json j = {{"instance_id", inst.instance_id},
            {"task", to_string(inst.task)},
            {"words", inst.words},
            {"labels", inst.labels},
            {"sentence_id", inst.sentence_id}};
  if (inst.task == Task::kScope) {
    j["cue_id"] = inst.cue_id;
    j["marker_positions"] = inst.marker_positions;
  }
  return j;
}

inline TaskInstance instance_from_json(const Json& j) {
  TaskInstance inst;
  inst.instance_id = j.at("instance_id").get<std::string>();
  inst.task = parse_task(j.at("task").get<std::string>());
  inst.words = j.at("words").get<std::vector<std::string>>();
  inst.labels = j.at("labels").get<std::vector<int>>();
  inst.sentence_id = j.value("sentence_id", inst.instance_id);
  if (inst.task == Task::kScope) {
    inst.cue_id = j.value("cue_id", "");
    inst.marker_positions = j.value("marker_positions", std::vector<int>{});
  }
  if (inst.labels.size() != inst.words.size()) {
    throw Error(ErrorKind::kSchema,
                "instance " + inst.instance_id + ": labels and words differ in length");
  }
  for (int label : inst.labels) {
    bool ok = inst.task == Task::kCue ? (label >= 1 && label <= 3)
                                      : (label == 0 || label == 1);
    if (!ok) {
      throw Error(ErrorKind::kSchema, "instance " + inst.instance_id + ": label " +
                                          std::to_string(label) + " outside alphabet");
    }
  }
  for (int m : inst.marker_positions) {
    if (m < 0 || m >= static_cast<int>(inst.words.size())) {
      throw Error(ErrorKind::kSchema,
                  "instance " + inst.instance_id + ": marker position out of range");
    }
  }
  return inst;
}

inline std::string write_instances(const std::vector<TaskInstance>& instances) {
  std::string out;
  for (const auto& inst : instances) out += to_json(inst).dump() + "\n";
  return out;
}

inline std::vector<TaskInstance> read_instances(std::string_view bytes) {
  std::vector<TaskInstance> out;
  for (const auto& line : parse_jsonl(bytes)) {
    try {
      out.push_back(instance_from_json(line.value));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kSchema,
                  "line " + std::to_string(line.line_number) + ": " + e.what(),
                  static_cast<std::int64_t>(line.line_number));
    }
  }
  return out;
}

}  // namespace scopeworks::encoding

#endif  // SCOPEWORKS_ENCODING_HPP_
