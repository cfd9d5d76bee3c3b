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

// Word -> subword alignment and the reverse mapping from per-token
// probabilities back to per-word labels.

#ifndef SCOPEWORKS_TOKENIZE_HPP_
#define SCOPEWORKS_TOKENIZE_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scopeworks/common.hpp"
#include "scopeworks/encoding.hpp"

namespace scopeworks::align {

using encoding::TaskInstance;

struct Piece {
  std::string text;
  int id = 0;

  bool operator==(const Piece&) const = default;
};

// Anything that maps a word to a non-empty sequence of (token, id) pieces,
// deterministically, with reserved symbols kept atomic.
template <class T>
concept WordTokenizer = requires(const T& t, std::string_view word) {
  { t.tokenize_word(word) } -> std::convertible_to<std::vector<Piece>>;
  { t.pad_id() } -> std::convertible_to<int>;
  { t.pad_token() } -> std::convertible_to<std::string>;
  { t.max_len() } -> std::convertible_to<std::size_t>;
};

struct VocabOptions {
  std::size_t min_count = 2;     // whole words seen at least this often
  std::size_t max_words = 30000;
};

// Lowercasing word-piece tokenizer: greedy longest match with a "##"
// continuation prefix. Words that cannot be covered become [UNK].
class WordPieceTokenizer {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::size_t kMaxWordChars = 100;

  WordPieceTokenizer() : WordPieceTokenizer(std::vector<std::string>{}) {}

  // Reserved symbols missing from `vocab` are prepended, in the order
  // [PAD], [UNK], <token[1]>, <token[2]>.
  explicit WordPieceTokenizer(std::vector<std::string> vocab,
                              std::size_t max_len = 128)
      : max_len_(max_len) {
    if (max_len_ == 0) throw Error(ErrorKind::kConfig, "max_len must be positive");
    std::vector<std::string> reserved = {
        std::string(kPad), std::string(kUnk),
        std::string(encoding::kNormalCueMarker),
        std::string(encoding::kMultiwordCueMarker)};
    for (const auto& r : reserved) {
      if (std::find(vocab.begin(), vocab.end(), r) == vocab.end()) {
        vocab_.push_back(r);
      }
    }
    vocab_.insert(vocab_.end(), vocab.begin(), vocab.end());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      if (!ids_.emplace(vocab_[i], static_cast<int>(i)).second) {
        throw Error(ErrorKind::kConfig, "duplicate vocabulary entry '" + vocab_[i] + "'");
      }
    }
    for (const auto& r : reserved) reserved_.emplace(r, ids_.at(r));
  }

  // Vocabulary from training words: every character (initial and "##"
  // continuation form) plus whole words meeting `min_count`.
  static WordPieceTokenizer build(const std::vector<std::vector<std::string>>& sentences,
                                  const VocabOptions& options = {},
                                  std::size_t max_len = 128) {
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> initial_chars, continuation_chars;
    for (const auto& words : sentences) {
      for (const auto& w : words) {
        if (encoding::is_marker(w) || w == kPad || w == kUnk) continue;
        std::string lw = ascii_lower(w);
        ++counts[lw];
      }
    }
    std::map<std::string, bool> chars;  // ordered for determinism
    for (const auto& [w, n] : counts) {
      auto cs = utf8_chars(w);
      for (std::size_t i = 0; i < cs.size(); ++i) {
        chars.emplace(cs[i], true);
        chars.emplace("##" + cs[i], true);
      }
    }
    std::vector<std::string> vocab;
    for (const auto& [c, unused] : chars) vocab.push_back(c);
    std::vector<std::pair<std::string, std::size_t>> frequent;
    for (const auto& [w, n] : counts) {
      if (n >= options.min_count && utf8_chars(w).size() > 1) frequent.emplace_back(w, n);
    }
    std::stable_sort(frequent.begin(), frequent.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (frequent.size() > options.max_words) frequent.resize(options.max_words);
    for (const auto& [w, n] : frequent) vocab.push_back(w);
    return WordPieceTokenizer(std::move(vocab), max_len);
  }

  std::vector<Piece> tokenize_word(std::string_view word) const {
    if (auto it = reserved_.find(std::string(word)); it != reserved_.end()) {
      return {{it->first, it->second}};
    }
    const std::string lower = ascii_lower(word);
    const auto chars = utf8_chars(lower);
    if (chars.empty() || chars.size() > kMaxWordChars) return {unk()};
    std::vector<Piece> pieces;
    std::size_t start = 0;
    while (start < chars.size()) {
      std::size_t end = chars.size();
      const Piece* found = nullptr;
      Piece candidate;
      while (start < end) {
        std::string sub = start > 0 ? "##" : "";
        for (std::size_t i = start; i < end; ++i) sub += chars[i];
        if (auto it = ids_.find(sub); it != ids_.end() && !reserved_.count(sub)) {
          candidate = {sub, it->second};
          found = &candidate;
          break;
        }
        --end;
      }
      if (!found) return {unk()};
      pieces.push_back(*found);
      start = end;
    }
    return pieces;
  }

  int pad_id() const { return reserved_.at(std::string(kPad)); }
  std::string pad_token() const { return std::string(kPad); }
  std::size_t max_len() const { return max_len_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }

  int id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) throw Error(ErrorKind::kLookup, "unknown token " + std::string(token));
    return it->second;
  }

  // One token per line, like BERT's vocab.txt.
  static WordPieceTokenizer from_vocab_text(std::string_view text, std::size_t max_len = 128) {
    std::vector<std::string> vocab;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = text.substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) vocab.emplace_back(line);
      pos = nl + 1;
    }
    return WordPieceTokenizer(std::move(vocab), max_len);
  }

  std::string to_vocab_text() const {
    std::string out;
    for (const auto& v : vocab_) out += v + "\n";
    return out;
  }

 private:
  Piece unk() const { return {std::string(kUnk), reserved_.at(std::string(kUnk))}; }

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  std::map<std::string, int> reserved_;
  std::size_t max_len_;
};

static_assert(WordTokenizer<WordPieceTokenizer>);

// ---------------------------------------------------------------------------
// Tokenized instances

struct WordSpan {
  int begin = 0;  // half-open token interval
  int end = 0;

  int width() const { return end - begin; }
  bool operator==(const WordSpan&) const = default;
};

struct TokenizedInstance {
  std::string instance_id;
  Task task = Task::kCue;
  std::vector<std::string> tokens;
  std::vector<int> token_ids;
  std::vector<int> token_labels;
  std::vector<bool> pad_mask;  // true on real tokens
  std::vector<WordSpan> word_spans;

  std::size_t max_len() const { return token_ids.size(); }
  std::size_t real_length() const {
    return word_spans.empty() ? 0 : static_cast<std::size_t>(word_spans.back().end);
  }

  bool operator==(const TokenizedInstance&) const = default;
};

// Checks the alignment invariants; throws kSchema.
inline void validate(const TokenizedInstance& t) {
  const auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::kSchema, "tokenized instance " + t.instance_id + ": " + what);
  };
  const std::size_t n = t.token_ids.size();
  if (t.tokens.size() != n || t.token_labels.size() != n || t.pad_mask.size() != n) {
    fail("token arrays differ in length");
  }
  int expected = 0;
  for (const auto& s : t.word_spans) {
    if (s.begin != expected || s.end <= s.begin) fail("word spans do not tile the prefix");
    expected = s.end;
  }
  if (static_cast<std::size_t>(expected) > n) fail("word spans exceed max_len");
  for (std::size_t i = 0; i < n; ++i) {
    bool real = i < static_cast<std::size_t>(expected);
    if (t.pad_mask[i] != real) fail("pad mask disagrees with word spans");
    if (!real && t.token_labels[i] != pad_label(t.task)) fail("pad position with non-pad label");
  }
  for (const auto& s : t.word_spans) {
    for (int i = s.begin + 1; i < s.end; ++i) {
      if (t.token_labels[i] != t.token_labels[s.begin]) fail("label varies within a word");
    }
  }
}

// Fails with kOverflow rather than truncating when the subword count exceeds
// max_len.
template <WordTokenizer Tok>
TokenizedInstance tokenize_instance(const TaskInstance& inst, const Tok& tok) {
  TokenizedInstance out;
  out.instance_id = inst.instance_id;
  out.task = inst.task;
  const std::size_t max_len = tok.max_len();
  for (std::size_t w = 0; w < inst.words.size(); ++w) {
    std::vector<Piece> pieces = tok.tokenize_word(inst.words[w]);
    if (pieces.empty()) {
      throw Error(ErrorKind::kInternal, "tokenizer returned no pieces for '" +
                                            inst.words[w] + "'");
    }
    WordSpan span{static_cast<int>(out.token_ids.size()), 0};
    for (auto& p : pieces) {
      out.tokens.push_back(std::move(p.text));
      out.token_ids.push_back(p.id);
      out.token_labels.push_back(inst.labels[w]);
      out.pad_mask.push_back(true);
    }
    span.end = static_cast<int>(out.token_ids.size());
    out.word_spans.push_back(span);
  }
  if (out.token_ids.size() > max_len) {
    throw Error(ErrorKind::kOverflow,
                "instance " + inst.instance_id + " needs " +
                    std::to_string(out.token_ids.size()) + " tokens, max_len is " +
                    std::to_string(max_len));
  }
  const int pad = pad_label(inst.task);
  while (out.token_ids.size() < max_len) {
    out.tokens.push_back(tok.pad_token());
    out.token_ids.push_back(tok.pad_id());
    out.token_labels.push_back(pad);
    out.pad_mask.push_back(false);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probability tables and word-level aggregation

class ProbTable {
 public:
  ProbTable() = default;
  ProbTable(std::size_t rows, std::size_t classes)
      : rows_(rows), classes_(classes), data_(rows * classes, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t classes() const { return classes_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * classes_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * classes_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * classes_, classes_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * classes_, classes_}; }

  // Every row must be a probability vector within `tolerance`.
  void validate(double tolerance = 1e-4) const {
    for (std::size_t r = 0; r < rows_; ++r) {
      double sum = 0.0;
      for (double p : row(r)) {
        if (!std::isfinite(p) || p < 0.0) {
          throw Error(ErrorKind::kSchema, "row " + std::to_string(r) +
                                              " holds a negative or non-finite entry");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > tolerance) {
        throw Error(ErrorKind::kSchema, "row " + std::to_string(r) + " sums to " +
                                            std::to_string(sum));
      }
    }
  }

  bool operator==(const ProbTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> data_;
};

enum class Aggregation { kAverage, kFirstToken };

inline std::string_view to_string(Aggregation a) {
  return a == Aggregation::kAverage ? "average" : "first_token";
}

inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "average") return Aggregation::kAverage;
  if (s == "first_token" || s == "first") return Aggregation::kFirstToken;
  throw Error(ErrorKind::kInput, "unknown aggregation '" + std::string(s) + "'");
}

// Ties go to the lowest class index.
inline int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

namespace detail {

inline void check_span(const WordSpan& s, const ProbTable& probs) {
  if (s.end <= s.begin) throw Error(ErrorKind::kInternal, "empty word span");
  if (s.begin < 0 || static_cast<std::size_t>(s.end) > probs.rows()) {
    throw Error(ErrorKind::kInternal, "word span outside the probability table");
  }
}

}  // namespace detail

// Mean of each word's token rows, then argmax. Returns class indices.
inline std::vector<int> aggregate_average(const ProbTable& probs,
                                          std::span<const WordSpan> spans) {
  std::vector<int> out;
  out.reserve(spans.size());
  std::vector<double> mean(probs.classes());
  for (const auto& s : spans) {
    detail::check_span(s, probs);
    std::fill(mean.begin(), mean.end(), 0.0);
    for (int r = s.begin; r < s.end; ++r) {
      auto row = probs.row(static_cast<std::size_t>(r));
      for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
    }
    for (double& m : mean) m /= static_cast<double>(s.width());
    out.push_back(argmax(mean));
  }
  return out;
}

// Argmax of each word's first token row. Returns class indices.
inline std::vector<int> aggregate_first(const ProbTable& probs,
                                        std::span<const WordSpan> spans) {
  std::vector<int> out;
  out.reserve(spans.size());
  for (const auto& s : spans) {
    detail::check_span(s, probs);
    out.push_back(argmax(probs.row(static_cast<std::size_t>(s.begin))));
  }
  return out;
}

inline std::vector<int> aggregate(const ProbTable& probs, std::span<const WordSpan> spans,
                                  Aggregation method) {
  return method == Aggregation::kAverage ? aggregate_average(probs, spans)
                                         : aggregate_first(probs, spans);
}

// Aggregated class indices mapped through `order` to task labels.
inline std::vector<int> word_labels(const ProbTable& probs, std::span<const WordSpan> spans,
                                    Aggregation method, const std::vector<int>& order) {
  if (probs.classes() != order.size()) {
    throw Error(ErrorKind::kInput, "probability table has " +
                                       std::to_string(probs.classes()) +
                                       " classes, class order " + order_string(order));
  }
  auto idx = aggregate(probs, spans, method);
  for (int& i : idx) i = order[static_cast<std::size_t>(i)];
  return idx;
}

// ---------------------------------------------------------------------------
// Tokenized-instance JSON Lines

inline Json to_json(const TokenizedInstance& t) {
  Json spans = Json::array();
  for (const auto& s : t.word_spans) spans.push_back({s.begin, s.end});
  return {{"instance_id", t.instance_id},
          {"task", to_string(t.task)},
          {"tokens", t.tokens},
          {"token_ids", t.token_ids},
          {"word_spans", spans},
          {"pad_mask", t.pad_mask},
          {"labels", t.token_labels},
          {"class_order", class_order(t.task)}};
}

inline TokenizedInstance tokenized_from_json(const Json& j) {
  TokenizedInstance t;
  t.instance_id = j.at("instance_id").get<std::string>();
  auto order = j.at("class_order").get<std::vector<int>>();
  if (j.contains("task")) {
    t.task = parse_task(j.at("task").get<std::string>());
  } else {
    t.task = order.size() == 2 ? Task::kScope : Task::kCue;
  }
  if (order != class_order(t.task)) {
    throw Error(ErrorKind::kSchema, "instance " + t.instance_id + ": class_order " +
                                        order_string(order) + " does not match " +
                                        order_string(class_order(t.task)));
  }
  t.tokens = j.at("tokens").get<std::vector<std::string>>();
  t.token_ids = j.at("token_ids").get<std::vector<int>>();
  t.pad_mask = j.at("pad_mask").get<std::vector<bool>>();
  t.token_labels = j.at("labels").get<std::vector<int>>();
  for (const auto& s : j.at("word_spans")) {
    t.word_spans.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
  }
  validate(t);
  return t;
}

inline std::string write_tokenized(const std::vector<TokenizedInstance>& items) {
  std::string out;
  for (const auto& t : items) out += to_json(t).dump() + "\n";
  return out;
}

inline std::vector<TokenizedInstance> read_tokenized(std::string_view bytes) {
  std::vector<TokenizedInstance> out;
  for (const auto& line : parse_jsonl(bytes)) {
    try {
      out.push_back(tokenized_from_json(line.value));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kSchema,
                  "line " + std::to_string(line.line_number) + ": " + e.what(),
                  static_cast<std::int64_t>(line.line_number));
    }
  }
  return out;
}

}  // namespace scopeworks::align

#endif  // SCOPEWORKS_TOKENIZE_HPP_
