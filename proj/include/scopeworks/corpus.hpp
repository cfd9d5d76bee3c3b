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

// Corpus ingestion: inline-XML corpora (BioScope, SFU Review), column-format
// negation data, and the canonical JSON Lines interchange format.

#ifndef SCOPEWORKS_CORPUS_HPP_
#define SCOPEWORKS_CORPUS_HPP_

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "scopeworks/common.hpp"
#include "scopeworks/xml.hpp"

namespace scopeworks::corpus {

enum class CueKind { kSpeculation, kNegation };

inline std::string_view to_string(CueKind kind) {
  return kind == CueKind::kSpeculation ? "speculation" : "negation";
}

inline CueKind parse_cue_kind(std::string_view s) {
  if (s == "speculation") return CueKind::kSpeculation;
  if (s == "negation") return CueKind::kNegation;
  throw Error(ErrorKind::kInput, "unknown cue kind '" + std::string(s) + "'");
}

struct CueAnnotation {
  std::string id;
  CueKind kind = CueKind::kSpeculation;
  std::vector<int> word_indices;  // sorted, unique; size > 1 is a multiword cue

  bool multiword() const { return word_indices.size() > 1; }
  bool operator==(const CueAnnotation&) const = default;
};

struct ScopeAnnotation {
  std::string cue_id;
  std::vector<int> word_indices;  // sorted, unique, possibly discontinuous

  bool operator==(const ScopeAnnotation&) const = default;
};

struct AnnotatedSentence {
  std::string sentence_id;
  std::vector<std::string> words;
  std::vector<CueAnnotation> cues;
  std::vector<ScopeAnnotation> scopes;

  const ScopeAnnotation* scope_for(std::string_view cue_id) const {
    for (const auto& s : scopes) {
      if (s.cue_id == cue_id) return &s;
    }
    return nullptr;
  }

  bool operator==(const AnnotatedSentence&) const = default;
};

struct Corpus {
  std::string name = "custom";  // BF, BA, SFU, Sherlock or any custom tag
  CueKind cue_kind = CueKind::kSpeculation;
  std::vector<AnnotatedSentence> sentences;
  // Parser remarks (e.g. affixal cues widened to whole words). Not
  // serialized and not part of equality.
  std::vector<std::string> notes;

  bool operator==(const Corpus& o) const {
    return name == o.name && cue_kind == o.cue_kind && sentences == o.sentences;
  }
};

// Throws kStructure naming the offending sentence when an invariant fails.
inline void validate(const AnnotatedSentence& s) {
  const auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::kStructure, "sentence " + s.sentence_id + ": " + what);
  };
  const int n = static_cast<int>(s.words.size());
  std::set<std::string> cue_ids;
  for (const auto& cue : s.cues) {
    if (!cue_ids.insert(cue.id).second) fail("duplicate cue id " + cue.id);
    if (cue.word_indices.empty()) fail("cue " + cue.id + " has no words");
    for (std::size_t i = 0; i < cue.word_indices.size(); ++i) {
      int w = cue.word_indices[i];
      if (w < 0 || w >= n) fail("cue " + cue.id + " index out of range");
      if (i && w <= cue.word_indices[i - 1]) {
        fail("cue " + cue.id + " indices not strictly increasing");
      }
    }
  }
  std::set<std::string> scoped;
  for (const auto& scope : s.scopes) {
    if (!cue_ids.count(scope.cue_id)) {
      fail("scope references unknown cue " + scope.cue_id);
    }
    if (!scoped.insert(scope.cue_id).second) {
      fail("cue " + scope.cue_id + " has more than one scope");
    }
    for (std::size_t i = 0; i < scope.word_indices.size(); ++i) {
      int w = scope.word_indices[i];
      if (w < 0 || w >= n) fail("scope of " + scope.cue_id + " index out of range");
      if (i && w <= scope.word_indices[i - 1]) {
        fail("scope of " + scope.cue_id + " indices not sorted and unique");
      }
    }
  }
}

inline void validate(const Corpus& c) {
  std::set<std::string> ids;
  for (const auto& s : c.sentences) {
    if (!ids.insert(s.sentence_id).second) {
      throw Error(ErrorKind::kStructure,
                  "duplicate sentence id " + s.sentence_id + " in corpus " + c.name);
    }
    validate(s);
  }
}

// ---------------------------------------------------------------------------
// Word segmentation

struct SegmentedWord {
  std::string text;
  std::size_t begin = 0;  // byte offsets into the sentence text
  std::size_t end = 0;
};

inline bool is_ascii_punct(char c) {
  return static_cast<unsigned char>(c) < 0x80 &&
         std::ispunct(static_cast<unsigned char>(c));
}

// Whitespace split, with leading and trailing ASCII punctuation of every
// chunk isolated as single-character words. Interior punctuation stays
// ("IL-2", "0.5", "don't").
inline std::vector<SegmentedWord> segment_words(std::string_view text) {
  std::vector<SegmentedWord> out;
  std::size_t i = 0;
  const auto space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t b = i;
    while (i < text.size() && !space(text[i])) ++i;
    std::size_t e = i;
    std::vector<SegmentedWord> trailing;
    while (b < e && is_ascii_punct(text[b])) {
      out.push_back({std::string(1, text[b]), b, b + 1});
      ++b;
    }
    while (e > b && is_ascii_punct(text[e - 1])) {
      trailing.push_back({std::string(1, text[e - 1]), e - 1, e});
      --e;
    }
    if (b < e) out.push_back({std::string(text.substr(b, e - b)), b, e});
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inline XML corpora

// Tag and attribute names for one XML corpus release. Cues link to scopes
// either through an attribute on the cue (`cue_ref_attr`, BioScope) or
// through reference elements nested in the scope (`scope_ref_tag`, SFU).
struct XmlDialect {
  std::string sentence_tag;
  std::string sentence_id_attr;
  std::vector<std::string> word_tags;  // empty: segment the sentence text
  std::string cue_tag;
  std::string cue_id_attr;
  std::string cue_type_attr;
  std::string cue_ref_attr;
  std::string scope_tag;
  std::string scope_id_attr;
  std::string scope_ref_tag;
  std::string scope_ref_attr;

  // <sentence id="S1.1">It <xcope id="X1.1.1"><cue type="speculation"
  // ref="X1.1.1">might</cue> rain tomorrow</xcope>.</sentence>
  static XmlDialect bioscope() {
    return {"sentence", "id", {}, "cue", "", "type", "ref",
            "xcope", "id", "", ""};
  }

  // <SENTENCE><W>It</W><cue ID="1" type="speculation"><W>might</W></cue>
  // <xcope><ref ID="1" SRC="might"/><W>rain</W></xcope></SENTENCE>
  static XmlDialect sfu() {
    return {"SENTENCE", "ID", {"W", "C"}, "cue", "ID", "type", "",
            "xcope", "", "ref", "ID"};
  }
};

enum class XmlFormat { kBioscope, kSfu };

namespace detail {

struct Span {
  std::string id;    // cue: id or ref; scope: id
  std::string type;  // cue type
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::string> refs;  // cue ids referenced from inside a scope
};

struct SentenceBuilder {
  std::string id;
  std::string text;
  std::vector<std::string> words;
  std::vector<Span> cues;
  std::vector<Span> scopes;
};

inline std::vector<int> covered_words(const std::vector<SegmentedWord>& words,
                                      std::size_t begin, std::size_t end) {
  std::vector<int> out;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (words[w].begin < end && begin < words[w].end) {
      out.push_back(static_cast<int>(w));
    }
  }
  return out;
}

inline std::vector<int> range_words(std::size_t begin, std::size_t end) {
  std::vector<int> out;
  for (std::size_t w = begin; w < end; ++w) out.push_back(static_cast<int>(w));
  return out;
}

inline std::vector<int> merge_sorted(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

inline AnnotatedSentence finish_sentence(SentenceBuilder& sb,
                                         const XmlDialect& dialect,
                                         CueKind wanted) {
  AnnotatedSentence out;
  out.sentence_id = sb.id;
  const bool text_mode = dialect.word_tags.empty();
  std::vector<SegmentedWord> segmented;
  if (text_mode) {
    segmented = segment_words(sb.text);
    for (const auto& w : segmented) out.words.push_back(w.text);
  } else {
    out.words = sb.words;
  }
  const auto words_of = [&](const Span& s) {
    return text_mode ? covered_words(segmented, s.begin, s.end)
                     : range_words(s.begin, s.end);
  };

  // Cue elements sharing an id/ref form one (possibly discontinuous) cue.
  struct Group {
    std::string id;
    std::string type;
    std::vector<int> words;
  };
  std::vector<Group> groups;
  int anonymous = 0;
  for (const auto& span : sb.cues) {
    std::string id = span.id.empty() ? "c" + std::to_string(++anonymous) : span.id;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.id == id; });
    if (it == groups.end()) {
      groups.push_back({id, span.type, {}});
      it = std::prev(groups.end());
    } else if (it->type != span.type) {
      throw Error(ErrorKind::kStructure, "sentence " + sb.id + ": cue " + id +
                                             " mixes types " + it->type +
                                             " and " + span.type);
    }
    it->words = merge_sorted(it->words, words_of(span));
  }

  std::map<std::string, std::vector<int>> scope_words;  // keyed by cue id
  if (!dialect.cue_ref_attr.empty()) {
    std::map<std::string, const Span*> by_id;
    for (const auto& s : sb.scopes) by_id[s.id] = &s;
    for (const auto& span : sb.cues) {
      if (span.id.empty()) continue;
      auto it = by_id.find(span.id);
      if (it == by_id.end()) {
        throw Error(ErrorKind::kStructure, "sentence " + sb.id + ": cue " +
                                               span.id +
                                               " references a missing scope");
      }
      scope_words[span.id] = words_of(*it->second);
    }
  } else {
    for (const auto& s : sb.scopes) {
      for (const auto& ref : s.refs) {
        bool known = std::any_of(groups.begin(), groups.end(),
                                 [&](const Group& g) { return g.id == ref; });
        if (!known) {
          throw Error(ErrorKind::kStructure, "sentence " + sb.id +
                                                 ": scope references missing cue " +
                                                 ref);
        }
        scope_words[ref] = merge_sorted(scope_words[ref], words_of(s));
      }
    }
  }

  for (const auto& g : groups) {
    CueKind kind;
    if (g.type == "speculation") {
      kind = CueKind::kSpeculation;
    } else if (g.type == "negation") {
      kind = CueKind::kNegation;
    } else {
      throw Error(ErrorKind::kStructure, "sentence " + sb.id + ": cue " + g.id +
                                             " has unknown type '" + g.type + "'");
    }
    if (kind != wanted) continue;
    if (g.words.empty()) {
      throw Error(ErrorKind::kStructure,
                  "sentence " + sb.id + ": cue " + g.id + " covers no words");
    }
    out.cues.push_back({g.id, kind, g.words});
    if (auto it = scope_words.find(g.id); it != scope_words.end()) {
      out.scopes.push_back({g.id, it->second});
    }
  }
  return out;
}

}  // namespace detail

inline Corpus parse_inline_xml(std::string_view bytes, const XmlDialect& dialect,
                               CueKind cue_kind, std::string name = "custom") {
  Corpus corpus;
  corpus.name = std::move(name);
  corpus.cue_kind = cue_kind;

  enum class FrameType { kOther, kCue, kScope, kWord };
  struct Frame {
    FrameType type;
    std::size_t span = 0;  // index into open_spans for cue/scope frames
  };
  std::optional<detail::SentenceBuilder> current;
  std::vector<Frame> frames;
  std::vector<detail::Span> open_spans;
  std::string word_text;
  std::size_t word_start = 0;
  bool in_word = false;
  std::set<std::string> seen_ids;
  int sentence_counter = 0;
  const bool text_mode = dialect.word_tags.empty();

  const auto position = [&]() -> std::size_t {
    return text_mode ? current->text.size() : current->words.size();
  };
  const auto is_word_tag = [&](const std::string& tag) {
    return std::find(dialect.word_tags.begin(), dialect.word_tags.end(), tag) !=
           dialect.word_tags.end();
  };
  const auto attr = [](const xml::Event& ev, const std::string& key) {
    if (key.empty()) return std::string();
    const std::string* v = ev.attribute(key);
    return v ? *v : std::string();
  };

  xml::Reader reader(bytes);
  xml::Event ev;
  while (reader.next(ev)) {
    if (!current) {
      if (ev.type == xml::Event::Type::kStart && ev.name == dialect.sentence_tag) {
        current.emplace();
        ++sentence_counter;
        current->id = attr(ev, dialect.sentence_id_attr);
        if (current->id.empty()) current->id = "s" + std::to_string(sentence_counter);
        frames.clear();
        open_spans.clear();
        in_word = false;
      }
      continue;
    }
    switch (ev.type) {
      case xml::Event::Type::kText:
        if (text_mode) {
          current->text += ev.text;
        } else if (in_word) {
          word_text += ev.text;
        }
        break;
      case xml::Event::Type::kStart:
        if (ev.name == dialect.cue_tag) {
          std::string id = attr(ev, dialect.cue_ref_attr.empty()
                                        ? dialect.cue_id_attr
                                        : dialect.cue_ref_attr);
          frames.push_back({FrameType::kCue, open_spans.size()});
          open_spans.push_back({id, attr(ev, dialect.cue_type_attr), position(), 0, {}});
        } else if (ev.name == dialect.scope_tag) {
          frames.push_back({FrameType::kScope, open_spans.size()});
          open_spans.push_back({attr(ev, dialect.scope_id_attr), "", position(), 0, {}});
        } else if (!text_mode && is_word_tag(ev.name)) {
          frames.push_back({FrameType::kWord});
          word_text.clear();
          word_start = ev.offset;
          in_word = true;
        } else {
          if (!dialect.scope_ref_tag.empty() && ev.name == dialect.scope_ref_tag) {
            auto scope = std::find_if(frames.rbegin(), frames.rend(), [](const Frame& f) {
              return f.type == FrameType::kScope;
            });
            if (scope != frames.rend()) {
              std::string ref = attr(ev, dialect.scope_ref_attr);
              if (ref.empty()) {
                throw Error(ErrorKind::kStructure,
                            "sentence " + current->id + ": scope reference without " +
                                dialect.scope_ref_attr,
                            static_cast<std::int64_t>(ev.offset));
              }
              open_spans[scope->span].refs.push_back(std::move(ref));
            }
          }
          frames.push_back({FrameType::kOther});
        }
        break;
      case xml::Event::Type::kEnd: {
        if (frames.empty()) {
          // End of the sentence element itself.
          AnnotatedSentence s = detail::finish_sentence(*current, dialect, cue_kind);
          if (!seen_ids.insert(s.sentence_id).second) {
            throw Error(ErrorKind::kStructure,
                        "duplicate sentence id " + s.sentence_id,
                        static_cast<std::int64_t>(ev.offset));
          }
          corpus.sentences.push_back(std::move(s));
          current.reset();
          break;
        }
        Frame f = frames.back();
        frames.pop_back();
        if (f.type == FrameType::kCue || f.type == FrameType::kScope) {
          detail::Span span = std::move(open_spans[f.span]);
          span.end = position();
          (f.type == FrameType::kCue ? current->cues : current->scopes)
              .push_back(std::move(span));
        } else if (f.type == FrameType::kWord) {
          in_word = false;
          // A word element holds one unit; internal whitespace is dropped.
          std::string word;
          for (const auto& piece : segment_words(word_text)) word += piece.text;
          if (word.empty()) {
            throw Error(ErrorKind::kStructure,
                        "sentence " + current->id + ": empty word element",
                        static_cast<std::int64_t>(word_start));
          }
          current->words.push_back(std::move(word));
        }
        break;
      }
    }
  }
  return corpus;
}

inline Corpus parse_inline_xml(std::string_view bytes, XmlFormat format,
                               CueKind cue_kind, std::string name = "custom") {
  return parse_inline_xml(bytes,
                          format == XmlFormat::kBioscope ? XmlDialect::bioscope()
                                                         : XmlDialect::sfu(),
                          cue_kind, std::move(name));
}

// ---------------------------------------------------------------------------
// Column format

// Column positions for token-per-line negation data. Each cue occupies one
// group of `group_width` columns starting at `first_group_column`.
struct ColumnLayout {
  int token_column = 0;
  int first_group_column = 1;
  int group_width = 2;
  int cue_offset = 0;
  int scope_offset = 1;
  std::string empty_cell = "_";
  std::string no_cue_cell = "***";

  // token, then (cue, scope) pairs.
  static ColumnLayout simple() { return {}; }

  // chapter, sentence, token#, word, lemma, POS, tree, then
  // (cue, scope, event) triples or "***".
  static ColumnLayout starsem() { return {3, 7, 3, 0, 1, "_", "***"}; }
};

inline Corpus parse_column_format(std::string_view bytes, CueKind cue_kind,
                                  const ColumnLayout& layout = ColumnLayout::simple(),
                                  std::string name = "custom") {
  Corpus corpus;
  corpus.name = std::move(name);
  corpus.cue_kind = cue_kind;

  struct Row {
    std::vector<std::string> cells;
    std::size_t line;
  };
  std::vector<Row> rows;

  const auto split = [](std::string_view line) {
    std::vector<std::string> cells;
    if (line.find('\t') != std::string_view::npos) {
      std::size_t pos = 0;
      for (;;) {
        auto tab = line.find('\t', pos);
        cells.emplace_back(line.substr(pos, tab == std::string_view::npos
                                                ? std::string_view::npos
                                                : tab - pos));
        if (tab == std::string_view::npos) break;
        pos = tab + 1;
      }
    } else {
      std::size_t pos = 0;
      while (pos < line.size()) {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        if (pos >= line.size()) break;
        auto end = line.find(' ', pos);
        if (end == std::string_view::npos) end = line.size();
        cells.emplace_back(line.substr(pos, end - pos));
        pos = end;
      }
    }
    return cells;
  };

  const auto flush = [&]() {
    if (rows.empty()) return;
    const std::size_t width = rows.front().cells.size();
    for (const auto& r : rows) {
      if (r.cells.size() != width) {
        throw Error(ErrorKind::kFormat,
                    "line " + std::to_string(r.line) + ": expected " +
                        std::to_string(width) + " columns, found " +
                        std::to_string(r.cells.size()),
                    static_cast<std::int64_t>(r.line));
      }
    }
    const std::size_t first = static_cast<std::size_t>(layout.first_group_column);
    if (width <= static_cast<std::size_t>(layout.token_column) || width < first) {
      throw Error(ErrorKind::kFormat,
                  "line " + std::to_string(rows.front().line) + ": too few columns",
                  static_cast<std::int64_t>(rows.front().line));
    }
    std::size_t groups = 0;
    const bool no_cues = width == first + 1 &&
                         rows.front().cells[first] == layout.no_cue_cell;
    if (!no_cues) {
      if ((width - first) % static_cast<std::size_t>(layout.group_width) != 0) {
        throw Error(ErrorKind::kFormat,
                    "line " + std::to_string(rows.front().line) +
                        ": cue columns do not form complete groups",
                    static_cast<std::int64_t>(rows.front().line));
      }
      groups = (width - first) / static_cast<std::size_t>(layout.group_width);
    }

    AnnotatedSentence s;
    s.sentence_id = "s" + std::to_string(corpus.sentences.size() + 1);
    for (const auto& r : rows) s.words.push_back(r.cells[layout.token_column]);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t base = first + g * static_cast<std::size_t>(layout.group_width);
      CueAnnotation cue{"c" + std::to_string(g + 1), cue_kind, {}};
      ScopeAnnotation scope{cue.id, {}};
      for (std::size_t w = 0; w < rows.size(); ++w) {
        const auto& cells = rows[w].cells;
        const std::string& cue_cell = cells[base + layout.cue_offset];
        const std::string& scope_cell = cells[base + layout.scope_offset];
        if (cue_cell != layout.empty_cell) {
          cue.word_indices.push_back(static_cast<int>(w));
          const std::string& token = s.words[w];
          if (cue_cell != token && token.find(cue_cell) != std::string::npos) {
            corpus.notes.push_back("sentence " + s.sentence_id + ": cue " + cue.id +
                                   " is affixal ('" + cue_cell + "' in '" + token +
                                   "'), recorded as the full word");
          }
        }
        if (scope_cell != layout.empty_cell) {
          scope.word_indices.push_back(static_cast<int>(w));
        }
      }
      if (cue.word_indices.empty()) continue;
      s.cues.push_back(std::move(cue));
      s.scopes.push_back(std::move(scope));
    }
    corpus.sentences.push_back(std::move(s));
    rows.clear();
  };

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string_view line = bytes.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    pos = nl + 1;
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      flush();
      continue;
    }
    rows.push_back({split(line), line_no});
  }
  flush();
  return corpus;
}

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
  std::size_t sentence_count = 0;
  std::size_t cue_count = 0;
  std::size_t multiword_cue_count = 0;
  std::size_t scope_count = 0;
  std::map<std::size_t, std::size_t> cues_per_sentence;  // cues -> sentences

  bool operator==(const CorpusStats&) const = default;
};

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.sentence_count = corpus.sentences.size();
  for (const auto& s : corpus.sentences) {
    st.cue_count += s.cues.size();
    st.scope_count += s.scopes.size();
    for (const auto& c : s.cues) st.multiword_cue_count += c.multiword() ? 1 : 0;
    ++st.cues_per_sentence[s.cues.size()];
  }
  return st;
}

inline Json to_json(const CorpusStats& st) {
  Json hist = Json::object();
  for (const auto& [k, v] : st.cues_per_sentence) hist[std::to_string(k)] = v;
  return {{"sentence_count", st.sentence_count},
          {"cue_count", st.cue_count},
          {"multiword_cue_count", st.multiword_cue_count},
          {"scope_count", st.scope_count},
          {"cues_per_sentence", hist}};
}

// ---------------------------------------------------------------------------
// Canonical JSON Lines format

inline constexpr std::string_view kCorpusSchema = "scopeworks-corpus";
inline constexpr int kCorpusVersion = 1;

inline Json to_json(const AnnotatedSentence& s) {
  Json cues = Json::array();
  for (const auto& c : s.cues) {
    cues.push_back({{"id", c.id}, {"kind", to_string(c.kind)},
                    {"word_indices", c.word_indices}});
  }
  Json scopes = Json::array();
  for (const auto& sc : s.scopes) {
    scopes.push_back({{"cue_id", sc.cue_id}, {"word_indices", sc.word_indices}});
  }
  return {{"sentence_id", s.sentence_id}, {"words", s.words},
          {"cues", cues}, {"scopes", scopes}};
}

inline std::string write_canonical(const Corpus& corpus) {
  validate(corpus);
  std::string out = Json{{"schema", kCorpusSchema},
                         {"version", kCorpusVersion},
                         {"name", corpus.name},
                         {"cue_kind", to_string(corpus.cue_kind)}}
                        .dump() +
                    "\n";
  for (const auto& s : corpus.sentences) out += to_json(s).dump() + "\n";
  return out;
}

inline AnnotatedSentence sentence_from_json(const Json& j) {
  AnnotatedSentence s;
  s.sentence_id = j.at("sentence_id").get<std::string>();
  s.words = j.at("words").get<std::vector<std::string>>();
  for (const auto& c : j.at("cues")) {
    s.cues.push_back({c.at("id").get<std::string>(),
                      parse_cue_kind(c.at("kind").get<std::string>()),
                      c.at("word_indices").get<std::vector<int>>()});
  }
  for (const auto& sc : j.at("scopes")) {
    s.scopes.push_back({sc.at("cue_id").get<std::string>(),
                        sc.at("word_indices").get<std::vector<int>>()});
  }
  return s;
}

inline Corpus read_canonical(std::string_view bytes) {
  auto lines = parse_jsonl(bytes);
  if (lines.empty()) throw Error(ErrorKind::kSchema, "missing corpus header line");
  const Json& header = lines.front().value;
  if (!header.is_object() || header.value("schema", "") != kCorpusSchema) {
    throw Error(ErrorKind::kSchema, "not a scopeworks corpus file", 1);
  }
  int version = header.value("version", -1);
  if (version != kCorpusVersion) {
    throw Error(ErrorKind::kSchema,
                "corpus schema version " + std::to_string(version) +
                    " unsupported (expected " + std::to_string(kCorpusVersion) + ")",
                1);
  }
  Corpus corpus;
  corpus.name = header.value("name", "custom");
  corpus.cue_kind = parse_cue_kind(header.value("cue_kind", "speculation"));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    try {
      corpus.sentences.push_back(sentence_from_json(lines[i].value));
      validate(corpus.sentences.back());
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kSchema,
                  "line " + std::to_string(lines[i].line_number) + ": " + e.what(),
                  static_cast<std::int64_t>(lines[i].line_number));
    } catch (const Error& e) {
      throw Error(e.kind(),
                  "line " + std::to_string(lines[i].line_number) + ": " + e.what(),
                  static_cast<std::int64_t>(lines[i].line_number));
    }
  }
  validate(corpus);
  return corpus;
}

}  // namespace scopeworks::corpus

#endif  // SCOPEWORKS_CORPUS_HPP_
