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

// A small pull-style XML reader. It understands elements, attributes,
// character/entity references, comments, CDATA, processing instructions and
// DOCTYPE declarations, which is everything the annotated corpora use.
// Mixed content is reported in document order, which tree-building parsers
// tend to lose.

#ifndef SCOPEWORKS_XML_HPP_
#define SCOPEWORKS_XML_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scopeworks/common.hpp"

namespace scopeworks::xml {

struct Event {
  enum class Type { kStart, kEnd, kText };
  Type type = Type::kText;
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string text;
  std::size_t offset = 0;

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : in_(bytes) {}

  // Produces the next event; returns false at a well-formed end of input.
  bool next(Event& ev) {
    if (pending_end_) {
      pending_end_ = false;
      ev = Event{Event::Type::kEnd, open_.back(), {}, {}, pending_offset_};
      open_.pop_back();
      return true;
    }
    while (pos_ < in_.size()) {
      if (in_[pos_] != '<') {
        std::size_t start = pos_;
        std::size_t lt = in_.find('<', pos_);
        if (lt == std::string_view::npos) lt = in_.size();
        std::string text = decode(in_.substr(pos_, lt - pos_), start);
        pos_ = lt;
        if (open_.empty()) {
          if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
            fail("text outside the root element", start);
          }
          continue;
        }
        ev = Event{Event::Type::kText, {}, {}, std::move(text), start};
        return true;
      }
      std::size_t start = pos_;
      if (starts_with("<!--")) {
        skip_past("-->", start, "unterminated comment");
      } else if (starts_with("<![CDATA[")) {
        std::size_t end = in_.find("]]>", pos_ + 9);
        if (end == std::string_view::npos) fail("unterminated CDATA", start);
        if (open_.empty()) fail("CDATA outside the root element", start);
        std::string text(in_.substr(pos_ + 9, end - pos_ - 9));
        pos_ = end + 3;
        ev = Event{Event::Type::kText, {}, {}, std::move(text), start};
        return true;
      } else if (starts_with("<?")) {
        skip_past("?>", start, "unterminated processing instruction");
      } else if (starts_with("<!")) {
        skip_declaration(start);
      } else if (starts_with("</")) {
        pos_ += 2;
        std::string name = read_name();
        skip_space();
        expect('>');
        if (open_.empty() || open_.back() != name) {
          fail("unexpected closing tag </" + name + ">", start);
        }
        open_.pop_back();
        ev = Event{Event::Type::kEnd, std::move(name), {}, {}, start};
        return true;
      } else {
        ++pos_;
        ev = Event{Event::Type::kStart, read_name(), {}, {}, start};
        for (;;) {
          skip_space();
          if (pos_ >= in_.size()) fail("unterminated start tag", start);
          if (in_[pos_] == '>') {
            ++pos_;
            break;
          }
          if (starts_with("/>")) {
            pos_ += 2;
            pending_end_ = true;
            pending_offset_ = start;
            break;
          }
          std::size_t attr_at = pos_;
          std::string key = read_name();
          skip_space();
          expect('=');
          skip_space();
          if (pos_ >= in_.size() || (in_[pos_] != '"' && in_[pos_] != '\'')) {
            fail("attribute value must be quoted", pos_);
          }
          char quote = in_[pos_++];
          std::size_t end = in_.find(quote, pos_);
          if (end == std::string_view::npos) {
            fail("unterminated attribute value", attr_at);
          }
          std::string value = decode(in_.substr(pos_, end - pos_), pos_);
          pos_ = end + 1;
          if (ev.attribute(key)) fail("duplicate attribute " + key, attr_at);
          ev.attributes.emplace_back(std::move(key), std::move(value));
        }
        if (open_.empty() && seen_root_) {
          fail("more than one root element", start);
        }
        seen_root_ = true;
        open_.push_back(ev.name);
        return true;
      }
    }
    if (!open_.empty()) {
      fail("unclosed element <" + open_.back() + ">", in_.size());
    }
    if (!seen_root_) fail("no root element", 0);
    return false;
  }

 private:
  [[noreturn]] static void fail(const std::string& what, std::size_t at) {
    throw Error(ErrorKind::kParse,
                "malformed XML at byte " + std::to_string(at) + ": " + what,
                static_cast<std::int64_t>(at));
  }

  bool starts_with(std::string_view s) const {
    return in_.substr(pos_, s.size()) == s;
  }

  void skip_past(std::string_view terminator, std::size_t start,
                 const char* what) {
    std::size_t end = in_.find(terminator, pos_);
    if (end == std::string_view::npos) fail(what, start);
    pos_ = end + terminator.size();
  }

  // <!DOCTYPE ...> may carry an internal subset in brackets.
  void skip_declaration(std::size_t start) {
    int depth = 0;
    for (pos_ += 2; pos_ < in_.size(); ++pos_) {
      char c = in_[pos_];
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == '>' && depth <= 0) {
        ++pos_;
        return;
      }
    }
    fail("unterminated declaration", start);
  }

  void skip_space() {
    while (pos_ < in_.size() && is_space(in_[pos_])) ++pos_;
  }

  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  }

  static bool is_name_char(char c) {
    return !is_space(c) && c != '>' && c != '/' && c != '=' && c != '<' &&
           c != '"' && c != '\'';
  }

  std::string read_name() {
    std::size_t start = pos_;
    while (pos_ < in_.size() && is_name_char(in_[pos_])) ++pos_;
    if (pos_ == start) fail("expected a name", start);
    return std::string(in_.substr(start, pos_ - start));
  }

  void expect(char c) {
    if (pos_ >= in_.size() || in_[pos_] != c) {
      fail(std::string("expected '") + c + "'", pos_);
    }
    ++pos_;
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xc0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xe0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
      out += static_cast<char>(0xf0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    }
  }

  static std::string decode(std::string_view raw, std::size_t base) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out += raw[i];
        continue;
      }
      std::size_t semi = raw.find(';', i);
      if (semi == std::string_view::npos || semi - i > 12) {
        fail("bad entity reference", base + i);
      }
      std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "lt") out += '<';
      else if (ent == "gt") out += '>';
      else if (ent == "amp") out += '&';
      else if (ent == "quot") out += '"';
      else if (ent == "apos") out += '\'';
      else if (ent.size() > 1 && ent[0] == '#') {
        std::uint32_t cp = 0;
        bool hex = ent[1] == 'x' || ent[1] == 'X';
        std::string_view digits = ent.substr(hex ? 2 : 1);
        if (digits.empty()) fail("bad character reference", base + i);
        for (char d : digits) {
          int v;
          if (d >= '0' && d <= '9') v = d - '0';
          else if (hex && d >= 'a' && d <= 'f') v = d - 'a' + 10;
          else if (hex && d >= 'A' && d <= 'F') v = d - 'A' + 10;
          else fail("bad character reference", base + i);
          cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
          if (cp > 0x10ffff) fail("character reference out of range", base + i);
        }
        append_utf8(out, cp);
      } else {
        fail("unknown entity &" + std::string(ent) + ";", base + i);
      }
      i = semi;
    }
    return out;
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  std::vector<std::string> open_;
  bool seen_root_ = false;
  bool pending_end_ = false;
  std::size_t pending_offset_ = 0;
};

}  // namespace scopeworks::xml

#endif  // SCOPEWORKS_XML_HPP_
