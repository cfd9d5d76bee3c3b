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

// Shared error type, task tags and small I/O helpers used by every module.

#ifndef SCOPEWORKS_COMMON_HPP_
#define SCOPEWORKS_COMMON_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace scopeworks {

using Json = nlohmann::json;

inline constexpr std::string_view kVersion = "scopeworks 1.0.0";

enum class ErrorKind {
  kParse,       // malformed input bytes (XML, JSON)
  kStructure,   // well-formed input with dangling references
  kFormat,      // column-format layout violations
  kSchema,      // interchange file violates its schema
  kEncoding,    // annotation cannot be encoded as task labels
  kOverflow,    // instance longer than max_len
  kConfig,      // invalid configuration
  kInput,       // invalid argument values
  kLookup,      // missing key at inference time
  kInternal,    // broken internal contract
  kIo,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kStructure: return "structure";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kEncoding: return "encoding";
    case ErrorKind::kOverflow: return "overflow";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kLookup: return "lookup";
    case ErrorKind::kInternal: return "internal";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// All library failures are reported through this exception. `where()` holds
// the byte offset (XML), line number (column/JSONL files) or -1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::int64_t where = -1)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + message),
        kind_(kind),
        where_(where) {}

  ErrorKind kind() const { return kind_; }
  std::int64_t where() const { return where_; }

 private:
  ErrorKind kind_;
  std::int64_t where_;
};

enum class Task { kCue, kScope };

inline std::string_view to_string(Task task) {
  return task == Task::kCue ? "cue" : "scope";
}

inline Task parse_task(std::string_view s) {
  if (s == "cue") return Task::kCue;
  if (s == "scope") return Task::kScope;
  throw Error(ErrorKind::kInput, "unknown task '" + std::string(s) + "'");
}

// Label alphabets. Cue: 1 normal cue, 2 multiword cue, 3 not a cue, 4 pad.
// Scope: 0 out of scope, 1 in scope. Class index i holds class_order[i].
inline constexpr int kNormalCue = 1;
inline constexpr int kMultiwordCue = 2;
inline constexpr int kNotCue = 3;
inline constexpr int kCuePad = 4;
inline constexpr int kOutOfScope = 0;
inline constexpr int kInScope = 1;

inline std::vector<int> class_order(Task task) {
  if (task == Task::kCue) return {1, 2, 3, 4};
  return {0, 1};
}

inline int pad_label(Task task) {
  return task == Task::kCue ? kCuePad : kOutOfScope;
}

inline int class_index(const std::vector<int>& order, int label) {
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == label) return static_cast<int>(i);
  }
  throw Error(ErrorKind::kInput,
              "label " + std::to_string(label) + " not in class order");
}

inline std::string join(const std::vector<std::string>& parts,
                        std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::string order_string(const std::vector<int>& order) {
  std::string out = "[";
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(order[i]);
  }
  return out + "]";
}

// 64-bit FNV-1a; used for config hashes recorded in reports.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = kDigits[v & 0xf];
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temp file and renames it over the target, so readers
// never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Splits JSON Lines text, skipping blank lines. Line numbers are 1-based.
struct JsonLine {
  std::size_t line_number;
  Json value;
};

inline std::vector<JsonLine> parse_jsonl(std::string_view text) {
  std::vector<JsonLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    ++line_no;
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (nl == text.size()) break;
      continue;
    }
    try {
      out.push_back({line_no, Json::parse(line)});
    } catch (const Json::parse_error& e) {
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": " + e.what(),
                  static_cast<std::int64_t>(line_no));
    }
    if (nl == text.size()) break;
  }
  return out;
}

// Number of bytes in the UTF-8 sequence starting with `lead`.
inline std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

inline std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t n = std::min(utf8_length(static_cast<unsigned char>(s[i])),
                             s.size() - i);
    out.emplace_back(s.substr(i, n));
    i += n;
  }
  return out;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace scopeworks

#endif  // SCOPEWORKS_COMMON_HPP_
