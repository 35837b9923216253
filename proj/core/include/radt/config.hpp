// Copyright 2026 The radt-lab Authors.
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

// Flat INI documents: "[section]" headers, "key = value" lines, '#' or ';'
// comments. No nesting, no continuation lines.

#ifndef RADT_CONFIG_HPP_
#define RADT_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace radt {

class IniDocument {
 public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    std::size_t line = 0;
  };

  static IniDocument parse(std::string_view text);
  static IniDocument load(const std::string& path);

  bool has(std::string_view section, std::string_view key) const;
  const Entry* find(std::string_view section, std::string_view key) const;

  // Typed getters. A present but malformed value raises ParseError carrying
  // the line number and the "section.key" name.
  std::string get_string(std::string_view section, std::string_view key,
                         std::string fallback) const;
  double get_double(std::string_view section, std::string_view key,
                    double fallback) const;
  std::int64_t get_int(std::string_view section, std::string_view key,
                       std::int64_t fallback) const;
  std::size_t get_size(std::string_view section, std::string_view key,
                       std::size_t fallback) const;
  bool get_bool(std::string_view section, std::string_view key,
                bool fallback) const;

  // Rejects keys outside `known` for the given section.
  void expect_keys(std::string_view section,
                   const std::vector<std::string_view>& known) const;
  std::vector<std::string> sections() const;

  void set(std::string section, std::string key, std::string value);
  const std::vector<Entry>& entries() const { return entries_; }
  // Canonical text: sections in first-seen order, keys in insertion order.
  std::string to_text() const;

 private:
  std::vector<Entry> entries_;
};

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace radt

#endif  // RADT_CONFIG_HPP_
