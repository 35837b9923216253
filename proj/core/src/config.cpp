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

#include "radt/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "radt/error.hpp"

namespace radt {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string field_name(const IniDocument::Entry& e) {
  return e.section.empty() ? e.key : e.section + "." + e.key;
}

}  // namespace

IniDocument IniDocument::parse(std::string_view text) {
  IniDocument doc;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ParseError("empty section name", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected 'key = value'", line_no);
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError("missing key before '='", line_no);
    if (doc.find(section, key) != nullptr)
      throw ParseError("duplicate key '" + key + "'", line_no);
    doc.entries_.push_back({section, std::move(key), std::move(value), line_no});
  }
  return doc;
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const IniDocument::Entry* IniDocument::find(std::string_view section,
                                            std::string_view key) const {
  for (const auto& e : entries_)
    if (e.section == section && e.key == key) return &e;
  return nullptr;
}

bool IniDocument::has(std::string_view section, std::string_view key) const {
  return find(section, key) != nullptr;
}

std::string IniDocument::get_string(std::string_view section,
                                    std::string_view key,
                                    std::string fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double IniDocument::get_double(std::string_view section, std::string_view key,
                               double fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  double v = 0.0;
  const char* end = e->value.data() + e->value.size();
  auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ParseError(field_name(*e) + ": '" + e->value + "' is not a number",
                     e->line);
  return v;
}

std::int64_t IniDocument::get_int(std::string_view section, std::string_view key,
                                  std::int64_t fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::int64_t v = 0;
  const char* end = e->value.data() + e->value.size();
  auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ParseError(field_name(*e) + ": '" + e->value + "' is not an integer",
                     e->line);
  return v;
}

std::size_t IniDocument::get_size(std::string_view section, std::string_view key,
                                  std::size_t fallback) const {
  const std::int64_t v = get_int(section, key, static_cast<std::int64_t>(fallback));
  if (v < 0) {
    const Entry* e = find(section, key);
    throw ParseError(field_name(*e) + ": must be non-negative", e->line);
  }
  return static_cast<std::size_t>(v);
}

bool IniDocument::get_bool(std::string_view section, std::string_view key,
                           bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError(field_name(*e) + ": '" + e->value + "' is not a boolean",
                   e->line);
}

void IniDocument::expect_keys(std::string_view section,
                              const std::vector<std::string_view>& known) const {
  for (const auto& e : entries_) {
    if (e.section != section) continue;
    if (std::find(known.begin(), known.end(), e.key) == known.end())
      throw ParseError("unknown key '" + field_name(e) + "'", e.line);
  }
}

std::vector<std::string> IniDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (std::find(out.begin(), out.end(), e.section) == out.end())
      out.push_back(e.section);
  return out;
}

void IniDocument::set(std::string section, std::string key, std::string value) {
  for (auto& e : entries_)
    if (e.section == section && e.key == key) {
      e.value = std::move(value);
      return;
    }
  entries_.push_back({std::move(section), std::move(key), std::move(value), 0});
}

std::string IniDocument::to_text() const {
  std::string out;
  for (const auto& s : sections()) {
    if (!s.empty()) out += (out.empty() ? "[" : "\n[") + s + "]\n";
    for (const auto& e : entries_)
      if (e.section == s) out += e.key + " = " + e.value + "\n";
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace radt
