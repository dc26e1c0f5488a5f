/*
 * Copyright 2026 The factforge Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "factforge/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace factforge {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

constexpr std::array<std::string_view, 64> kStopwords = {
    "a",     "an",   "the",   "i",    "me",   "my",    "you",   "your",
    "he",    "she",  "it",    "we",   "they", "them",  "is",    "am",
    "are",   "was",  "were",  "be",   "been", "to",    "of",    "in",
    "on",    "at",   "for",   "and",  "or",   "but",   "with",  "that",
    "this",  "do",   "does",  "did",  "have", "has",   "had",   "so",
    "what",  "how",  "about", "too",  "just", "very",  "really", "not",
    "no",    "yes",  "oh",    "well", "up",   "as",    "by",    "from",
    "his",   "her",  "its",   "our",  "their", "i'm",  "it's",  "personx",
};

bool is_stopword(std::string_view token) {
  return std::find(kStopwords.begin(), kStopwords.end(), token) !=
         kStopwords.end();
}

}  // namespace

std::string trim(std::string_view s) {
  size_t begin = 0;
  size_t end = s.size();
  while (begin < end && is_space(s[begin])) ++begin;
  while (end > begin && is_space(s[end - 1])) --end;
  return std::string(s.substr(begin, end - begin));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string normalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    while (!current.empty() && current.back() == '\'') current.pop_back();
    if (!current.empty()) tokens.push_back(current);
    current.clear();
  };
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (c == '\'' && !current.empty()) {
      current.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> content_tokens(std::string_view s) {
  auto tokens = tokenize(s);
  std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
  return tokens;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start <= s.size()) {
    const size_t pos = s.find('\n', start);
    if (pos == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      break;
    }
    lines.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

}  // namespace factforge
