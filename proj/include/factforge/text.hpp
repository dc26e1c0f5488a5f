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

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace factforge {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercases, trims, and collapses internal whitespace runs to one space.
std::string normalize_text(std::string_view s);

// Lowercase alphanumeric tokens (apostrophes inside words are kept).
std::vector<std::string> tokenize(std::string_view s);

// tokenize() minus stopwords and the "personx" subject placeholder.
std::vector<std::string> content_tokens(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace factforge
