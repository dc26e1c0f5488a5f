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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace factforge {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file. Parent directories are created.
void atomic_write_file(const std::filesystem::path& path,
                       std::string_view contents);

// Appends one line (a trailing newline is added) with a single write call.
void append_line(const std::filesystem::path& path, std::string_view line);

// Non-empty lines of a newline-delimited file, paired with 1-based line
// numbers.
struct NumberedLine {
  size_t line_number;
  std::string text;
};
std::vector<NumberedLine> read_record_lines(std::string_view contents);

}  // namespace factforge
