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

#include <stdexcept>
#include <string>

namespace factforge {

// Root of the error hierarchy. Every error carries a process exit code so the
// CLI can map failures without inspecting message text.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, int exit_code = 2)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, 1) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what, 2) {}
};

// Input that does not follow the declared record schema.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(what, 2) {}
};

// Stored bytes do not match their recorded digest.
class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& what) : Error(what, 3) {}
};

class NormalizationError : public Error {
 public:
  explicit NormalizationError(const std::string& what) : Error(what, 2) {}
};

// A pluggable component returned a value outside its declared contract.
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error(what, 2) {}
};

class TemplateError : public Error {
 public:
  explicit TemplateError(const std::string& what) : Error(what, 2) {}
};

class FixtureMissingError : public Error {
 public:
  explicit FixtureMissingError(const std::string& key)
      : Error("no replay fixture for request key " + key, 2), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status)
      : Error(what, 2), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(what, 2) {}
};

}  // namespace factforge
