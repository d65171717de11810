// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hybridgrad {

/// Invalid or inconsistent configuration: bad key, value out of range,
/// missing file, or incompatible policies. Mapped to process exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation would exceed a hard resource bound, e.g. the sequence
/// enumeration cap. Mapped to process exit code 3.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hybridgrad
