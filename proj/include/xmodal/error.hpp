#pragma once

#include <stdexcept>
#include <string>

namespace xmodal {

/// Invalid user-supplied configuration or input files (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A report binding or document that does not match the expected schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Statistics called outside its domain (zero variance, n = 0, ...).
class StatsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace xmodal
