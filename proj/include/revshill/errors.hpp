#pragma once

#include <stdexcept>
#include <string>

namespace revshill {

// Bad input data (unreadable files, schema problems, empty corpora).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required upstream artifact (checkpoint, vocabulary, ...) is absent or stale.
class MissingPrerequisite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training aborted because validation loss kept worsening or became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace revshill
