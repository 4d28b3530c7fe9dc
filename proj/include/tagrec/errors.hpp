#pragma once

#include <stdexcept>
#include <string>

namespace tagrec {

// Base for every error the library raises on bad data or failed backends.
// Precondition violations on call arguments use std::invalid_argument.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class IndexFormatError : public Error {
 public:
  using Error::Error;
};

class UnparseableReply : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CacheConflict : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what, bool transient = false, int status = 0)
      : Error(what), transient_(transient), status_(status) {}

  bool transient() const noexcept { return transient_; }
  int status() const noexcept { return status_; }

 private:
  bool transient_;
  int status_;
};

class AuthError : public BackendError {
 public:
  explicit AuthError(const std::string& what, int status = 401) : BackendError(what, false, status) {}
};

// File-backed generator asked for a record without a stored generation.
class MissingGeneration : public BackendError {
 public:
  explicit MissingGeneration(const std::string& what) : BackendError(what, false, 0) {}
};

}  // namespace tagrec
