#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace drivemap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed container bytes. `entry()` names the offending entry when one is known.
class ParseError : public Error {
 public:
  ParseError(std::string entry, const std::string& message)
      : Error(entry.empty() ? message : "entry '" + entry + "': " + message), entry_(std::move(entry)) {}

  const std::string& entry() const noexcept {
    return entry_;
  }

 private:
  std::string entry_;
};

/// Clip bundle JSON that does not match the documented schema. `path()` is a JSON pointer.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept {
    return path_;
  }

 private:
  std::string path_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised by HEF when the target face covers no pixel of the image.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

} // namespace drivemap
