#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qdyn {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  /// Short machine-parseable code, e.g. "E_PARSE".
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Symbol outside an alphabet, malformed encoding, invalid input string.
class EncodingError : public Error {
 public:
  explicit EncodingError(const std::string& what) : Error("E_ENCODING", what) {}
};

/// Machine-description text rejected; carries the 1-based source line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("E_PARSE", "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An operation was called outside its contract (halted config stepped,
/// empty window, mismatched bitmap lengths, ...).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("E_USAGE", what) {}
};

/// A RationalMap failed to evaluate (division by zero inside a user map).
class MapError : public Error {
 public:
  explicit MapError(const std::string& what) : Error("E_MAP", what) {}
};

/// A learning functional failed at some iteration index.
class FunctionalError : public Error {
 public:
  explicit FunctionalError(const std::string& what) : Error("E_FUNCTIONAL", what) {}
};

/// A classifier failed on a probe point.
class ClassifierError : public Error {
 public:
  explicit ClassifierError(const std::string& what) : Error("E_CLASSIFIER", what) {}
};

/// Unknown functional name, malformed experiment config.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("E_CONFIG", what) {}
};

/// A decision-tree decider failed; carries the node id in the message.
class DeciderError : public Error {
 public:
  explicit DeciderError(const std::string& what) : Error("E_DECIDER", what) {}
};

/// A structural invariant was violated (IFS map leaving [0,1], ...).
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error("E_INVARIANT", what) {}
};

/// Orbit values exceeded the configured bit-size cap.
class DenominatorOverflow : public Error {
 public:
  explicit DenominatorOverflow(const std::string& what) : Error("E_OVERFLOW", what) {}
};

}  // namespace qdyn
