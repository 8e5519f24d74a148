#pragma once

#include <stdexcept>
#include <string>

namespace sseval {

/// Failure category; the CLI maps each one to a distinct exit code.
enum class ErrorKind {
  Parse,         ///< malformed input file or config
  Precondition,  ///< arguments outside an operation's domain
  Consistency,   ///< inputs disagree with each other (ids, plans, partitions)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorKind::Parse, what) {}
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

struct ConsistencyError : Error {
  explicit ConsistencyError(const std::string& what) : Error(ErrorKind::Consistency, what) {}
};

}  // namespace sseval
