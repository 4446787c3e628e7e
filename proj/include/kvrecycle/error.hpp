#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kvr {

enum class ErrorKind {
  Shape,
  DegenerateEmbedding,
  Decode,
  Config,
  ContextOverflow,
  EmptyStep,
  EmptyCache,
  CorruptCache,
  StaleCache,
  Io,
  Join,
  NoFit,
  Usage,
};

std::string_view to_string(ErrorKind kind);

/// Every failure surfaced by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// Process exit code for an error: 1 usage, 2 data, 3 I/O.
int exit_code(ErrorKind kind);

}  // namespace kvr
