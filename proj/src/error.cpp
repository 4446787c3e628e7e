#include "kvrecycle/error.hpp"

namespace kvr {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::DegenerateEmbedding: return "degenerate embedding";
    case ErrorKind::Decode: return "decode error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::ContextOverflow: return "context overflow";
    case ErrorKind::EmptyStep: return "empty step";
    case ErrorKind::EmptyCache: return "empty cache";
    case ErrorKind::CorruptCache: return "corrupt cache";
    case ErrorKind::StaleCache: return "stale cache";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Join: return "join error";
    case ErrorKind::NoFit: return "no fit";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Config:
      return 1;
    case ErrorKind::Io:
      return 3;
    default:
      return 2;
  }
}

}  // namespace kvr
