#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace kvr {

/// Writes `bytes` to a sibling temp file, optionally fsyncs it, then renames
/// it over `path`. Throws ErrorKind::Io with the path on failure.
void atomic_write_file(const std::filesystem::path& path, std::string_view bytes,
                       bool sync = true);

/// Reads a whole file. Throws ErrorKind::Io with the path on failure.
std::string read_file(const std::filesystem::path& path);

}  // namespace kvr
