#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kvr {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr std::size_t kByteVocabSize = 256;

/// Byte-level encoding: each UTF-8 byte becomes its own token id.
TokenSeq tokenize(std::string_view text);

/// Exact inverse of tokenize. Throws ErrorKind::Decode (with the byte offset)
/// if the ids are out of range or do not form valid UTF-8.
std::string detokenize(const TokenSeq& tokens);

/// Offset of the first invalid byte, or nullopt if `bytes` is valid UTF-8.
std::optional<std::size_t> first_invalid_utf8(std::string_view bytes);

/// Printable, reversible rendering of an arbitrary token sequence. Valid UTF-8
/// text passes through; control bytes and bytes that break UTF-8 become
/// `\xNN`, and a literal backslash becomes `\\`.
std::string render_tokens(const TokenSeq& tokens);

/// Inverse of render_tokens. Throws ErrorKind::Decode on a malformed escape.
TokenSeq parse_rendered(std::string_view rendered);

}  // namespace kvr
