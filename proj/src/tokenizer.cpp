#include "kvrecycle/tokenizer.hpp"

#include "kvrecycle/error.hpp"

namespace kvr {

namespace {

// Length of the well-formed UTF-8 sequence starting at bytes[pos], or 0.
std::size_t utf8_sequence_length(std::string_view bytes, std::size_t pos) {
  const auto at = [&](std::size_t i) { return static_cast<unsigned char>(bytes[i]); };
  const unsigned char lead = at(pos);
  std::size_t len = 0;
  unsigned char lo = 0x80;
  unsigned char hi = 0xBF;
  if (lead < 0x80) return 1;
  if (lead >= 0xC2 && lead <= 0xDF) {
    len = 2;
  } else if (lead >= 0xE0 && lead <= 0xEF) {
    len = 3;
    if (lead == 0xE0) lo = 0xA0;
    if (lead == 0xED) hi = 0x9F;  // surrogates
  } else if (lead >= 0xF0 && lead <= 0xF4) {
    len = 4;
    if (lead == 0xF0) lo = 0x90;
    if (lead == 0xF4) hi = 0x8F;
  } else {
    return 0;
  }
  if (pos + len > bytes.size()) return 0;
  if (at(pos + 1) < lo || at(pos + 1) > hi) return 0;
  for (std::size_t i = 2; i < len; ++i) {
    if (at(pos + i) < 0x80 || at(pos + i) > 0xBF) return 0;
  }
  return len;
}

constexpr char kHex[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

std::optional<std::size_t> first_invalid_utf8(std::string_view bytes) {
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t len = utf8_sequence_length(bytes, pos);
    if (len == 0) return pos;
    pos += len;
  }
  return std::nullopt;
}

std::string detokenize(const TokenSeq& tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= kByteVocabSize) {
      throw Error(ErrorKind::Decode, "token id " + std::to_string(tokens[i]) +
                                         " out of range at offset " + std::to_string(i));
    }
    out.push_back(static_cast<char>(tokens[i]));
  }
  if (auto bad = first_invalid_utf8(out)) {
    throw Error(ErrorKind::Decode, "invalid UTF-8 at offset " + std::to_string(*bad));
  }
  return out;
}

std::string render_tokens(const TokenSeq& tokens) {
  std::string bytes;
  bytes.reserve(tokens.size());
  for (TokenId t : tokens) bytes.push_back(static_cast<char>(t & 0xFF));

  std::string out;
  const auto escape = [&](unsigned char b) {
    out += "\\x";
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  };
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto b = static_cast<unsigned char>(bytes[pos]);
    if (b == '\\') {
      out += "\\\\";
      ++pos;
    } else if (b < 0x20 || b == 0x7F) {
      escape(b);
      ++pos;
    } else if (const std::size_t len = utf8_sequence_length(bytes, pos); len > 0) {
      out.append(bytes, pos, len);
      pos += len;
    } else {
      escape(b);
      ++pos;
    }
  }
  return out;
}

TokenSeq parse_rendered(std::string_view rendered) {
  TokenSeq ids;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const char c = rendered[i];
    if (c != '\\') {
      ids.push_back(static_cast<unsigned char>(c));
      continue;
    }
    if (i + 1 < rendered.size() && rendered[i + 1] == '\\') {
      ids.push_back('\\');
      i += 1;
    } else if (i + 3 < rendered.size() && rendered[i + 1] == 'x' &&
               hex_value(rendered[i + 2]) >= 0 && hex_value(rendered[i + 3]) >= 0) {
      ids.push_back(static_cast<TokenId>(hex_value(rendered[i + 2]) * 16 +
                                         hex_value(rendered[i + 3])));
      i += 3;
    } else {
      throw Error(ErrorKind::Decode, "malformed escape at offset " + std::to_string(i));
    }
  }
  return ids;
}

}  // namespace kvr
